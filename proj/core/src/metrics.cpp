#include "probekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "probekit/errors.hpp"

namespace probekit {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 (0-based) share rank ((i+1) + j) / 2
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = rank;
    i = j;
  }
  return ranks;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("auroc: scores and labels differ in length");
  }
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InvariantError("auroc: non-finite score");
    if (labels[i] == 1) ++n_pos;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InvariantError("auroc: labels contain a single class");

  const auto ranks = average_ranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("spearman: inputs differ in length");
  const std::size_t n = a.size();
  if (n < 2) throw InvariantError("spearman: need at least 2 observations");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double mean = 0.5 * static_cast<double>(n + 1);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) {
    throw InvariantError("spearman: undefined for a constant score vector");
  }
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

namespace {

// Returns b's scores reordered to match a's ids.
std::vector<double> align_by_id(const ScoreVector& a, const ScoreVector& b, const char* op) {
  if (a.ids.size() != a.scores.size() || b.ids.size() != b.scores.size()) {
    throw InvariantError(std::string(op) + ": scores and ids are not aligned");
  }
  if (a.size() != b.size()) {
    throw InvariantError(std::string(op) + ": score vectors cover different examples");
  }
  if (a.ids == b.ids) return b.scores;
  std::unordered_map<std::string, std::size_t> index;
  index.reserve(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) index.emplace(b.ids[i], i);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto it = index.find(a.ids[i]);
    if (it == index.end()) {
      throw InvariantError(std::string(op) + ": id '" + a.ids[i] + "' missing from second vector");
    }
    out[i] = b.scores[it->second];
  }
  return out;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double spearman(const ScoreVector& a, const ScoreVector& b) {
  const auto bs = align_by_id(a, b, "spearman");
  return spearman(a.scores, bs);
}

BootstrapResult spearman_bootstrap(std::span<const double> a, std::span<const double> b,
                                   std::size_t resamples, std::uint64_t seed, double level) {
  if (a.size() != b.size()) throw DimensionError("spearman_bootstrap: inputs differ in length");
  if (a.size() < 2) throw InvariantError("spearman_bootstrap: need at least 2 observations");
  if (!(level > 0.0 && level < 1.0)) throw InvariantError("spearman_bootstrap: level in (0,1)");
  const std::size_t n = a.size();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<double> ra(n), rb(n), values;
  values.reserve(resamples);
  BootstrapResult result;
  for (std::size_t r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = pick(rng);
      ra[i] = a[idx];
      rb[i] = b[idx];
    }
    try {
      values.push_back(spearman(ra, rb));
    } catch (const InvariantError&) {
      ++result.skipped;
    }
  }
  result.used = values.size();
  if (values.empty()) throw InvariantError("spearman_bootstrap: every resample was degenerate");
  std::sort(values.begin(), values.end());
  const double alpha = (1.0 - level) / 2.0;
  result.interval = {quantile_sorted(values, alpha), quantile_sorted(values, 1.0 - alpha)};
  return result;
}

std::size_t tail_size(double p, std::size_t n) {
  if (!(p > 0.0 && p < 1.0)) throw InvariantError("tail fraction p must lie in (0, 1)");
  const double raw = p * static_cast<double>(n);
  const auto m = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  if (m == 0) throw InvariantError("tail size p*n rounds to 0");
  return std::min(m, n);
}

TailSets tail_sets(const ScoreVector& s, double p) {
  if (s.ids.size() != s.scores.size()) throw InvariantError("tail_sets: scores and ids differ");
  const std::size_t m = tail_size(p, s.size());
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);

  TailSets out;
  out.p = p;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s.scores[a] != s.scores[b]) return s.scores[a] > s.scores[b];
    return s.ids[a] < s.ids[b];
  });
  for (std::size_t i = 0; i < m; ++i) out.top.push_back(s.ids[order[i]]);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s.scores[a] != s.scores[b]) return s.scores[a] < s.scores[b];
    return s.ids[a] < s.ids[b];
  });
  for (std::size_t i = 0; i < m; ++i) out.bottom.push_back(s.ids[order[i]]);
  return out;
}

double jaccard(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  if (a.empty() && b.empty()) return 1.0;
  std::vector<std::string> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  const double inter = static_cast<double>(common.size());
  return inter / (static_cast<double>(a.size() + b.size()) - inter);
}

TailJaccard jaccard_tails(const ScoreVector& a, const ScoreVector& b, double p) {
  align_by_id(a, b, "jaccard_tails");
  const auto ta = tail_sets(a, p);
  const auto tb = tail_sets(b, p);
  return {jaccard(ta.top, tb.top), jaccard(ta.bottom, tb.bottom)};
}

double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  if (u.size() != v.size()) {
    throw DimensionError("cosine: vectors differ in dimension (" + std::to_string(u.size()) +
                         " vs " + std::to_string(v.size()) + ")");
  }
  const double nu = u.squaredNorm();
  const double nv = v.squaredNorm();
  if (nu == 0.0 || nv == 0.0) throw InvariantError("cosine: zero vector");
  return std::clamp(u.dot(v) / std::sqrt(nu * nv), -1.0, 1.0);
}

double cosine(const ProbeDirection& u, const ProbeDirection& v) {
  if (u.space != v.space) {
    throw DimensionError("cosine: directions live in different spaces (map_back first)");
  }
  return cosine(u.w, v.w);
}

}  // namespace probekit
