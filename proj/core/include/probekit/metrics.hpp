#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probekit/direction.hpp"
#include "probekit/score_vector.hpp"

namespace probekit {

// Average ranks, 1 = smallest value, ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

// P(s+ > s-) + 0.5 P(s+ == s-) over all positive/negative pairs, via the
// Mann-Whitney rank sum. labels: 1 = positive, 0 = negative.
double auroc(std::span<const double> scores, std::span<const int> labels);
inline double auroc(const ScoreVector& s, std::span<const int> labels) {
  return auroc(s.scores, labels);
}

// Pearson correlation of average-tie ranks. Throws InvariantError if either
// input is constant.
double spearman(std::span<const double> a, std::span<const double> b);
// Aligns `b` to `a` by id before correlating.
double spearman(const ScoreVector& a, const ScoreVector& b);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

struct BootstrapResult {
  Interval interval;
  std::size_t used = 0;     // resamples with a defined correlation
  std::size_t skipped = 0;  // resamples where one side was constant
};

// Percentile bootstrap over examples.
BootstrapResult spearman_bootstrap(std::span<const double> a, std::span<const double> b,
                                   std::size_t resamples = 1000, std::uint64_t seed = 0,
                                   double level = 0.95);

// ceil(p * n), guarding against floating error in p * n.
std::size_t tail_size(double p, std::size_t n);

struct TailSets {
  std::vector<std::string> top;     // highest scores
  std::vector<std::string> bottom;  // lowest scores
  double p = 0.0;
};

// Score ties are broken by ascending id.
TailSets tail_sets(const ScoreVector& s, double p);

double jaccard(std::vector<std::string> a, std::vector<std::string> b);

struct TailJaccard {
  double top = 0.0;
  double bottom = 0.0;
};

TailJaccard jaccard_tails(const ScoreVector& a, const ScoreVector& b, double p);

// u.v / (|u| |v|); bias is ignored for directions.
double cosine(const Eigen::VectorXd& u, const Eigen::VectorXd& v);
double cosine(const ProbeDirection& u, const ProbeDirection& v);

}  // namespace probekit
