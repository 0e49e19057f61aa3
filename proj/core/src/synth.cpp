#include "probekit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>

#include "probekit/errors.hpp"

namespace probekit {

namespace {

Eigen::MatrixXd random_orthonormal_columns(std::mt19937_64& rng, Eigen::Index d, Eigen::Index m) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(d, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    for (Eigen::Index r = 0; r < d; ++r) g(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, m);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (d < 1) throw InvariantError("synth: d must be >= 1");
  if (n_per_class < 1) throw InvariantError("synth: n_per_class must be >= 1");
  if (!(noise_sigma > 0.0)) throw InvariantError("synth: sigma must be > 0");
  if (delta_mu.size() != 1 && delta_mu.size() != d) {
    throw InvariantError("synth: delta_mu must be a scalar magnitude or a length-d vector");
  }
  if (n_layers < 1) throw InvariantError("synth: n_layers must be >= 1");
  if (!layer_gain.empty() && layer_gain.size() != n_layers) {
    throw InvariantError("synth: layer_gain needs one entry per layer");
  }
  if (nuisance_dims > d) throw InvariantError("synth: nuisance_dims cannot exceed d");
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const Eigen::Index d = spec.d;
  const std::uint32_t n = 2 * spec.n_per_class;

  SyntheticDataset out;
  std::mt19937_64 dir_rng(spec.direction_seed);
  std::normal_distribution<double> normal;
  for (std::uint32_t l = 0; l < spec.n_layers; ++l) {
    Eigen::VectorXd delta(d);
    if (spec.delta_mu.size() == 1) {
      for (Eigen::Index i = 0; i < d; ++i) delta[i] = normal(dir_rng);
      const double norm = delta.norm();
      delta *= norm > 0 ? spec.delta_mu[0] / norm : 0.0;
    } else {
      delta = Eigen::Map<const Eigen::VectorXd>(spec.delta_mu.data(), d);
      if (l > 0) delta = random_orthonormal_columns(dir_rng, d, d) * delta;
    }
    if (!spec.layer_gain.empty()) delta *= spec.layer_gain[l];
    out.delta_mu.push_back(std::move(delta));
  }

  std::mt19937_64 rng(spec.seed);
  std::vector<int> labels(n);
  for (std::uint32_t i = 0; i < n; ++i) labels[i] = i < spec.n_per_class ? 1 : 0;
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::uint32_t>(std::llround(0.7 * n));
  const auto n_val = static_cast<std::uint32_t>(std::llround(0.1 * n));
  std::vector<Split> splits(n);
  for (std::uint32_t pos = 0; pos < n; ++pos) {
    splits[order[pos]] = pos < n_train ? Split::train
                         : pos < n_train + n_val ? Split::validation
                                                 : Split::test;
  }

  out.meta.dataset_name = spec.dataset;
  out.meta.tokenizer_id = "synthetic";
  out.meta.model_id = spec.model_id;
  out.meta.n_layers = spec.n_layers;
  std::uniform_int_distribution<std::uint64_t> length(8, 256);
  for (std::uint32_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "ex%06u", i);
    const auto tokens = length(rng);
    out.meta.examples.push_back({id, labels[i] == 1 ? Label::rhetorical : Label::informational,
                                 splits[i], tokens, {tokens / 2, tokens}});
  }

  std::vector<Eigen::MatrixXd> nuisance;
  for (std::uint32_t l = 0; l < spec.n_layers; ++l) {
    nuisance.push_back(random_orthonormal_columns(rng, d, spec.nuisance_dims));
  }
  std::vector<Eigen::MatrixXd> rows(spec.n_layers, Eigen::MatrixXd(n, d));
  const double nuisance_sd = spec.noise_sigma * spec.nuisance_scale;
  for (std::uint32_t i = 0; i < n; ++i) {
    const double sign = labels[i] == 1 ? 0.5 : -0.5;
    for (std::uint32_t l = 0; l < spec.n_layers; ++l) {
      auto row = rows[l].row(i);
      for (Eigen::Index c = 0; c < d; ++c) row[c] = spec.noise_sigma * normal(rng);
      row += sign * out.delta_mu[l].transpose();
      for (Eigen::Index j = 0; j < nuisance[l].cols(); ++j) {
        row += nuisance_sd * normal(rng) * nuisance[l].col(j).transpose();
      }
    }
  }

  constexpr Split kOrder[] = {Split::train, Split::validation, Split::test};
  for (std::uint32_t l = 0; l < spec.n_layers; ++l) {
    std::array<ActivationFile, 3> files;
    for (std::size_t s = 0; s < 3; ++s) {
      std::vector<Eigen::Index> idx;
      for (std::uint32_t i = 0; i < n; ++i) {
        if (splits[i] == kOrder[s]) idx.push_back(i);
      }
      Eigen::MatrixXd sub(static_cast<Eigen::Index>(idx.size()), d);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        sub.row(static_cast<Eigen::Index>(r)) = rows[l].row(idx[r]);
      }
      files[s] = ActivationFile::from_matrix(sub, l);
    }
    out.files.push_back(std::move(files));
  }
  return out;
}

std::vector<std::string> write_synthetic(const SyntheticDataset& data, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create directory");
  std::vector<std::string> written;
  const auto meta_path = (fs::path(dir) / meta_filename(data.meta.dataset_name)).string();
  write_meta(meta_path, data.meta);
  written.push_back(meta_path);
  constexpr Split kOrder[] = {Split::train, Split::validation, Split::test};
  for (std::size_t l = 0; l < data.files.size(); ++l) {
    for (std::size_t s = 0; s < 3; ++s) {
      const auto path = (fs::path(dir) / activation_filename(data.meta.dataset_name, kOrder[s],
                                                              static_cast<std::uint32_t>(l)))
                            .string();
      write_activation_file(path, data.files[l][s]);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace probekit
