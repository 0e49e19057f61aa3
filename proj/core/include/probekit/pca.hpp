#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "probekit/direction.hpp"

namespace probekit {

inline constexpr Eigen::Index kDefaultPcaComponents = 64;

// Training-split PCA for one (dataset, model, pooling, layer) setting.
//
// Rows of `components` are orthonormal principal directions ordered by
// decreasing variance. Each row's sign is fixed so that its largest-magnitude
// entry is positive.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;  // k x d
  Eigen::VectorXd explained_variance_ratio;
  std::uint64_t n_train = 0;
  // Rank reductions and tied eigenvalues found while fitting.
  std::vector<std::string> notes;

  Eigen::Index k() const { return components.rows(); }
  Eigen::Index d() const { return components.cols(); }

  void validate() const;

  // Wraps an externally built orthonormal basis (rows). Mean defaults to 0 and
  // explained variance to zeros.
  static PcaModel from_basis(Eigen::MatrixXd basis, Eigen::VectorXd mean = {});
};

// Fits on the rows of `X_train`. Requires n >= 2 and k <= min(n - 1, d). If the
// data has numerical rank below k, k is reduced and a note recorded.
PcaModel fit_pca(const Eigen::MatrixXd& X_train, Eigen::Index k = kDefaultPcaComponents);

// Z = (X - mean) W^T
Eigen::MatrixXd transform(const PcaModel& model, const Eigen::MatrixXd& X);

struct VarianceRow {
  Eigen::Index component = 0;  // 1-based
  double ratio = 0.0;
  double cumulative = 0.0;
};

struct VarianceReport {
  std::vector<VarianceRow> rows;
  // Last retained component explains < 1% of total variance.
  bool tail_below_one_percent = false;
  // First component explains >= 99% of total variance.
  bool single_direction = false;
  std::vector<std::string> notes;
};

VarianceReport explained_variance_report(const PcaModel& model);
std::string variance_report_csv(const VarianceReport& report);

// Re-expresses a PCA-space scorer in the embedding space:
//   w_x = W^T w_z,  b_x = b - w_x . mean
// so that w_x . x + b_x == w_z . z + b for every x.
ProbeDirection map_back(const ProbeDirection& dir, const PcaModel& model);

// Binary block ("RQPM", f64 fields) plus a JSON descriptor at `<path>.json`.
void save_pca(const std::string& path, const PcaModel& model, const nlohmann::json& extra = {});
PcaModel load_pca(const std::string& path);

}  // namespace probekit
