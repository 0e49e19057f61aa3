#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probekit/pca.hpp"

namespace probekit {

// Two k-dimensional subspaces of the same ambient space, each given by
// orthonormal rows.
struct SubspacePair {
  const PcaModel& a;
  const PcaModel& b;

  void validate() const;
};

// Principal angles in [0, pi/2], non-decreasing. Cosines come from the
// singular values of A B^T (clamped to [0, 1]); angles below pi/4 are taken
// from the sines of the projection residual instead, which stays accurate
// near zero.
std::vector<double> principal_angles(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
std::vector<double> principal_angles(const SubspacePair& pair);

// sqrt(sum theta_i^2)
double geodesic_distance(const SubspacePair& pair);
double geodesic_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

// (1/k) sum_i cos(A_i, B_i); sensitive to component order and sign.
double mean_pc_cosine(const SubspacePair& pair);
double mean_pc_cosine(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct AlignmentRow {
  std::string model;
  std::uint32_t layer = 0;
  double normalized_layer = 0.0;
  double geodesic = 0.0;
  double mean_cosine = 0.0;
};

// CSV columns: model,layer,normalized_layer,geodesic,mean_cosine
std::string alignment_csv(const std::vector<AlignmentRow>& rows);

}  // namespace probekit
