#include "probekit/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "probekit/errors.hpp"

namespace probekit {

namespace {

void check_shapes(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("alignment: ambient dimensions differ (" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.cols()) + ")");
  }
  if (a.rows() != b.rows()) {
    throw DimensionError("alignment: subspace dimensions differ (" + std::to_string(a.rows()) +
                         " vs " + std::to_string(b.rows()) + ")");
  }
  if (a.rows() == 0) throw DimensionError("alignment: empty subspace");
}

// Lexicographic order on matrix entries, used to evaluate (a, b) and (b, a)
// through the same arithmetic.
bool lex_less(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a.data()[i] != b.data()[i]) return a.data()[i] < b.data()[i];
  }
  return false;
}

}  // namespace

void SubspacePair::validate() const { check_shapes(a.components, b.components); }

std::vector<double> principal_angles(const Eigen::MatrixXd& a_in, const Eigen::MatrixXd& b_in) {
  check_shapes(a_in, b_in);
  const bool swap = lex_less(b_in, a_in);
  const Eigen::MatrixXd& a = swap ? b_in : a_in;
  const Eigen::MatrixXd& b = swap ? a_in : b_in;
  const Eigen::Index k = a.rows();

  const Eigen::MatrixXd cross = a * b.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> cos_svd(cross);
  const Eigen::VectorXd cosines = cos_svd.singularValues();  // descending

  // Columns of the residual of b's basis after projecting onto span(a).
  const Eigen::MatrixXd residual = b.transpose() - a.transpose() * cross;
  Eigen::JacobiSVD<Eigen::MatrixXd> sin_svd(residual);
  Eigen::VectorXd sines = sin_svd.singularValues();  // descending
  std::sort(sines.data(), sines.data() + sines.size());

  std::vector<double> angles(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    const double c = std::clamp(cosines[i], 0.0, 1.0);
    if (c * c >= 0.5) {
      angles[static_cast<std::size_t>(i)] = std::asin(std::clamp(sines[i], 0.0, 1.0));
    } else {
      angles[static_cast<std::size_t>(i)] = std::acos(c);
    }
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

std::vector<double> principal_angles(const SubspacePair& pair) {
  return principal_angles(pair.a.components, pair.b.components);
}

double geodesic_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double sum = 0.0;
  for (double theta : principal_angles(a, b)) sum += theta * theta;
  return std::sqrt(sum);
}

double geodesic_distance(const SubspacePair& pair) {
  return geodesic_distance(pair.a.components, pair.b.components);
}

double mean_pc_cosine(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  check_shapes(a, b);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double na = a.row(i).norm();
    const double nb = b.row(i).norm();
    if (na == 0.0 || nb == 0.0) throw InvariantError("mean_pc_cosine: zero basis vector");
    sum += a.row(i).dot(b.row(i)) / (na * nb);
  }
  return sum / static_cast<double>(a.rows());
}

double mean_pc_cosine(const SubspacePair& pair) {
  return mean_pc_cosine(pair.a.components, pair.b.components);
}

std::string alignment_csv(const std::vector<AlignmentRow>& rows) {
  std::ostringstream out;
  out << "model,layer,normalized_layer,geodesic,mean_cosine\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), ",%u,%.17g,%.17g,%.17g\n", r.layer, r.normalized_layer,
                  r.geodesic, r.mean_cosine);
    out << r.model << buf;
  }
  return out.str();
}

}  // namespace probekit
