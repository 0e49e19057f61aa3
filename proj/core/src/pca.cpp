#include "probekit/pca.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "binary_io.hpp"
#include "probekit/errors.hpp"

namespace probekit {

namespace {

constexpr std::string_view kPcaMagic = "RQPM";
constexpr std::uint32_t kPcaVersion = 1;
constexpr Eigen::Index kMaxCovarianceDim = 4096;
constexpr double kRankTolerance = 1e-10;
constexpr double kTieTolerance = 1e-12;

void canonicalize_signs(Eigen::MatrixXd& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Eigen::Index arg = 0;
    rows.row(i).cwiseAbs().maxCoeff(&arg);
    if (rows(i, arg) < 0) rows.row(i) *= -1.0;
  }
}

}  // namespace

void PcaModel::validate() const {
  if (components.rows() == 0 || components.cols() == 0) {
    throw InvariantError("pca model: empty component matrix");
  }
  if (mean.size() != d()) throw InvariantError("pca model: mean length does not match d");
  if (explained_variance_ratio.size() != k()) {
    throw InvariantError("pca model: explained variance length does not match k");
  }
  for (Eigen::Index i = 0; i < k(); ++i) {
    if (std::abs(components.row(i).norm() - 1.0) > 1e-8) {
      throw InvariantError("pca model: component " + std::to_string(i) + " is not unit norm");
    }
  }
  const Eigen::MatrixXd gram = components * components.transpose();
  if ((gram - Eigen::MatrixXd::Identity(k(), k())).cwiseAbs().maxCoeff() > 1e-6) {
    throw InvariantError("pca model: components are not orthonormal");
  }
  for (Eigen::Index i = 1; i < k(); ++i) {
    if (explained_variance_ratio[i] > explained_variance_ratio[i - 1] + 1e-15) {
      throw InvariantError("pca model: explained variance ratios must be non-increasing");
    }
  }
  if (explained_variance_ratio.sum() > 1.0 + 1e-9) {
    throw InvariantError("pca model: explained variance ratios sum above 1");
  }
}

PcaModel PcaModel::from_basis(Eigen::MatrixXd basis, Eigen::VectorXd mean) {
  PcaModel m;
  if (mean.size() == 0) mean = Eigen::VectorXd::Zero(basis.cols());
  m.mean = std::move(mean);
  m.explained_variance_ratio = Eigen::VectorXd::Zero(basis.rows());
  m.components = std::move(basis);
  m.validate();
  return m;
}

PcaModel fit_pca(const Eigen::MatrixXd& X_train, Eigen::Index k) {
  const Eigen::Index n = X_train.rows();
  const Eigen::Index d = X_train.cols();
  if (n < 2) throw InvariantError("fit_pca: need at least 2 training rows");
  if (k < 1) throw InvariantError("fit_pca: k must be >= 1");
  if (k > std::min(n - 1, d)) {
    throw InvariantError("fit_pca: k too large (k=" + std::to_string(k) +
                         ", max=" + std::to_string(std::min(n - 1, d)) + ")");
  }
  if (!X_train.allFinite()) throw InvariantError("fit_pca: non-finite training data");

  PcaModel model;
  model.n_train = static_cast<std::uint64_t>(n);
  model.mean = X_train.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X_train.rowwise() - model.mean.transpose();
  const double denom = static_cast<double>(n - 1);
  const double total_variance = centered.squaredNorm() / denom;
  if (!(total_variance > 0.0)) throw InvariantError("fit_pca: training data has zero variance");

  // Eigenvalues in decreasing order with matching directions as rows.
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd directions;
  if (d <= kMaxCovarianceDim && n > d) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw Error("fit_pca: eigendecomposition failed");
    eigenvalues = solver.eigenvalues().reverse();
    directions = solver.eigenvectors().rowwise().reverse().transpose();
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    eigenvalues = svd.singularValues().array().square() / denom;
    directions = svd.matrixV().transpose();
  }
  eigenvalues = eigenvalues.cwiseMax(0.0);

  const double tol = eigenvalues[0] * kRankTolerance;
  Eigen::Index rank = 0;
  while (rank < eigenvalues.size() && eigenvalues[rank] > tol) ++rank;
  if (rank < k) {
    model.notes.push_back("rank-deficient training data: k reduced from " + std::to_string(k) +
                          " to " + std::to_string(rank));
    k = rank;
  }

  for (Eigen::Index i = 0; i + 1 < std::min<Eigen::Index>(k + 1, eigenvalues.size()); ++i) {
    if (eigenvalues[i] - eigenvalues[i + 1] <= kTieTolerance * eigenvalues[0]) {
      model.notes.push_back("tied eigenvalues at components " + std::to_string(i + 1) + " and " +
                            std::to_string(i + 2) + "; component identity is arbitrary");
    }
  }

  model.components = directions.topRows(k);
  canonicalize_signs(model.components);
  model.explained_variance_ratio = eigenvalues.head(k) / total_variance;
  return model;
}

Eigen::MatrixXd transform(const PcaModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.d()) {
    throw DimensionError("transform: input has " + std::to_string(X.cols()) +
                         " columns, model expects " + std::to_string(model.d()));
  }
  return (X.rowwise() - model.mean.transpose()) * model.components.transpose();
}

VarianceReport explained_variance_report(const PcaModel& model) {
  VarianceReport report;
  double cumulative = 0.0;
  for (Eigen::Index i = 0; i < model.k(); ++i) {
    cumulative += model.explained_variance_ratio[i];
    report.rows.push_back({i + 1, model.explained_variance_ratio[i], cumulative});
  }
  if (!report.rows.empty()) {
    report.tail_below_one_percent = report.rows.back().ratio < 0.01;
    report.single_direction = report.rows.front().ratio >= 0.99;
  }
  report.notes = model.notes;
  return report;
}

std::string variance_report_csv(const VarianceReport& report) {
  std::ostringstream out;
  out << "component,evr,cumulative_evr\n";
  char buf[96];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g\n", static_cast<long long>(row.component),
                  row.ratio, row.cumulative);
    out << buf;
  }
  return out.str();
}

ProbeDirection map_back(const ProbeDirection& dir, const PcaModel& model) {
  if (dir.space != SpaceKind::pca) {
    throw InvariantError("map_back: direction is already in embedding space");
  }
  if (dir.dim() != model.k()) {
    throw DimensionError("map_back: direction has k=" + std::to_string(dir.dim()) +
                         ", PCA model has k=" + std::to_string(model.k()));
  }
  ProbeDirection out = dir;
  out.space = SpaceKind::embedding;
  out.w = model.components.transpose() * dir.w;
  out.bias = dir.bias - out.w.dot(model.mean);
  return out;
}

void save_pca(const std::string& path, const PcaModel& model, const nlohmann::json& extra) {
  model.validate();
  detail::ByteWriter w;
  w.put_bytes(kPcaMagic);
  w.put<std::uint32_t>(kPcaVersion);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(model.k()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(model.d()));
  w.put<std::uint64_t>(model.n_train);
  w.put_array(model.mean.data(), static_cast<std::size_t>(model.d()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows =
      model.components;
  w.put_array(rows.data(), static_cast<std::size_t>(rows.size()));
  w.put_array(model.explained_variance_ratio.data(), static_cast<std::size_t>(model.k()));
  detail::write_file_bytes(path, w.bytes());

  nlohmann::ordered_json j;
  j["k"] = model.k();
  j["d"] = model.d();
  j["n_train"] = model.n_train;
  j["explained_variance_ratio"] = std::vector<double>(
      model.explained_variance_ratio.data(), model.explained_variance_ratio.data() + model.k());
  j["notes"] = model.notes;
  if (extra.is_object()) {
    for (const auto& [key, value] : extra.items()) j[key] = value;
  }
  detail::write_text_file(path + ".json", j.dump(2) + "\n");
}

PcaModel load_pca(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  detail::ByteReader r(bytes, path);
  if (r.take_bytes(4) != kPcaMagic) throw BadMagicError(path + ": bad magic (expected RQPM)");
  const auto version = r.get<std::uint32_t>();
  if (version != kPcaVersion) {
    throw UnsupportedVersionError(path + ": unsupported version " + std::to_string(version));
  }
  const auto k = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  const auto d = static_cast<Eigen::Index>(r.get<std::uint64_t>());
  PcaModel model;
  model.n_train = r.get<std::uint64_t>();
  if (k < 1 || d < 1 || k > d) throw FormatError(path + ": bad k/d fields");
  // mean plus k component rows; bounds the allocation before reading.
  r.expect(static_cast<std::uint64_t>(d), sizeof(double));
  r.expect(static_cast<std::uint64_t>(k) + 1, sizeof(double) * static_cast<std::size_t>(d));
  model.mean.resize(d);
  r.get_array(model.mean.data(), static_cast<std::size_t>(d));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(k, d);
  r.get_array(rows.data(), static_cast<std::size_t>(k * d));
  model.components = rows;
  model.explained_variance_ratio.resize(k);
  r.get_array(model.explained_variance_ratio.data(), static_cast<std::size_t>(k));
  if (r.remaining() != 0) throw FormatError(path + ": trailing bytes");
  try {
    const auto j = nlohmann::json::parse(detail::read_text_file(path + ".json"));
    if (j.contains("notes")) model.notes = j["notes"].get<std::vector<std::string>>();
  } catch (const NotFoundError&) {
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ".json: " + e.what());
  }
  model.validate();
  return model;
}

}  // namespace probekit
