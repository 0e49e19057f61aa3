#include "fixtures.hpp"

#include <atomic>
#include <cstdio>

namespace probekit::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  for (;;) {
    char name[96];
    std::snprintf(name, sizeof(name), "%s-%08x-%u", tag.c_str(), rd(), counter++);
    path_ = fs::temp_directory_path() / name;
    if (fs::create_directory(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                double sd) {
  std::normal_distribution<double> normal(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

Eigen::MatrixXd random_orthonormal_rows(std::mt19937_64& rng, Eigen::Index k, Eigen::Index d) {
  const Eigen::MatrixXd g = gaussian_matrix(rng, d, k);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, k);
  return q.transpose();
}

ActivationFile random_activation_file(std::mt19937_64& rng, ActivationKind kind,
                                      std::uint32_t max_examples, std::uint32_t max_dim,
                                      std::uint32_t max_tokens) {
  std::uniform_int_distribution<std::uint32_t> n_dist(1, max_examples);
  std::uniform_int_distribution<std::uint32_t> d_dist(1, max_dim);
  std::uniform_int_distribution<std::uint32_t> t_dist(1, max_tokens);
  std::uniform_int_distribution<std::uint32_t> layer_dist(0, 80);
  std::normal_distribution<float> value(0.0f, 4.0f);

  ActivationFile f;
  f.kind = kind;
  f.layer_index = layer_dist(rng);
  f.hidden_dim = d_dist(rng);
  f.n_examples = n_dist(rng);
  if (kind == ActivationKind::token_level) {
    f.offsets.push_back(0);
    for (std::uint32_t i = 0; i < f.n_examples; ++i) f.offsets.push_back(f.offsets.back() + t_dist(rng));
    f.total_rows = f.offsets.back();
  } else {
    f.total_rows = f.n_examples;
  }
  f.data.resize(static_cast<std::size_t>(f.total_rows * f.hidden_dim));
  for (auto& v : f.data) v = value(rng);
  return f;
}

DatasetMeta meta_for(const ActivationFile& file, Split split) {
  DatasetMeta meta;
  meta.dataset_name = "fixture";
  meta.tokenizer_id = "tok";
  meta.model_id = "model";
  meta.n_layers = file.layer_index + 1;
  for (std::uint32_t i = 0; i < file.n_examples; ++i) {
    const auto [b, e] = file.token_range(i);
    const auto t = e - b;
    char id[16];
    std::snprintf(id, sizeof(id), "e%04u", i);
    meta.examples.push_back({id, i % 2 == 0 ? Label::rhetorical : Label::informational, split, t,
                             {t / 2, t}});
  }
  return meta;
}

LabeledMatrix labeled(Eigen::MatrixXd X, std::vector<int> y) {
  LabeledMatrix m;
  m.X = std::move(X);
  m.y = std::move(y);
  for (std::size_t i = 0; i < m.y.size(); ++i) m.ids.push_back("r" + std::to_string(100000 + i));
  return m;
}

LabeledMatrix two_gaussians(std::mt19937_64& rng, const Eigen::VectorXd& delta,
                            std::size_t n_per_class, double sigma, const std::string& id_prefix) {
  const auto d = delta.size();
  const auto n = static_cast<Eigen::Index>(2 * n_per_class);
  LabeledMatrix m;
  m.X = gaussian_matrix(rng, n, d, sigma);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = i % 2 == 0 ? 1 : 0;
    m.X.row(i) += (label == 1 ? 0.5 : -0.5) * delta.transpose();
    m.y.push_back(label);
    m.ids.push_back(id_prefix + std::to_string(1000000 + i));
  }
  return m;
}

}  // namespace probekit::testing
