#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probekit/activation_store.hpp"

namespace probekit::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "probekit");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                double sd = 1.0);

// k x d with orthonormal rows.
Eigen::MatrixXd random_orthonormal_rows(std::mt19937_64& rng, Eigen::Index k, Eigen::Index d);

// Random token- or example-level file with small integer-ish values.
ActivationFile random_activation_file(std::mt19937_64& rng, ActivationKind kind,
                                      std::uint32_t max_examples = 6, std::uint32_t max_dim = 5,
                                      std::uint32_t max_tokens = 7);

// Meta whose n_tokens agree with a token-level file; spans cover the last
// half of each example. Labels alternate starting with rhetorical.
DatasetMeta meta_for(const ActivationFile& file, Split split = Split::train);

LabeledMatrix labeled(Eigen::MatrixXd X, std::vector<int> y);

// Two Gaussian classes at +/- delta / 2 with unit noise.
LabeledMatrix two_gaussians(std::mt19937_64& rng, const Eigen::VectorXd& delta,
                            std::size_t n_per_class, double sigma = 1.0,
                            const std::string& id_prefix = "x");

}  // namespace probekit::testing
