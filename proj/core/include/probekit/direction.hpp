#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace probekit {

enum class ProbeKind { diffmean, logistic, hinge };
enum class SpaceKind { pca, embedding };

std::string_view to_string(ProbeKind kind);
std::string_view to_string(SpaceKind space);
ProbeKind parse_probe_kind(std::string_view text);

inline constexpr ProbeKind kAllProbeKinds[] = {ProbeKind::diffmean, ProbeKind::logistic,
                                               ProbeKind::hinge};

// Where a direction came from and how it was selected.
struct TrainingInfo {
  double l2_lambda = 0.0;
  std::uint32_t iterations = 0;
  std::uint32_t selected_iteration = 0;
  bool converged = true;
  bool flipped = false;
  std::optional<double> validation_auroc;
  std::uint64_t seed = 0;
};

// A linear scorer s(x) = w.x + b living either in a PCA-k coordinate system
// or in the full embedding space.
struct ProbeDirection {
  Eigen::VectorXd w;
  double bias = 0.0;
  SpaceKind space = SpaceKind::embedding;
  ProbeKind kind = ProbeKind::diffmean;
  std::uint32_t layer = 0;
  std::string source_setting;
  TrainingInfo info;

  Eigen::Index dim() const { return w.size(); }
  void validate() const;
  ProbeDirection negated() const;
};

// Binary block ("RQPD", f64 weights) plus a JSON descriptor written to
// `<path>.json`.
void save_direction(const std::string& path, const ProbeDirection& dir);
ProbeDirection load_direction(const std::string& path);
nlohmann::json direction_descriptor(const ProbeDirection& dir);

}  // namespace probekit
