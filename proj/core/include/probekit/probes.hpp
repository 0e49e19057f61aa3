#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probekit/activation_store.hpp"
#include "probekit/direction.hpp"
#include "probekit/score_vector.hpp"

namespace probekit {

enum class ValidationMetric { auroc };

struct TrainConfig {
  double l2_lambda = 1e-2;
  std::uint32_t max_iters = 1000;
  double tol = 1e-9;        // relative objective change
  double step_size = 1.0;   // initial step
  std::uint64_t seed = 0;
  ValidationMetric validation_metric = ValidationMetric::auroc;
  std::uint32_t checkpoint_every = 10;

  void validate() const;
};

inline const std::vector<double> kLambdaGrid{1e-3, 1e-2, 1e-1};

// Annotations stamped on every trained direction.
struct DirectionContext {
  SpaceKind space = SpaceKind::embedding;
  std::uint32_t layer = 0;
  std::string setting;
};

// Per-iteration objective values of accepted steps.
struct TrainTrace {
  std::vector<double> objective;
};

// mean(rhetorical rows) - mean(informational rows), b = 0.
ProbeDirection diffmean(const LabeledMatrix& train, const DirectionContext& ctx = {});

// Mean cross-entropy + (lambda/2)|w|^2, full-batch gradient descent with
// Armijo backtracking. Returns the checkpoint with the best validation AUROC.
ProbeDirection train_logistic(const LabeledMatrix& train, const LabeledMatrix& val,
                              const TrainConfig& cfg, const DirectionContext& ctx = {},
                              TrainTrace* trace = nullptr);

// Mean hinge loss + (lambda/2)|w|^2, full-batch subgradient descent with step
// 1/(lambda t), floored. Same checkpoint selection as train_logistic.
ProbeDirection train_hinge(const LabeledMatrix& train, const LabeledMatrix& val,
                           const TrainConfig& cfg, const DirectionContext& ctx = {},
                           TrainTrace* trace = nullptr);

// Dispatches on kind; with `tune`, picks lambda from kLambdaGrid by
// validation AUROC (ties keep the earlier grid value).
ProbeDirection train_probe(ProbeKind kind, const LabeledMatrix& train, const LabeledMatrix& val,
                           const TrainConfig& cfg, const DirectionContext& ctx = {},
                           bool tune = false);

// s = X w + b
ScoreVector score(const ProbeDirection& dir, const Eigen::MatrixXd& X,
                  std::vector<std::string> ids);
inline ScoreVector score(const ProbeDirection& dir, const LabeledMatrix& m) {
  return score(dir, m.X, m.ids);
}

// Objective values, exposed for tests.
double logistic_objective(const Eigen::MatrixXd& X, const std::vector<int>& y,
                          const Eigen::VectorXd& w, double b, double lambda);
double hinge_objective(const Eigen::MatrixXd& X, const std::vector<int>& y,
                       const Eigen::VectorXd& w, double b, double lambda);

}  // namespace probekit
