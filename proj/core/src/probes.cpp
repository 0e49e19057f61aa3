#include "probekit/probes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>

#include "probekit/errors.hpp"
#include "probekit/metrics.hpp"

namespace probekit {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-20;
constexpr double kMaxStep = 1e8;
constexpr double kHingeStepFloor = 1e-4;

void require_two_classes(const LabeledMatrix& m, const char* op) {
  m.validate();
  const auto pos = m.positives();
  if (pos == 0 || pos == m.y.size()) {
    throw InvariantError(std::string(op) + ": training data must contain both classes");
  }
}

void check_inputs(const LabeledMatrix& train, const LabeledMatrix& val, const char* op) {
  require_two_classes(train, op);
  val.validate();
  if (val.rows() == 0) throw InvariantError(std::string(op) + ": validation split is empty");
  if (val.cols() != train.cols()) {
    throw DimensionError(std::string(op) + ": validation dimension differs from training");
  }
}

Eigen::VectorXd signed_labels(const std::vector<int>& y) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[i] == 1 ? 1.0 : -1.0;
  return out;
}

Eigen::VectorXd binary_labels(const std::vector<int>& y) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[i] == 1 ? 1.0 : 0.0;
  return out;
}

// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) {
  return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

double sigmoid(double s) {
  if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// Tracks the best checkpoint by validation AUROC, falling back to the
// (negated) validation loss when the validation split has a single class.
class CheckpointSelector {
 public:
  using Loss = std::function<double(const Eigen::VectorXd&, double)>;

  CheckpointSelector(const LabeledMatrix& val, Loss loss)
      : val_(val), loss_(std::move(loss)) {
    const auto pos = val.positives();
    use_auroc_ = pos > 0 && pos < val.y.size();
  }

  void offer(const Eigen::VectorXd& w, double b, std::uint32_t iteration) {
    const double value = evaluate(w, b);
    if (!best_value_ || value > *best_value_) {
      best_value_ = value;
      best_w_ = w;
      best_b_ = b;
      best_iteration_ = iteration;
    }
  }

  double evaluate(const Eigen::VectorXd& w, double b) const {
    if (use_auroc_) {
      const Eigen::VectorXd s = (val_.X * w).array() + b;
      return auroc(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), val_.y);
    }
    return -loss_(w, b);
  }

  bool uses_auroc() const { return use_auroc_; }
  const Eigen::VectorXd& w() const { return best_w_; }
  double b() const { return best_b_; }
  double value() const { return *best_value_; }
  std::uint32_t iteration() const { return best_iteration_; }

 private:
  const LabeledMatrix& val_;
  Loss loss_;
  bool use_auroc_ = false;
  std::optional<double> best_value_;
  Eigen::VectorXd best_w_;
  double best_b_ = 0.0;
  std::uint32_t best_iteration_ = 0;
};

ProbeDirection finish(const CheckpointSelector& sel, ProbeKind kind, const TrainConfig& cfg,
                      const DirectionContext& ctx, std::uint32_t iterations, bool converged) {
  ProbeDirection dir;
  dir.kind = kind;
  dir.space = ctx.space;
  dir.layer = ctx.layer;
  dir.source_setting = ctx.setting;
  dir.w = sel.w();
  dir.bias = sel.b();
  dir.info.l2_lambda = cfg.l2_lambda;
  dir.info.iterations = iterations;
  dir.info.selected_iteration = sel.iteration();
  dir.info.converged = converged;
  dir.info.seed = cfg.seed;
  if (sel.uses_auroc()) {
    double val_auc = sel.value();
    // Orient so that rhetorical examples score high.
    if (val_auc < 0.5) {
      dir.w = -dir.w;
      dir.bias = -dir.bias;
      dir.info.flipped = true;
      val_auc = 1.0 - val_auc;
    }
    dir.info.validation_auroc = val_auc;
  }
  return dir;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(l2_lambda >= 0.0) || !std::isfinite(l2_lambda)) {
    throw InvariantError("train config: l2_lambda must be a finite non-negative number");
  }
  if (max_iters < 1) throw InvariantError("train config: max_iters must be >= 1");
  if (!(tol >= 0.0)) throw InvariantError("train config: tol must be >= 0");
  if (!(step_size > 0.0)) throw InvariantError("train config: step_size must be > 0");
  if (checkpoint_every < 1) throw InvariantError("train config: checkpoint_every must be >= 1");
}

double logistic_objective(const Eigen::MatrixXd& X, const std::vector<int>& y,
                          const Eigen::VectorXd& w, double b, double lambda) {
  const Eigen::VectorXd s = (X * w).array() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double margin = y[static_cast<std::size_t>(i)] == 1 ? s[i] : -s[i];
    loss += softplus_neg(margin);
  }
  return loss / static_cast<double>(s.size()) + 0.5 * lambda * w.squaredNorm();
}

double hinge_objective(const Eigen::MatrixXd& X, const std::vector<int>& y,
                       const Eigen::VectorXd& w, double b, double lambda) {
  const Eigen::VectorXd s = (X * w).array() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double margin = y[static_cast<std::size_t>(i)] == 1 ? s[i] : -s[i];
    loss += std::max(0.0, 1.0 - margin);
  }
  return loss / static_cast<double>(s.size()) + 0.5 * lambda * w.squaredNorm();
}

ProbeDirection diffmean(const LabeledMatrix& train, const DirectionContext& ctx) {
  require_two_classes(train, "diffmean");
  const Eigen::Index d = train.cols();
  Eigen::VectorXd sum_pos = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd sum_neg = Eigen::VectorXd::Zero(d);
  std::size_t n_pos = 0, n_neg = 0;
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    if (train.y[static_cast<std::size_t>(i)] == 1) {
      sum_pos += train.X.row(i).transpose();
      ++n_pos;
    } else {
      sum_neg += train.X.row(i).transpose();
      ++n_neg;
    }
  }
  ProbeDirection dir;
  dir.kind = ProbeKind::diffmean;
  dir.space = ctx.space;
  dir.layer = ctx.layer;
  dir.source_setting = ctx.setting;
  dir.w = sum_pos / static_cast<double>(n_pos) - sum_neg / static_cast<double>(n_neg);
  dir.bias = 0.0;
  return dir;
}

ProbeDirection train_logistic(const LabeledMatrix& train, const LabeledMatrix& val,
                              const TrainConfig& cfg, const DirectionContext& ctx,
                              TrainTrace* trace) {
  cfg.validate();
  check_inputs(train, val, "train_logistic");
  const auto& X = train.X;
  const double n = static_cast<double>(X.rows());
  const double lambda = cfg.l2_lambda;
  const Eigen::VectorXd target = binary_labels(train.y);

  CheckpointSelector selector(val, [&](const Eigen::VectorXd& w, double b) {
    return logistic_objective(val.X, val.y, w, b, 0.0);
  });

  Eigen::VectorXd w = Eigen::VectorXd::Zero(X.cols());
  double b = 0.0;
  double f = logistic_objective(X, train.y, w, b, lambda);
  if (trace) trace->objective.assign(1, f);
  double step = cfg.step_size;
  bool converged = false;
  std::uint32_t t = 0;

  while (t < cfg.max_iters) {
    ++t;
    Eigen::VectorXd residual = (X * w).array() + b;
    for (Eigen::Index i = 0; i < residual.size(); ++i) residual[i] = sigmoid(residual[i]) - target[i];
    const Eigen::VectorXd gw = X.transpose() * residual / n + lambda * w;
    const double gb = residual.mean();
    const double gnorm2 = gw.squaredNorm() + gb * gb;
    if (gnorm2 <= 1e-30) {
      converged = true;
      break;
    }

    Eigen::VectorXd w_next;
    double b_next = 0.0, f_next = 0.0;
    bool accepted = false;
    while (step >= kMinStep) {
      w_next = w - step * gw;
      b_next = b - step * gb;
      f_next = logistic_objective(X, train.y, w_next, b_next, lambda);
      if (f_next <= f - kArmijo * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent possible at machine precision.
      converged = true;
      break;
    }
    const double rel_change = (f - f_next) / std::max(std::abs(f), 1e-300);
    w = std::move(w_next);
    b = b_next;
    f = f_next;
    if (trace) trace->objective.push_back(f);
    step = std::min(step * 2.0, kMaxStep);
    if (t % cfg.checkpoint_every == 0) selector.offer(w, b, t);
    if (rel_change < cfg.tol) {
      converged = true;
      break;
    }
  }
  if (t == 0 || t % cfg.checkpoint_every != 0) selector.offer(w, b, t);
  return finish(selector, ProbeKind::logistic, cfg, ctx, t, converged);
}

ProbeDirection train_hinge(const LabeledMatrix& train, const LabeledMatrix& val,
                           const TrainConfig& cfg, const DirectionContext& ctx,
                           TrainTrace* trace) {
  cfg.validate();
  check_inputs(train, val, "train_hinge");
  const auto& X = train.X;
  const double n = static_cast<double>(X.rows());
  const double lambda = cfg.l2_lambda;
  const Eigen::VectorXd ys = signed_labels(train.y);

  CheckpointSelector selector(val, [&](const Eigen::VectorXd& w, double b) {
    return hinge_objective(val.X, val.y, w, b, 0.0);
  });

  Eigen::VectorXd w = Eigen::VectorXd::Zero(X.cols());
  double b = 0.0;
  double f = hinge_objective(X, train.y, w, b, lambda);
  if (trace) trace->objective.assign(1, f);
  bool converged = false;
  std::uint32_t t = 0;
  Eigen::VectorXd coeff(X.rows());

  while (t < cfg.max_iters) {
    ++t;
    const Eigen::VectorXd s = (X * w).array() + b;
    double gb = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const bool violated = ys[i] * s[i] < 1.0;
      coeff[i] = violated ? -ys[i] : 0.0;
      gb += coeff[i];
    }
    gb /= n;
    const Eigen::VectorXd gw = X.transpose() * coeff / n + lambda * w;

    const double eta = lambda > 0.0
                           ? std::max(1.0 / (lambda * static_cast<double>(t)), kHingeStepFloor)
                           : cfg.step_size / std::sqrt(static_cast<double>(t));
    w -= eta * gw;
    b -= eta * gb;

    const double f_next = hinge_objective(X, train.y, w, b, lambda);
    if (trace) trace->objective.push_back(f_next);
    const double rel_change = std::abs(f - f_next) / std::max(std::abs(f), 1e-300);
    f = f_next;
    if (t % cfg.checkpoint_every == 0) selector.offer(w, b, t);
    if (f == 0.0 || (t >= 2 * cfg.checkpoint_every && rel_change < cfg.tol)) {
      converged = true;
      break;
    }
  }
  if (t == 0 || t % cfg.checkpoint_every != 0) selector.offer(w, b, t);
  return finish(selector, ProbeKind::hinge, cfg, ctx, t, converged);
}

ProbeDirection train_probe(ProbeKind kind, const LabeledMatrix& train, const LabeledMatrix& val,
                           const TrainConfig& cfg, const DirectionContext& ctx, bool tune) {
  if (kind == ProbeKind::diffmean) return diffmean(train, ctx);
  auto run = [&](const TrainConfig& c) {
    return kind == ProbeKind::logistic ? train_logistic(train, val, c, ctx)
                                       : train_hinge(train, val, c, ctx);
  };
  if (!tune) return run(cfg);

  std::optional<ProbeDirection> best;
  for (double lambda : kLambdaGrid) {
    TrainConfig c = cfg;
    c.l2_lambda = lambda;
    auto dir = run(c);
    const double v = dir.info.validation_auroc.value_or(-1.0);
    if (!best || v > best->info.validation_auroc.value_or(-1.0)) best = std::move(dir);
  }
  return *best;
}

ScoreVector score(const ProbeDirection& dir, const Eigen::MatrixXd& X,
                  std::vector<std::string> ids) {
  if (X.cols() != dir.dim()) {
    throw DimensionError("score: inputs have " + std::to_string(X.cols()) +
                         " columns but the direction has " + std::to_string(dir.dim()) +
                         " (" + std::string(to_string(dir.space)) +
                         " space; a PCA-space direction needs map_back first)");
  }
  if (!ids.empty() && ids.size() != static_cast<std::size_t>(X.rows())) {
    throw InvariantError("score: ids do not match row count");
  }
  ScoreVector out;
  const Eigen::VectorXd s = (X * dir.w).array() + dir.bias;
  out.scores.assign(s.data(), s.data() + s.size());
  out.ids = std::move(ids);
  return out;
}

}  // namespace probekit
