#pragma once

// Steering vectors built from probe directions, the reference additive
// update h' = h + alpha * v, and aggregation of external judge scores into
// alpha-sweep curves.

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probekit/activation_store.hpp"
#include "probekit/direction.hpp"

namespace probekit {

enum class SteeringNorm { raw, unit };

std::string_view to_string(SteeringNorm norm);
SteeringNorm parse_steering_norm(std::string_view text);

struct SteeringVector {
  Eigen::VectorXd v;
  std::uint32_t layer = 0;
  SteeringNorm normalization = SteeringNorm::raw;
  ProbeKind source_kind = ProbeKind::diffmean;
  std::string source_setting;
  std::string source_hash;  // fingerprint of the direction file, when known
};

// v = w (raw) or w / |w| (unit); the bias is dropped.
SteeringVector build_steering_vector(const ProbeDirection& dir, std::uint32_t layer,
                                     SteeringNorm normalization = SteeringNorm::raw);

Eigen::VectorXd apply_steering(const Eigen::VectorXd& h, const SteeringVector& v, double alpha);

// Binary block ("RQSV", f64) plus `<path>.json` descriptor.
void save_steering_vector(const std::string& path, const SteeringVector& sv);
SteeringVector load_steering_vector(const std::string& path);

struct AlphaSweepRow {
  std::uint32_t layer = 0;
  double alpha = 0.0;
  Label context_group = Label::informational;
  double mean_score = 0.0;
  std::size_t n = 0;        // valid judge scores
  std::size_t dropped = 0;  // unparseable or out-of-range scores
};

struct AlphaSweepResult {
  std::vector<AlphaSweepRow> rows;  // ordered by (layer, alpha, group)
  std::size_t dropped = 0;
};

// Judge CSV: header `id,alpha,layer,score`. Generations JSON lines:
// {"id", "context", "alpha", "layer", "question"} with an optional "label".
// Rows join on (id, alpha, layer). When a generation has no label, it is
// looked up by id in `meta`.
AlphaSweepResult aggregate_scores(std::istream& judge_csv, std::istream& generations_jsonl,
                                  const DatasetMeta* meta = nullptr);
AlphaSweepResult aggregate_scores(const std::string& judge_path,
                                  const std::string& generations_path,
                                  const DatasetMeta* meta = nullptr);

// CSV columns: layer,alpha,context_group,mean_score,n,dropped
std::string alpha_sweep_csv(const AlphaSweepResult& result);

}  // namespace probekit
