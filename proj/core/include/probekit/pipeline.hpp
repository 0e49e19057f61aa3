#pragma once

// Experiment drivers: per-layer sweeps, within-setting probe agreement,
// cross-dataset transfer and ranked-example listings.
//
// Data layout for a setting: `<data_dir>/<dataset>__meta.json` plus one
// activation file per (split, layer) named `<dataset>__<split>__L<layer>.rqac`.
// Token-level files are pooled on load; example-level files are used as is.
//
// Probes are trained in the setting's PCA space (or the raw embedding space
// when pca_k == 0). Every reported score is computed in the embedding space
// from the mapped-back direction, so within-setting and transfer numbers go
// through identical arithmetic.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "probekit/activation_store.hpp"
#include "probekit/direction.hpp"
#include "probekit/pca.hpp"
#include "probekit/pooling.hpp"
#include "probekit/probes.hpp"
#include "probekit/report.hpp"

namespace probekit {

struct Setting {
  std::string data_dir;
  std::string dataset;
  std::string model_id;
  PoolingSpec pooling;
  std::uint32_t pca_k = static_cast<std::uint32_t>(kDefaultPcaComponents);  // 0 = raw space
  std::vector<std::uint32_t> layers;
  std::uint32_t n_layers = 1;
  TrainConfig train;
  bool tune = false;

  // e.g. "rq/qwen/last/pca64"
  std::string id() const;
  // layer / (n_layers - 1); 0 for single-layer models.
  double normalized_layer(std::uint32_t layer) const;
  void validate() const;

  // Fills model_id and n_layers from the dataset's metadata; an empty
  // `layers` list selects every layer.
  static Setting from_data(const std::string& data_dir, const std::string& dataset,
                           PoolingSpec pooling = {}, std::uint32_t pca_k = 64,
                           std::vector<std::uint32_t> layers = {});
};

struct LayerData {
  DatasetMeta meta;
  LabeledMatrix train;
  LabeledMatrix validation;
  LabeledMatrix test;
  std::map<std::string, std::string> fingerprints;  // file name -> content hash
};

LayerData load_layer(const Setting& setting, std::uint32_t layer);

struct TrainedLayer {
  std::uint32_t layer = 0;
  std::optional<PcaModel> pca;               // absent for raw-space settings
  std::array<ProbeDirection, 3> native;      // space probes were trained in
  std::array<ProbeDirection, 3> embedding;   // mapped back to embedding space
  LayerData data;

  const ProbeDirection& direction(ProbeKind kind) const {
    return embedding[static_cast<std::size_t>(kind)];
  }
};

// Fits PCA on the training split and trains diffmean, logistic and hinge.
TrainedLayer train_layer(const Setting& setting, std::uint32_t layer);
TrainedLayer train_layer(const Setting& setting, std::uint32_t layer, LayerData data);

struct AgreementOptions {
  double p = 0.2;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
  double level = 0.95;
};

// Per layer and probe: test_auroc and val_auroc; per layer under probe "pca":
// pca_k, evr_last and evr_cumulative. Layers that fail are recorded in
// report.skipped and the sweep continues.
EvalReport layer_sweep(const Setting& setting);

// Pairwise cosine, Spearman (with bootstrap interval) and tail Jaccard for
// every pair of probes at one layer. Probe column is "<a>~<b>".
EvalReport within_agreement(const Setting& setting, std::uint32_t layer,
                            const AgreementOptions& options = {});
EvalReport within_agreement(const Setting& setting, const TrainedLayer& trained,
                            const AgreementOptions& options = {});

// Scores the target test split with source directions (mapped back) and
// compares against target-trained directions of the same kind. Setting column
// is "<source id>-><target id>".
EvalReport transfer_eval(const Setting& source, const Setting& target, std::uint32_t layer,
                         const AgreementOptions& options = {});
EvalReport transfer_eval(const Setting& source, const TrainedLayer& source_layer,
                         const Setting& target, const TrainedLayer& target_layer,
                         const AgreementOptions& options = {});

struct RankedExample {
  std::size_t rank = 0;  // 1 = highest score
  std::string id;
  double score = 0.0;
  Label label = Label::informational;
  std::uint64_t n_tokens = 0;
};

struct LengthStat {
  double p = 0.0;
  std::size_t count = 0;
  double mean_tokens = 0.0;
};

struct RankReport {
  std::vector<RankedExample> examples;  // sorted by rank
  std::vector<LengthStat> top_lengths;
};

inline const std::vector<double> kDefaultRankFractions{0.01, 0.03};

// Ranks scored examples (score descending, ties by ascending id) and reports
// mean token length of each top-p subset.
RankReport rank_scores(const ScoreVector& scores, const std::vector<Label>& labels,
                       const std::vector<std::uint64_t>& n_tokens,
                       const std::vector<double>& fractions = kDefaultRankFractions);

// Scores the target's examples at `layer` (one split, or all splits in
// metadata order) with an embedding-space direction.
RankReport rank_report(const ProbeDirection& dir, const Setting& target, std::uint32_t layer,
                       std::optional<Split> split = std::nullopt,
                       const std::vector<double>& fractions = kDefaultRankFractions);

std::string rank_report_csv(const RankReport& report);
std::string rank_lengths_csv(const RankReport& report);

}  // namespace probekit
