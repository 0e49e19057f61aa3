#include "probekit/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "probekit/errors.hpp"
#include "probekit/metrics.hpp"
#include "probekit/parallel.hpp"

namespace probekit {

namespace fs = std::filesystem;

namespace {

constexpr Split kSplits[] = {Split::train, Split::validation, Split::test};

std::string data_path(const Setting& s, const std::string& name) {
  return (fs::path(s.data_dir) / name).string();
}

nlohmann::json train_config_json(const TrainConfig& c) {
  return {{"l2_lambda", c.l2_lambda},   {"max_iters", c.max_iters},
          {"tol", c.tol},               {"step_size", c.step_size},
          {"seed", c.seed},             {"checkpoint_every", c.checkpoint_every},
          {"validation_metric", "auroc"}};
}

nlohmann::json setting_provenance(const Setting& s) {
  return {{"id", s.id()},
          {"dataset", s.dataset},
          {"model_id", s.model_id},
          {"pooling", s.pooling.name()},
          {"pca_k", s.pca_k},
          {"layers", s.layers},
          {"n_layers", s.n_layers},
          {"tune", s.tune},
          {"train_config", train_config_json(s.train)}};
}

void add_inputs(nlohmann::json& provenance, const std::map<std::string, std::string>& prints) {
  for (const auto& [name, hash] : prints) provenance["inputs"][name] = hash;
}

double auroc_of(const ScoreVector& s, const LabeledMatrix& m) { return auroc(s.scores, m.y); }

std::string pair_name(ProbeKind a, ProbeKind b) {
  return std::string(to_string(a)) + "~" + std::string(to_string(b));
}

void add_spearman_row(EvalReport& report, ReportRow base, const ScoreVector& a,
                      const ScoreVector& b, const AgreementOptions& options) {
  base.metric = "spearman";
  base.value = spearman(a, b);
  if (options.bootstrap > 0) {
    const auto boot = spearman_bootstrap(a.scores, b.scores, options.bootstrap, options.seed,
                                         options.level);
    base.ci_low = boot.interval.low;
    base.ci_high = boot.interval.high;
  }
  report.add(std::move(base));
}

void add_jaccard_rows(EvalReport& report, ReportRow base, const ScoreVector& a,
                      const ScoreVector& b, double p) {
  const auto j = jaccard_tails(a, b, p);
  base.metric = "jaccard_top";
  base.value = j.top;
  report.add(base);
  base.metric = "jaccard_bottom";
  base.value = j.bottom;
  report.add(std::move(base));
}

}  // namespace

std::string Setting::id() const {
  std::string out = dataset + "/" + model_id + "/" + pooling.name() + "/";
  out += pca_k == 0 ? std::string("raw") : "pca" + std::to_string(pca_k);
  return out;
}

double Setting::normalized_layer(std::uint32_t layer) const {
  if (n_layers <= 1) return 0.0;
  return static_cast<double>(layer) / static_cast<double>(n_layers - 1);
}

void Setting::validate() const {
  if (dataset.empty()) throw InvariantError("setting: dataset name is empty");
  if (n_layers == 0) throw InvariantError("setting: n_layers must be >= 1");
  for (auto l : layers) {
    if (l >= n_layers) {
      throw InvariantError("setting: layer " + std::to_string(l) + " outside [0, " +
                           std::to_string(n_layers) + ")");
    }
  }
  pooling.validate();
  train.validate();
}

Setting Setting::from_data(const std::string& data_dir, const std::string& dataset,
                           PoolingSpec pooling, std::uint32_t pca_k,
                           std::vector<std::uint32_t> layers) {
  const auto meta = read_meta((fs::path(data_dir) / meta_filename(dataset)).string());
  Setting s;
  s.data_dir = data_dir;
  s.dataset = dataset;
  s.model_id = meta.model_id;
  s.pooling = pooling;
  s.pca_k = pca_k;
  s.n_layers = meta.n_layers;
  if (layers.empty()) {
    layers.resize(meta.n_layers);
    std::iota(layers.begin(), layers.end(), 0u);
  }
  s.layers = std::move(layers);
  s.validate();
  return s;
}

LayerData load_layer(const Setting& setting, std::uint32_t layer) {
  if (layer >= setting.n_layers) {
    throw InvariantError("load_layer: layer " + std::to_string(layer) + " outside [0, " +
                         std::to_string(setting.n_layers) + ")");
  }
  LayerData data;
  const auto meta_name = meta_filename(setting.dataset);
  const auto meta_path = data_path(setting, meta_name);
  data.meta = read_meta(meta_path);
  data.fingerprints[meta_name] = fingerprint_file(meta_path);

  for (Split split : kSplits) {
    const auto name = activation_filename(setting.dataset, split, layer);
    const auto path = data_path(setting, name);
    auto file = read_activation_file(path);
    data.fingerprints[name] = fingerprint_file(path);
    const auto sub = data.meta.subset(split);
    if (file.kind == ActivationKind::token_level) {
      file = pool(file, sub, setting.pooling);
    }
    LabeledMatrix m;
    try {
      m = join(file, sub, split);
    } catch (const InvariantError& e) {
      throw InvariantError(path + ": " + e.what());
    }
    switch (split) {
      case Split::train: data.train = std::move(m); break;
      case Split::validation: data.validation = std::move(m); break;
      case Split::test: data.test = std::move(m); break;
    }
  }
  return data;
}

TrainedLayer train_layer(const Setting& setting, std::uint32_t layer) {
  return train_layer(setting, layer, load_layer(setting, layer));
}

TrainedLayer train_layer(const Setting& setting, std::uint32_t layer, LayerData data) {
  TrainedLayer out;
  out.layer = layer;
  DirectionContext ctx{SpaceKind::embedding, layer, setting.id()};

  LabeledMatrix train = data.train;
  LabeledMatrix val = data.validation;
  if (setting.pca_k > 0) {
    out.pca = fit_pca(data.train.X, setting.pca_k);
    train.X = transform(*out.pca, data.train.X);
    val.X = transform(*out.pca, data.validation.X);
    ctx.space = SpaceKind::pca;
  }
  for (ProbeKind kind : kAllProbeKinds) {
    const auto i = static_cast<std::size_t>(kind);
    out.native[i] = train_probe(kind, train, val, setting.train, ctx, setting.tune);
    out.embedding[i] = out.pca ? map_back(out.native[i], *out.pca) : out.native[i];
  }
  out.data = std::move(data);
  return out;
}

EvalReport layer_sweep(const Setting& setting) {
  setting.validate();
  // Missing inputs are an error for the whole sweep, not a skipped layer.
  const auto meta_path = data_path(setting, meta_filename(setting.dataset));
  if (!fs::is_regular_file(meta_path)) throw NotFoundError(meta_path);
  for (auto layer : setting.layers) {
    for (Split split : kSplits) {
      const auto path = data_path(setting, activation_filename(setting.dataset, split, layer));
      if (!fs::is_regular_file(path)) throw NotFoundError(path);
    }
  }

  const auto n = setting.layers.size();
  std::vector<EvalReport> partial(n);
  parallel_for(n, [&](std::size_t i) {
    const auto layer = setting.layers[i];
    auto& report = partial[i];
    const double norm = setting.normalized_layer(layer);
    try {
      const auto trained = train_layer(setting, layer);
      add_inputs(report.provenance, trained.data.fingerprints);
      for (ProbeKind kind : kAllProbeKinds) {
        const auto& dir = trained.direction(kind);
        ReportRow row{setting.id(), layer, norm, std::string(to_string(kind)), "test_auroc",
                      auroc_of(score(dir, trained.data.test), trained.data.test), {}, {}};
        report.add(row);
        row.metric = "val_auroc";
        row.value = auroc_of(score(dir, trained.data.validation), trained.data.validation);
        report.add(row);
      }
      if (trained.pca) {
        const auto var = explained_variance_report(*trained.pca);
        ReportRow row{setting.id(), layer, norm, "pca", "pca_k",
                      static_cast<double>(trained.pca->k()), {}, {}};
        report.add(row);
        row.metric = "evr_last";
        row.value = var.rows.back().ratio;
        report.add(row);
        row.metric = "evr_cumulative";
        row.value = var.rows.back().cumulative;
        report.add(row);
        for (const auto& note : trained.pca->notes) {
          report.provenance["pca_notes"][std::to_string(layer)].push_back(note);
        }
      }
      for (const auto& dir : trained.native) {
        if (!dir.info.converged) {
          report.provenance["not_converged"][std::string(to_string(dir.kind)) + "@L" +
                                             std::to_string(layer)] = dir.info.iterations;
        }
      }
    } catch (const Error& e) {
      report = EvalReport{};
      report.skipped.push_back({setting.id(), layer, e.what()});
    }
  });

  EvalReport merged;
  merged.provenance["setting"] = setting_provenance(setting);
  for (auto& part : partial) {
    for (auto& row : part.rows()) merged.add(row);
    merged.skipped.insert(merged.skipped.end(), part.skipped.begin(), part.skipped.end());
    for (const auto& [key, value] : part.provenance.items()) {
      for (const auto& [k2, v2] : value.items()) merged.provenance[key][k2] = v2;
    }
  }
  return merged;
}

EvalReport within_agreement(const Setting& setting, std::uint32_t layer,
                            const AgreementOptions& options) {
  setting.validate();
  return within_agreement(setting, train_layer(setting, layer), options);
}

EvalReport within_agreement(const Setting& setting, const TrainedLayer& trained,
                            const AgreementOptions& options) {
  EvalReport report;
  report.provenance["setting"] = setting_provenance(setting);
  report.provenance["agreement"] = {{"p", options.p},
                                    {"bootstrap", options.bootstrap},
                                    {"seed", options.seed},
                                    {"level", options.level},
                                    {"interval", "percentile bootstrap over test examples"}};
  add_inputs(report.provenance, trained.data.fingerprints);

  const auto& test = trained.data.test;
  std::array<ScoreVector, 3> scores;
  for (ProbeKind kind : kAllProbeKinds) {
    scores[static_cast<std::size_t>(kind)] = score(trained.direction(kind), test);
  }
  const double norm = setting.normalized_layer(trained.layer);
  constexpr std::pair<ProbeKind, ProbeKind> pairs[] = {
      {ProbeKind::diffmean, ProbeKind::logistic},
      {ProbeKind::diffmean, ProbeKind::hinge},
      {ProbeKind::logistic, ProbeKind::hinge}};
  for (const auto& [a, b] : pairs) {
    const auto ia = static_cast<std::size_t>(a);
    const auto ib = static_cast<std::size_t>(b);
    ReportRow base{setting.id(), trained.layer, norm, pair_name(a, b), "cosine",
                   cosine(trained.direction(a), trained.direction(b)), {}, {}};
    report.add(base);
    add_spearman_row(report, base, scores[ia], scores[ib], options);
    add_jaccard_rows(report, base, scores[ia], scores[ib], options.p);
  }
  return report;
}

EvalReport transfer_eval(const Setting& source, const Setting& target, std::uint32_t layer,
                         const AgreementOptions& options) {
  source.validate();
  target.validate();
  const auto src = train_layer(source, layer);
  if (source.id() == target.id() && source.data_dir == target.data_dir) {
    return transfer_eval(source, src, target, src, options);
  }
  const auto tgt = train_layer(target, layer);
  return transfer_eval(source, src, target, tgt, options);
}

EvalReport transfer_eval(const Setting& source, const TrainedLayer& source_layer,
                         const Setting& target, const TrainedLayer& target_layer,
                         const AgreementOptions& options) {
  const auto& test = target_layer.data.test;
  if (source_layer.direction(ProbeKind::diffmean).dim() != test.cols()) {
    throw DimensionError("transfer: source embedding dimension " +
                         std::to_string(source_layer.direction(ProbeKind::diffmean).dim()) +
                         " differs from target " + std::to_string(test.cols()) +
                         " (transfer needs a shared model)");
  }
  EvalReport report;
  report.provenance["source"] = setting_provenance(source);
  report.provenance["target"] = setting_provenance(target);
  report.provenance["agreement"] = {{"p", options.p},
                                    {"bootstrap", options.bootstrap},
                                    {"seed", options.seed},
                                    {"level", options.level}};
  add_inputs(report.provenance, source_layer.data.fingerprints);
  add_inputs(report.provenance, target_layer.data.fingerprints);

  const std::string label = source.id() + "->" + target.id();
  const double norm = target.normalized_layer(target_layer.layer);
  for (ProbeKind kind : kAllProbeKinds) {
    const auto& transferred = source_layer.direction(kind);
    const auto& in_domain = target_layer.direction(kind);
    const auto st = score(transferred, test);
    const auto si = score(in_domain, test);

    ReportRow base{label, target_layer.layer, norm, std::string(to_string(kind)),
                   "transfer_auroc", auroc_of(st, test), {}, {}};
    report.add(base);
    base.metric = "in_domain_auroc";
    base.value = auroc_of(si, test);
    report.add(base);
    base.metric = "direction_cosine";
    base.value = cosine(transferred, in_domain);
    report.add(base);
    add_spearman_row(report, base, st, si, options);
    add_jaccard_rows(report, base, st, si, options.p);
  }
  return report;
}

RankReport rank_scores(const ScoreVector& scores, const std::vector<Label>& labels,
                       const std::vector<std::uint64_t>& n_tokens,
                       const std::vector<double>& fractions) {
  const auto n = scores.size();
  if (scores.ids.size() != n || labels.size() != n || n_tokens.size() != n) {
    throw InvariantError("rank_scores: inputs are not aligned");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
    return scores.ids[a] < scores.ids[b];
  });
  RankReport report;
  report.examples.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto i = order[r];
    report.examples.push_back({r + 1, scores.ids[i], scores.scores[i], labels[i], n_tokens[i]});
  }
  for (double p : fractions) {
    const auto m = tail_size(p, n);
    double total = 0.0;
    for (std::size_t r = 0; r < m; ++r) total += static_cast<double>(report.examples[r].n_tokens);
    report.top_lengths.push_back({p, m, total / static_cast<double>(m)});
  }
  return report;
}

RankReport rank_report(const ProbeDirection& dir, const Setting& target, std::uint32_t layer,
                       std::optional<Split> split, const std::vector<double>& fractions) {
  const auto data = load_layer(target, layer);
  std::unordered_map<std::string, double> by_id;
  for (Split s : kSplits) {
    if (split && *split != s) continue;
    const auto& m = s == Split::train ? data.train : s == Split::validation ? data.validation
                                                                               : data.test;
    const auto sv = score(dir, m);
    for (std::size_t i = 0; i < sv.size(); ++i) by_id.emplace(sv.ids[i], sv.scores[i]);
  }
  ScoreVector sv;
  std::vector<Label> labels;
  std::vector<std::uint64_t> lengths;
  for (const auto& e : data.meta.examples) {
    const auto it = by_id.find(e.id);
    if (it == by_id.end()) continue;
    sv.ids.push_back(e.id);
    sv.scores.push_back(it->second);
    labels.push_back(e.label);
    lengths.push_back(e.n_tokens);
  }
  return rank_scores(sv, labels, lengths, fractions);
}

std::string rank_report_csv(const RankReport& report) {
  std::ostringstream out;
  out << "rank,id,score,label,n_tokens\n";
  char buf[40];
  for (const auto& e : report.examples) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.score);
    out << e.rank << ',' << e.id << ',' << buf << ',' << to_string(e.label) << ',' << e.n_tokens
        << "\n";
  }
  return out.str();
}

std::string rank_lengths_csv(const RankReport& report) {
  std::ostringstream out;
  out << "p,count,mean_tokens\n";
  char buf[80];
  for (const auto& s : report.top_lengths) {
    std::snprintf(buf, sizeof(buf), "%.17g,%zu,%.17g\n", s.p, s.count, s.mean_tokens);
    out << buf;
  }
  return out.str();
}

}  // namespace probekit
