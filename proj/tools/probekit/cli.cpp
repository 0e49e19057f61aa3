#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "json_config.hpp"
#include "probekit/activation_store.hpp"
#include "probekit/alignment.hpp"
#include "probekit/errors.hpp"
#include "probekit/pca.hpp"
#include "probekit/pipeline.hpp"
#include "probekit/pooling.hpp"
#include "probekit/probes.hpp"
#include "probekit/report.hpp"
#include "probekit/steering.hpp"
#include "probekit/synth.hpp"

namespace probekit::cli {

namespace {

namespace fs = std::filesystem;

// Bad flag combinations that CLI11 cannot express declaratively.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const std::vector<std::string> kPoolingNames{"last", "mean", "lastk", "span"};
const std::vector<std::string> kProbeNames{"diffmean", "logistic", "hinge"};

struct DataOptions {
  std::string data_dir = ".";
  std::string dataset;
  std::string pooling = "last";
  std::uint32_t pool_k = 5;
};

struct SpaceOptions {
  std::uint32_t components = static_cast<std::uint32_t>(kDefaultPcaComponents);
  bool raw = false;
};

struct TrainOptions {
  double lambda = 1e-2;
  std::uint32_t max_iters = 1000;
  double tol = 1e-9;
  double step_size = 1.0;
  bool tune = false;
  std::uint64_t seed = 0;
};

struct AgreeOptions {
  double p = 0.2;
  std::size_t bootstrap = 1000;
  double level = 0.95;
};

struct OutputOptions {
  std::string prefix;
  bool svg = false;
  std::string svg_metric = "test_auroc";
  bool force = false;
};

void add_data_options(CLI::App* app, DataOptions& o) {
  app->add_option("--data-dir", o.data_dir, "Directory holding activation and meta files")
      ->capture_default_str();
  app->add_option("--dataset", o.dataset, "Dataset name (file prefix)")->required();
  app->add_option("--pooling", o.pooling, "Pooling for token-level files: last|mean|lastk|span")
      ->check(CLI::IsMember(kPoolingNames))
      ->capture_default_str();
  app->add_option("--pool-k", o.pool_k, "Token count for --pooling lastk")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_space_options(CLI::App* app, SpaceOptions& o) {
  auto* k = app->add_option("--components", o.components, "PCA components fit on the train split")
                ->check(CLI::PositiveNumber)
                ->capture_default_str();
  app->add_flag("--raw", o.raw, "Train in the raw embedding space (no PCA)")->excludes(k);
}

void add_train_options(CLI::App* app, TrainOptions& o) {
  app->add_option("--lambda", o.lambda, "L2 penalty for logistic and hinge")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--max-iters", o.max_iters, "Iteration budget")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--tol", o.tol, "Relative objective change that stops training")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--step-size", o.step_size, "Initial step size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_flag("--tune", o.tune, "Pick lambda from {1e-3, 1e-2, 1e-1} by validation AUROC");
  app->add_option("--seed", o.seed, "Seed for every random choice")->capture_default_str();
}

void add_agree_options(CLI::App* app, AgreeOptions& o) {
  app->add_option("--p", o.p, "Tail fraction for top/bottom Jaccard")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  app->add_option("--bootstrap", o.bootstrap, "Bootstrap resamples for Spearman intervals")
      ->capture_default_str();
  app->add_option("--level", o.level, "Bootstrap interval level")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}

void add_output_options(CLI::App* app, OutputOptions& o) {
  app->add_option("--out", o.prefix, "Output prefix; writes <prefix>.csv and <prefix>.json")
      ->required();
  app->add_flag("--svg", o.svg, "Also write <prefix>.svg");
  app->add_option("--svg-metric", o.svg_metric, "Metric plotted in the SVG")
      ->capture_default_str();
  app->add_flag("--force", o.force, "Overwrite existing outputs");
}

TrainConfig train_config(const TrainOptions& o) {
  TrainConfig cfg;
  cfg.l2_lambda = o.lambda;
  cfg.max_iters = o.max_iters;
  cfg.tol = o.tol;
  cfg.step_size = o.step_size;
  cfg.seed = o.seed;
  return cfg;
}

AgreementOptions agreement(const AgreeOptions& o, std::uint64_t seed) {
  return {o.p, o.bootstrap, seed, o.level};
}

Setting make_setting(const DataOptions& d, std::uint32_t pca_k, const TrainOptions& t,
                     std::vector<std::uint32_t> layers) {
  auto s = Setting::from_data(d.data_dir, d.dataset, PoolingSpec::parse(d.pooling, d.pool_k), pca_k,
                              std::move(layers));
  s.train = train_config(t);
  s.tune = t.tune;
  s.validate();
  return s;
}

void check_output(const std::string& path, bool force) {
  if (!force && fs::exists(path)) {
    throw IoError(path, "output exists; pass --force to overwrite");
  }
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw IoError(parent.string(), "cannot create directory");
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path, "cannot open for writing");
  f << text;
  if (!f.flush()) throw IoError(path, "write failed");
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw NotFoundError(path);
}

std::vector<std::string> emit(const EvalReport& report, const OutputOptions& o) {
  EmitOptions opts;
  opts.svg = o.svg;
  opts.svg_metric = o.svg_metric;
  for (const char* ext : {".csv", ".json", ".svg"}) {
    if (std::string(ext) == ".svg" && !o.svg) continue;
    check_output(o.prefix + ext, o.force);
  }
  return emit_report(report, o.prefix, opts);
}

void print_written(std::ostream& out, const std::vector<std::string>& paths) {
  for (const auto& p : paths) out << "wrote " << p << "\n";
}

void print_skipped(std::ostream& err, const EvalReport& report) {
  for (const auto& s : report.skipped) {
    err << "warning: skipped " << s.setting << " layer " << s.layer << ": " << s.reason << "\n";
  }
}

// Direction in the embedding space; PCA-space directions need their model.
ProbeDirection embedding_direction(const std::string& dir_path, const std::string& pca_path) {
  auto dir = load_direction(dir_path);
  if (dir.space == SpaceKind::embedding) return dir;
  if (pca_path.empty()) {
    throw InvariantError(dir_path + ": direction is in PCA space; pass --pca <model> to map it back");
  }
  return map_back(dir, load_pca(pca_path));
}

// ---------------------------------------------------------------- pool

struct PoolCommand {
  std::string in;
  std::string meta;
  std::string strategy = "last";
  std::uint32_t k = 5;
  std::string split;
  std::string out;
  bool force = false;

  void attach(CLI::App* app) {
    app->add_option("--in", in, "Activation file to pool")->required();
    app->add_option("--meta", meta, "Dataset metadata JSON (required for token-level input)");
    app->add_option("--strategy", strategy, "last|mean|lastk|span")
        ->check(CLI::IsMember(kPoolingNames))
        ->capture_default_str();
    app->add_option("--k", k, "Token count for lastk")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--split", split, "Split described by the file (default: from the file name)")
        ->check(CLI::IsMember({"train", "validation", "test"}));
    app->add_option("--out", out, "Example-level output file")->required();
    app->add_flag("--force", force, "Overwrite existing output");
  }

  int run(std::ostream& out_stream, std::ostream& err) const {
    auto file = read_activation_file(in);
    ActivationFile pooled;
    if (file.kind == ActivationKind::example_level) {
      err << "note: " << in << " is already example-level; copied unchanged\n";
      pooled = std::move(file);
    } else {
      if (meta.empty()) throw UsageError("--meta is required for token-level input");
      auto m = read_meta(meta);
      if (!split.empty()) {
        m = m.subset(parse_split(split));
      } else if (file.n_examples != m.size()) {
        const auto name = parse_activation_filename(fs::path(in).filename().string());
        if (!name) {
          throw InvariantError(meta + " describes " + std::to_string(m.size()) + " examples but " +
                               in + " holds " + std::to_string(file.n_examples) +
                               "; pass --split");
        }
        m = m.subset(name->split);
      }
      pooled = pool(file, m, PoolingSpec::parse(strategy, k));
    }
    check_output(out, force);
    write_activation_file(out, pooled);
    print_written(out_stream, {out});
    return kOk;
  }
};

// ---------------------------------------------------------------- pca

struct PcaFitCommand {
  std::string in;
  std::uint32_t components = static_cast<std::uint32_t>(kDefaultPcaComponents);
  std::string out;
  bool force = false;

  void attach(CLI::App* app) {
    app->add_option("--in", in, "Example-level activation file of the training split")->required();
    app->add_option("--components", components, "Number of components")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--out", out, "Model file (a .json descriptor is written alongside)")
        ->required();
    app->add_flag("--force", force, "Overwrite existing output");
  }

  int run(std::ostream& out_stream, std::ostream& err) const {
    const auto file = read_activation_file(in);
    if (file.kind != ActivationKind::example_level) {
      throw InvariantError(in + ": PCA needs example-level rows; run `probekit pool` first");
    }
    const auto model = fit_pca(file.to_matrix(), components);
    for (const auto& note : model.notes) err << "note: " << note << "\n";
    check_output(out, force);
    check_output(out + ".json", force);
    nlohmann::json extra;
    extra["source"] = fs::path(in).filename().string();
    extra["source_hash"] = fingerprint_file(in);
    extra["layer"] = file.layer_index;
    save_pca(out, model, extra);
    print_written(out_stream, {out, out + ".json"});
    return kOk;
  }
};

struct PcaTransformCommand {
  std::string model;
  std::string in;
  std::string out;
  bool force = false;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "PCA model file")->required();
    app->add_option("--in", in, "Example-level activation file")->required();
    app->add_option("--out", out, "Example-level file of PCA coordinates")->required();
    app->add_flag("--force", force, "Overwrite existing output");
  }

  int run(std::ostream& out_stream, std::ostream&) const {
    const auto m = load_pca(model);
    const auto file = read_activation_file(in);
    if (file.kind != ActivationKind::example_level) {
      throw InvariantError(in + ": transform needs example-level rows; run `probekit pool` first");
    }
    const auto z = transform(m, file.to_matrix());
    check_output(out, force);
    write_activation_file(out, ActivationFile::from_matrix(z, file.layer_index));
    print_written(out_stream, {out});
    return kOk;
  }
};

struct PcaReportCommand {
  std::string model;
  std::string out;
  bool force = false;

  void attach(CLI::App* app) {
    app->add_option("--model", model, "PCA model file")->required();
    app->add_option("--out", out, "CSV path (default: standard output)");
    app->add_flag("--force", force, "Overwrite existing output");
  }

  int run(std::ostream& out_stream, std::ostream& err) const {
    const auto report = explained_variance_report(load_pca(model));
    const auto csv = variance_report_csv(report);
    for (const auto& note : report.notes) err << "note: " << note << "\n";
    if (out.empty()) {
      out_stream << csv;
    } else {
      check_output(out, force);
      write_text(out, csv);
      print_written(out_stream, {out});
    }
    return kOk;
  }
};

// ---------------------------------------------------------------- train

struct TrainCommand {
  std::string probe;
  DataOptions data;
  TrainOptions train;
  std::uint32_t layer = 0;
  std::string pca;
  bool raw = false;
  bool map_back_out = false;
  std::string out;
  bool force = false;

  void attach(CLI::App* app) {
    app->add_option("--probe", probe, "diffmean|logistic|hinge")
        ->required()
        ->check(CLI::IsMember(kProbeNames));
    add_data_options(app, data);
    app->add_option("--layer", layer, "Layer index")->required();
    auto* p = app->add_option("--pca", pca, "PCA model; probes are trained in its coordinates");
    app->add_flag("--raw", raw, "Train in the raw embedding space")->excludes(p);
    app->add_flag("--map-back", map_back_out, "Save the direction mapped back to embedding space");
    add_train_options(app, train);
    app->add_option("--out", out, "Direction file (a .json descriptor is written alongside)")
        ->required();
    app->add_flag("--force", force, "Overwrite existing output");
  }

  int run(std::ostream& out_stream, std::ostream& err) const {
    if (pca.empty() == !raw) throw UsageError("train: pass exactly one of --pca <model> or --raw");
    std::optional<PcaModel> model;
    if (!pca.empty()) model = load_pca(pca);
    const auto setting =
        make_setting(data, model ? static_cast<std::uint32_t>(model->k()) : 0, train, {layer});
    auto layer_data = load_layer(setting, layer);
    DirectionContext ctx{SpaceKind::embedding, layer, setting.id()};
    if (model) {
      layer_data.train.X = transform(*model, layer_data.train.X);
      layer_data.validation.X = transform(*model, layer_data.validation.X);
      ctx.space = SpaceKind::pca;
    }
    auto dir = train_probe(parse_probe_kind(probe), layer_data.train, layer_data.validation,
                           setting.train, ctx, setting.tune);
    if (!dir.info.converged) {
      err << "warning: " << probe << " did not converge in " << dir.info.iterations
          << " iterations; kept the best checkpoint\n";
    }
    if (map_back_out && model) dir = map_back(dir, *model);
    check_output(out, force);
    check_output(out + ".json", force);
    save_direction(out, dir);
    out_stream << probe << " layer " << layer << " space " << to_string(dir.space);
    if (dir.info.validation_auroc) out_stream << " val_auroc " << *dir.info.validation_auroc;
    out_stream << "\n";
    print_written(out_stream, {out, out + ".json"});
    return kOk;
  }
};

// ---------------------------------------------------------------- sweep / agree / transfer

struct SweepCommand {
  DataOptions data;
  SpaceOptions space;
  TrainOptions train;
  std::vector<std::uint32_t> layers;
  OutputOptions output;

  void attach(CLI::App* app) {
    add_data_options(app, data);
    add_space_options(app, space);
    app->add_option("--layers", layers, "Layers to sweep, comma separated (default: all)")
        ->delimiter(',');
    add_train_options(app, train);
    add_output_options(app, output);
  }

  int run(std::ostream& out, std::ostream& err) const {
    const auto setting = make_setting(data, space.raw ? 0 : space.components, train, layers);
    const auto report = layer_sweep(setting);
    print_skipped(err, report);
    print_written(out, emit(report, output));
    return kOk;
  }
};

struct AgreeCommand {
  DataOptions data;
  SpaceOptions space;
  TrainOptions train;
  AgreeOptions agree;
  std::uint32_t layer = 0;
  OutputOptions output;

  void attach(CLI::App* app) {
    add_data_options(app, data);
    add_space_options(app, space);
    app->add_option("--layer", layer, "Layer index")->required();
    add_train_options(app, train);
    add_agree_options(app, agree);
    add_output_options(app, output);
  }

  int run(std::ostream& out, std::ostream&) const {
    const auto setting = make_setting(data, space.raw ? 0 : space.components, train, {layer});
    const auto report = within_agreement(setting, layer, agreement(agree, train.seed));
    print_written(out, emit(report, output));
    return kOk;
  }
};

struct TransferCommand {
  DataOptions data;
  std::string target;
  std::string target_dir;
  SpaceOptions space;
  TrainOptions train;
  AgreeOptions agree;
  std::uint32_t layer = 0;
  OutputOptions output;

  void attach(CLI::App* app) {
    add_data_options(app, data);
    app->get_option("--dataset")->description("Source dataset name");
    app->add_option("--target", target, "Target dataset name")->required();
    app->add_option("--target-dir", target_dir, "Target data directory (default: --data-dir)");
    add_space_options(app, space);
    app->add_option("--layer", layer, "Layer index")->required();
    add_train_options(app, train);
    add_agree_options(app, agree);
    add_output_options(app, output);
  }

  int run(std::ostream& out, std::ostream&) const {
    const std::uint32_t k = space.raw ? 0 : space.components;
    const auto source = make_setting(data, k, train, {layer});
    DataOptions t = data;
    t.dataset = target;
    if (!target_dir.empty()) t.data_dir = target_dir;
    const auto tgt = make_setting(t, k, train, {layer});
    const auto report = transfer_eval(source, tgt, layer, agreement(agree, train.seed));
    print_written(out, emit(report, output));
    return kOk;
  }
};

// ---------------------------------------------------------------- align

struct AlignCommand {
  std::string a;
  std::string b;
  std::string model;
  std::uint32_t layer = 0;
  std::uint32_t n_layers = 1;
  bool angles = false;
  std::string out;
  bool force = false;

  void attach(CLI::App* app) {
    app->add_option("--a", a, "First PCA model")->required();
    app->add_option("--b", b, "Second PCA model")->required();
    app->add_option("--model", model, "Model label for the CSV row");
    app->add_option("--layer", layer, "Layer label for the CSV row")->capture_default_str();
    app->add_option("--n-layers", n_layers, "Layer count used to normalize --layer")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_flag("--angles", angles, "Also print the principal angles to standard error");
    app->add_option("--out", out, "CSV path (default: standard output)");
    app->add_flag("--force", force, "Overwrite existing output");
  }

  int run(std::ostream& out_stream, std::ostream& err) const {
    if (layer >= n_layers) throw UsageError("align: --layer must be below --n-layers");
    const auto ma = load_pca(a);
    const auto mb = load_pca(b);
    const SubspacePair pair{ma, mb};
    AlignmentRow row;
    row.model = model;
    row.layer = layer;
    row.normalized_layer = n_layers <= 1 ? 0.0 : static_cast<double>(layer) / (n_layers - 1);
    row.geodesic = geodesic_distance(pair);
    row.mean_cosine = mean_pc_cosine(pair);
    if (angles) {
      err << "angles";
      for (double t : principal_angles(pair)) err << ' ' << t;
      err << "\n";
    }
    const auto csv = alignment_csv({row});
    if (out.empty()) {
      out_stream << csv;
    } else {
      check_output(out, force);
      write_text(out, csv);
      print_written(out_stream, {out});
    }
    return kOk;
  }
};

// ---------------------------------------------------------------- rank

struct RankCommand {
  std::string direction;
  std::string pca;
  DataOptions data;
  std::uint32_t layer = 0;
  std::string split = "test";
  std::vector<double> fractions = kDefaultRankFractions;
  std::string out;
  bool force = false;

  void attach(CLI::App* app) {
    app->add_option("--direction", direction, "Direction file")->required();
    app->add_option("--pca", pca, "PCA model for mapping a PCA-space direction back");
    add_data_options(app, data);
    app->add_option("--layer", layer, "Layer index")->required();
    app->add_option("--split", split, "train|validation|test|all")
        ->check(CLI::IsMember({"train", "validation", "test", "all"}))
        ->capture_default_str();
    app->add_option("--fractions", fractions, "Top fractions for token-length statistics")
        ->delimiter(',')
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app->add_option("--out", out, "Output prefix; writes <prefix>.csv and <prefix>_lengths.csv")
        ->required();
    app->add_flag("--force", force, "Overwrite existing outputs");
  }

  int run(std::ostream& out_stream, std::ostream&) const {
    const auto dir = embedding_direction(direction, pca);
    const auto setting = make_setting(data, 0, {}, {layer});
    std::optional<Split> s;
    if (split != "all") s = parse_split(split);
    const auto report = rank_report(dir, setting, layer, s, fractions);
    const auto ranks = out + ".csv";
    const auto lengths = out + "_lengths.csv";
    check_output(ranks, force);
    check_output(lengths, force);
    write_text(ranks, rank_report_csv(report));
    write_text(lengths, rank_lengths_csv(report));
    print_written(out_stream, {ranks, lengths});
    return kOk;
  }
};

// ---------------------------------------------------------------- steer

struct SteerBuildCommand {
  std::string direction;
  std::string pca;
  std::optional<std::uint32_t> layer;
  std::string norm = "raw";
  std::string out;
  bool force = false;

  void attach(CLI::App* app) {
    app->add_option("--direction", direction, "Direction file")->required();
    app->add_option("--pca", pca, "PCA model for mapping a PCA-space direction back");
    app->add_option("--layer", layer, "Injection layer (default: the direction's layer)");
    app->add_option("--norm", norm, "raw|unit")
        ->check(CLI::IsMember({"raw", "unit"}))
        ->capture_default_str();
    app->add_option("--out", out, "Steering vector file (a .json descriptor is written alongside)")
        ->required();
    app->add_flag("--force", force, "Overwrite existing output");
  }

  int run(std::ostream& out_stream, std::ostream&) const {
    const auto dir = embedding_direction(direction, pca);
    auto sv = build_steering_vector(dir, layer.value_or(dir.layer), parse_steering_norm(norm));
    sv.source_hash = fingerprint_file(direction);
    check_output(out, force);
    check_output(out + ".json", force);
    save_steering_vector(out, sv);
    print_written(out_stream, {out, out + ".json"});
    return kOk;
  }
};

struct SteerAggregateCommand {
  std::string judge;
  std::string generations;
  std::string meta;
  std::string out;
  bool force = false;

  void attach(CLI::App* app) {
    app->add_option("--judge", judge, "Judge CSV with columns id,alpha,layer,score")->required();
    app->add_option("--generations", generations, "Generations JSON lines")->required();
    app->add_option("--meta", meta, "Dataset metadata for context labels");
    app->add_option("--out", out, "CSV path (default: standard output)");
    app->add_flag("--force", force, "Overwrite existing output");
  }

  int run(std::ostream& out_stream, std::ostream& err) const {
    require_file(judge);
    require_file(generations);
    std::optional<DatasetMeta> m;
    if (!meta.empty()) m = read_meta(meta);
    const auto result = aggregate_scores(judge, generations, m ? &*m : nullptr);
    if (result.dropped > 0) err << "note: dropped " << result.dropped << " invalid scores\n";
    const auto csv = alpha_sweep_csv(result);
    if (out.empty()) {
      out_stream << csv;
    } else {
      check_output(out, force);
      write_text(out, csv);
      print_written(out_stream, {out});
    }
    return kOk;
  }
};

// ---------------------------------------------------------------- synth

struct SynthCommand {
  SyntheticSpec spec;
  std::vector<double> delta_mu{2.0};
  std::string out;
  bool force = false;

  void attach(CLI::App* app) {
    app->add_option("--out", out, "Output directory")->required();
    app->add_option("--dataset", spec.dataset, "Dataset name")->capture_default_str();
    app->add_option("--model-id", spec.model_id, "Model id recorded in the metadata")
        ->capture_default_str();
    app->add_option("--d", spec.d, "Dimension")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--n-per-class", spec.n_per_class, "Examples per class")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--delta-mu", delta_mu,
                    "Mean difference: one magnitude, or d comma-separated entries")
        ->delimiter(',')
        ->capture_default_str();
    app->add_option("--sigma", spec.noise_sigma, "Noise standard deviation")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--nuisance-dims", spec.nuisance_dims, "High-variance label-free directions")
        ->capture_default_str();
    app->add_option("--nuisance-scale", spec.nuisance_scale, "Nuisance std as a multiple of sigma")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app->add_option("--layers", spec.n_layers, "Number of pseudo-layers")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--layer-gain", spec.layer_gain, "Per-layer signal multiplier, comma separated")
        ->delimiter(',');
    app->add_option("--seed", spec.seed, "Seed for samples, labels and splits")
        ->capture_default_str();
    app->add_option("--direction-seed", spec.direction_seed, "Seed for signal directions")
        ->capture_default_str();
    app->add_flag("--force", force, "Overwrite existing outputs");
  }

  int run(std::ostream& out_stream, std::ostream&) {
    spec.delta_mu = delta_mu;
    spec.validate();
    std::vector<std::string> targets{(fs::path(out) / meta_filename(spec.dataset)).string()};
    for (std::uint32_t l = 0; l < spec.n_layers; ++l) {
      for (Split s : {Split::train, Split::validation, Split::test}) {
        targets.push_back((fs::path(out) / activation_filename(spec.dataset, s, l)).string());
      }
    }
    for (const auto& t : targets) check_output(t, force);
    print_written(out_stream, write_synthetic(generate_synthetic(spec), out));
    return kOk;
  }
};

// ---------------------------------------------------------------- report

struct ReportCommand {
  std::vector<std::string> inputs;
  OutputOptions output;

  void attach(CLI::App* app) {
    app->add_option("--in", inputs, "Report JSON files to merge")->required();
    add_output_options(app, output);
  }

  int run(std::ostream& out, std::ostream& err) const {
    EvalReport merged;
    for (const auto& path : inputs) {
      require_file(path);
      merged.merge(read_report_json(path));
    }
    print_skipped(err, merged);
    print_written(out, emit(merged, output));
    return kOk;
  }
};

// ---------------------------------------------------------------- dispatch

struct Commands {
  PoolCommand pool;
  PcaFitCommand pca_fit;
  PcaTransformCommand pca_transform;
  PcaReportCommand pca_report;
  TrainCommand train;
  SweepCommand sweep;
  AgreeCommand agree;
  TransferCommand transfer;
  AlignCommand align;
  RankCommand rank;
  SteerBuildCommand steer_build;
  SteerAggregateCommand steer_aggregate;
  SynthCommand synth;
  ReportCommand report;
};

const char* kFooter =
    "Exit codes: 0 success, 1 usage error, 2 data or I/O error.\n"
    "PROBEKIT_THREADS caps the number of worker threads.";

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linear probing toolkit for layer-wise activation analysis", "probekit"};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "JSON file mirroring the subcommand's flags (flags win)");

  Commands c;
  c.pool.attach(app.add_subcommand("pool", "Pool a token-level activation file to one row per example"));
  auto* pca = app.add_subcommand("pca", "Fit, apply and inspect PCA models");
  pca->require_subcommand(1);
  c.pca_fit.attach(pca->add_subcommand("fit", "Fit PCA on an example-level file"));
  c.pca_transform.attach(pca->add_subcommand("transform", "Project activations to PCA coordinates"));
  c.pca_report.attach(pca->add_subcommand("report", "Explained-variance table"));
  c.train.attach(app.add_subcommand("train", "Train one probe direction"));
  c.sweep.attach(app.add_subcommand("sweep", "Train and evaluate all probes across layers"));
  c.agree.attach(app.add_subcommand("agree", "Pairwise agreement between probes at one layer"));
  c.transfer.attach(app.add_subcommand("transfer", "Apply source-dataset directions to a target"));
  c.align.attach(app.add_subcommand("align", "Grassmann distance between two PCA subspaces"));
  c.rank.attach(app.add_subcommand("rank", "Rank examples by a direction's score"));
  auto* steer = app.add_subcommand("steer", "Steering vectors and judge-score aggregation");
  steer->require_subcommand(1);
  c.steer_build.attach(steer->add_subcommand("build", "Build a steering vector from a direction"));
  c.steer_aggregate.attach(
      steer->add_subcommand("aggregate", "Aggregate judge scores into alpha-sweep curves"));
  c.synth.attach(app.add_subcommand("synth", "Write a synthetic two-class dataset"));
  c.report.attach(app.add_subcommand("report", "Merge report JSON files and re-emit them"));

  for (auto* sub : app.get_subcommands({})) sub->footer(kFooter);

  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      ++i;
      continue;
    }
    if (args[i].starts_with('-')) continue;
    if (app.get_subcommand_no_throw(args[i]) == nullptr) {
      err << "probekit: error: unknown subcommand '" << args[i] << "'\n" << app.help();
      return kUsage;
    }
    break;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::FileError& e) {
    err << "probekit: error: " << e.what() << "\n";
    return kDataError;
  } catch (const CLI::ParseError& e) {
    // Unknown flags are the more useful message when a required flag is
    // also missing.
    const auto extras = app.remaining(true);
    if (!extras.empty() && dynamic_cast<const CLI::ExtrasError*>(&e) == nullptr) {
      err << "probekit: error: unrecognized argument" << (extras.size() > 1 ? "s" : "") << ": "
          << CLI::detail::join(extras, " ") << "\n";
    } else {
      err << "probekit: error: " << e.what() << "\n";
    }
    if (app.get_subcommands().empty() || args.empty()) {
      err << app.help();
    } else {
      err << "Run with --help for usage.\n";
    }
    return kUsage;
  }

  try {
    const auto parsed = [](const CLI::App* a) { return a->parsed(); };
    if (parsed(app.get_subcommand("pool"))) return c.pool.run(out, err);
    if (parsed(pca)) {
      if (pca->got_subcommand("fit")) return c.pca_fit.run(out, err);
      if (pca->got_subcommand("transform")) return c.pca_transform.run(out, err);
      return c.pca_report.run(out, err);
    }
    if (parsed(app.get_subcommand("train"))) return c.train.run(out, err);
    if (parsed(app.get_subcommand("sweep"))) return c.sweep.run(out, err);
    if (parsed(app.get_subcommand("agree"))) return c.agree.run(out, err);
    if (parsed(app.get_subcommand("transfer"))) return c.transfer.run(out, err);
    if (parsed(app.get_subcommand("align"))) return c.align.run(out, err);
    if (parsed(app.get_subcommand("rank"))) return c.rank.run(out, err);
    if (parsed(steer)) {
      if (steer->got_subcommand("build")) return c.steer_build.run(out, err);
      return c.steer_aggregate.run(out, err);
    }
    if (parsed(app.get_subcommand("synth"))) return c.synth.run(out, err);
    return c.report.run(out, err);
  } catch (const UsageError& e) {
    err << "probekit: error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "probekit: error: " << e.what() << "\n";
    return kDataError;
  } catch (const nlohmann::json::exception& e) {
    err << "probekit: error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "probekit: error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace probekit::cli
