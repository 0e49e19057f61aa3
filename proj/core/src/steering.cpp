#include "probekit/steering.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "probekit/errors.hpp"

namespace probekit {

namespace {

constexpr std::string_view kSteeringMagic = "RQSV";
constexpr std::uint32_t kSteeringVersion = 1;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& what) {
  double v = 0.0;
  const auto t = trim(text);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw FormatError("judge file: cannot parse " + what + " '" + text + "'");
  }
  return v;
}

std::optional<int> parse_score(const std::string& text) {
  const auto t = trim(text);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
  if (v < 1 || v > 10) return std::nullopt;
  return v;
}

using JoinKey = std::tuple<std::string, double, std::uint32_t>;

}  // namespace

std::string_view to_string(SteeringNorm norm) { return norm == SteeringNorm::raw ? "raw" : "unit"; }

SteeringNorm parse_steering_norm(std::string_view text) {
  if (text == "raw") return SteeringNorm::raw;
  if (text == "unit") return SteeringNorm::unit;
  throw InvariantError("unknown steering normalization '" + std::string(text) + "'");
}

SteeringVector build_steering_vector(const ProbeDirection& dir, std::uint32_t layer,
                                     SteeringNorm normalization) {
  if (dir.space != SpaceKind::embedding) {
    throw InvariantError("steering: direction is in PCA space; map it back first");
  }
  dir.validate();
  const double norm = dir.w.norm();
  if (norm == 0.0) throw InvariantError("steering: zero direction");
  SteeringVector sv;
  sv.v = normalization == SteeringNorm::unit ? Eigen::VectorXd(dir.w / norm) : dir.w;
  sv.layer = layer;
  sv.normalization = normalization;
  sv.source_kind = dir.kind;
  sv.source_setting = dir.source_setting;
  return sv;
}

Eigen::VectorXd apply_steering(const Eigen::VectorXd& h, const SteeringVector& v, double alpha) {
  if (h.size() != v.v.size()) {
    throw DimensionError("apply_steering: hidden state has " + std::to_string(h.size()) +
                         " entries, steering vector has " + std::to_string(v.v.size()));
  }
  return h + alpha * v.v;
}

void save_steering_vector(const std::string& path, const SteeringVector& sv) {
  if (!sv.v.allFinite()) throw InvariantError("steering: non-finite vector");
  detail::ByteWriter w;
  w.put_bytes(kSteeringMagic);
  w.put<std::uint32_t>(kSteeringVersion);
  w.put<std::uint32_t>(sv.layer);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(sv.v.size()));
  w.put_array(sv.v.data(), static_cast<std::size_t>(sv.v.size()));
  detail::write_file_bytes(path, w.bytes());

  nlohmann::ordered_json j;
  j["layer"] = sv.layer;
  j["dim"] = sv.v.size();
  j["normalization"] = std::string(to_string(sv.normalization));
  j["norm"] = sv.v.norm();
  j["alpha"] = "not stored; apply as h' = h + alpha * v with alpha chosen at generation time";
  j["source_kind"] = std::string(to_string(sv.source_kind));
  j["source_setting"] = sv.source_setting;
  j["source_hash"] = sv.source_hash;
  detail::write_text_file(path + ".json", j.dump(2) + "\n");
}

SteeringVector load_steering_vector(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  detail::ByteReader r(bytes, path);
  if (r.take_bytes(4) != kSteeringMagic) throw BadMagicError(path + ": bad magic (expected RQSV)");
  const auto version = r.get<std::uint32_t>();
  if (version != kSteeringVersion) {
    throw UnsupportedVersionError(path + ": unsupported version " + std::to_string(version));
  }
  SteeringVector sv;
  sv.layer = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint64_t>();
  r.expect(dim, sizeof(double));
  sv.v.resize(static_cast<Eigen::Index>(dim));
  r.get_array(sv.v.data(), dim);
  if (r.remaining() != 0) throw FormatError(path + ": trailing bytes");
  if (!sv.v.allFinite()) throw NonFiniteError(path + ": non-finite entries");
  try {
    const auto j = nlohmann::json::parse(detail::read_text_file(path + ".json"));
    sv.normalization = parse_steering_norm(j.value("normalization", "raw"));
    sv.source_kind = parse_probe_kind(j.value("source_kind", "diffmean"));
    sv.source_setting = j.value("source_setting", "");
    sv.source_hash = j.value("source_hash", "");
  } catch (const NotFoundError&) {
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ".json: " + e.what());
  }
  return sv;
}

AlphaSweepResult aggregate_scores(std::istream& judge_csv, std::istream& generations_jsonl,
                                  const DatasetMeta* meta) {
  std::map<JoinKey, Label> generations;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(generations_jsonl, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      JoinKey key{j.at("id").get<std::string>(), j.at("alpha").get<double>(),
                  j.at("layer").get<std::uint32_t>()};
      std::optional<Label> label;
      if (j.contains("label")) {
        label = parse_label(j["label"].get<std::string>());
      } else if (meta) {
        for (const auto& e : meta->examples) {
          if (e.id == std::get<0>(key)) label = e.label;
        }
      }
      if (!label) {
        throw InvariantError("generations: no context label for id '" + std::get<0>(key) + "'");
      }
      generations[key] = *label;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("generations line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
    std::size_t dropped = 0;
  };
  std::map<std::tuple<std::uint32_t, double, Label>, Acc> groups;
  AlphaSweepResult result;

  line_no = 0;
  bool header = true;
  while (std::getline(judge_csv, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (header) {
      header = false;
      if (fields.size() >= 4 && trim(fields[0]) == "id" && trim(fields[3]) == "score") continue;
    }
    if (fields.size() != 4) {
      throw FormatError("judge file line " + std::to_string(line_no) + ": expected 4 fields");
    }
    const double alpha = parse_number(fields[1], "alpha");
    const double layer = parse_number(fields[2], "layer");
    if (layer < 0 || layer != std::floor(layer)) {
      throw FormatError("judge file line " + std::to_string(line_no) + ": bad layer");
    }
    const JoinKey key{trim(fields[0]), alpha, static_cast<std::uint32_t>(layer)};
    const auto it = generations.find(key);
    if (it == generations.end()) {
      throw InvariantError("judge file line " + std::to_string(line_no) +
                           ": no generation for id '" + std::get<0>(key) + "' at alpha " +
                           trim(fields[1]) + ", layer " + trim(fields[2]));
    }
    auto& acc = groups[{std::get<2>(key), alpha, it->second}];
    if (const auto s = parse_score(fields[3])) {
      acc.sum += *s;
      ++acc.n;
    } else {
      ++acc.dropped;
      ++result.dropped;
    }
  }

  for (const auto& [key, acc] : groups) {
    const auto& [layer, alpha, group] = key;
    if (acc.n == 0) {
      throw InvariantError("aggregate_scores: no valid scores for layer " + std::to_string(layer) +
                           ", group " + std::string(to_string(group)));
    }
    result.rows.push_back(
        {layer, alpha, group, acc.sum / static_cast<double>(acc.n), acc.n, acc.dropped});
  }
  return result;
}

AlphaSweepResult aggregate_scores(const std::string& judge_path,
                                  const std::string& generations_path, const DatasetMeta* meta) {
  std::istringstream judge(detail::read_text_file(judge_path));
  std::istringstream gens(detail::read_text_file(generations_path));
  return aggregate_scores(judge, gens, meta);
}

std::string alpha_sweep_csv(const AlphaSweepResult& result) {
  std::ostringstream out;
  out << "layer,alpha,context_group,mean_score,n,dropped\n";
  char buf[64];
  for (const auto& r : result.rows) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.alpha);
    out << r.layer << ',' << buf << ',' << to_string(r.context_group) << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.mean_score);
    out << buf << ',' << r.n << ',' << r.dropped << "\n";
  }
  return out.str();
}

}  // namespace probekit
