#include "probekit/activation_store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "probekit/errors.hpp"

namespace probekit {

namespace detail {

std::vector<char> read_file_bytes(const std::string& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw NotFoundError(path);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path, "read failed");
  return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

void write_text_file(const std::string& path, const std::string& text) {
  write_file_bytes(path, std::vector<char>(text.begin(), text.end()));
}

std::string read_text_file(const std::string& path) {
  auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

}  // namespace detail

void ActivationFile::validate() const {
  if (hidden_dim == 0) throw InvariantError("activation file: hidden_dim must be > 0");
  if (kind == ActivationKind::example_level) {
    if (!offsets.empty()) {
      throw InvariantError("activation file: example_level files must not carry offsets");
    }
    if (total_rows != n_examples) {
      throw InvariantError("activation file: example_level requires total_rows == n_examples");
    }
  } else if (kind == ActivationKind::token_level) {
    if (offsets.size() != static_cast<std::size_t>(n_examples) + 1) {
      throw InvariantError("activation file: token_level requires n_examples + 1 offsets");
    }
    if (offsets.front() != 0) throw InvariantError("activation file: offsets[0] must be 0");
    for (std::size_t i = 1; i < offsets.size(); ++i) {
      if (offsets[i] <= offsets[i - 1]) {
        throw InvariantError("activation file: offsets must be strictly increasing");
      }
    }
    if (offsets.back() != total_rows) {
      throw InvariantError("activation file: offsets[n_examples] must equal total_rows");
    }
  } else {
    throw InvariantError("activation file: unknown kind");
  }
  if (data.size() != total_rows * hidden_dim) {
    throw InvariantError("activation file: data size does not match total_rows * hidden_dim");
  }
  for (float v : data) {
    if (!std::isfinite(v)) throw InvariantError("activation file: non-finite value in data");
  }
}

std::pair<std::uint64_t, std::uint64_t> ActivationFile::token_range(std::uint32_t i) const {
  if (kind == ActivationKind::example_level) return {i, i + 1};
  return {offsets.at(i), offsets.at(i + 1)};
}

ActivationFile ActivationFile::from_matrix(const Eigen::MatrixXd& rows, std::uint32_t layer) {
  ActivationFile f;
  f.kind = ActivationKind::example_level;
  f.layer_index = layer;
  f.hidden_dim = static_cast<std::uint32_t>(rows.cols());
  f.n_examples = static_cast<std::uint32_t>(rows.rows());
  f.total_rows = f.n_examples;
  f.data.resize(static_cast<std::size_t>(rows.size()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      f.data[static_cast<std::size_t>(r * rows.cols() + c)] = static_cast<float>(rows(r, c));
    }
  }
  return f;
}

Eigen::MatrixXd ActivationFile::to_matrix() const {
  if (kind != ActivationKind::example_level) {
    throw InvariantError("to_matrix: expected an example_level file");
  }
  using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajorF> view(data.data(), static_cast<Eigen::Index>(total_rows),
                                   static_cast<Eigen::Index>(hidden_dim));
  return view.cast<double>();
}

std::vector<char> encode_activation_file(const ActivationFile& file) {
  file.validate();
  detail::ByteWriter w;
  w.put_bytes(std::string_view(ActivationFile::kMagic.data(), 4));
  w.put<std::uint32_t>(ActivationFile::kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(file.kind));
  w.put<std::uint32_t>(file.layer_index);
  w.put<std::uint32_t>(file.hidden_dim);
  w.put<std::uint32_t>(file.n_examples);
  w.put<std::uint64_t>(file.total_rows);
  if (file.kind == ActivationKind::token_level) {
    w.put_array(file.offsets.data(), file.offsets.size());
  }
  w.put_array(file.data.data(), file.data.size());
  return w.bytes();
}

ActivationFile decode_activation_file(const std::vector<char>& bytes, const std::string& context) {
  detail::ByteReader r(bytes, context);
  const std::string magic = r.take_bytes(4);
  if (magic != std::string_view(ActivationFile::kMagic.data(), 4)) {
    throw BadMagicError(context + ": bad magic (expected RQAC)");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != ActivationFile::kVersion) {
    throw UnsupportedVersionError(context + ": unsupported version " + std::to_string(version));
  }
  ActivationFile f;
  const auto kind = r.get<std::uint32_t>();
  if (kind > 1) throw FormatError(context + ": unknown kind " + std::to_string(kind));
  f.kind = static_cast<ActivationKind>(kind);
  f.layer_index = r.get<std::uint32_t>();
  f.hidden_dim = r.get<std::uint32_t>();
  f.n_examples = r.get<std::uint32_t>();
  f.total_rows = r.get<std::uint64_t>();
  if (f.hidden_dim == 0) throw FormatError(context + ": hidden_dim is zero");

  if (f.kind == ActivationKind::token_level) {
    r.expect(static_cast<std::uint64_t>(f.n_examples) + 1, sizeof(std::uint64_t));
    f.offsets.resize(static_cast<std::size_t>(f.n_examples) + 1);
    r.get_array(f.offsets.data(), f.offsets.size());
    if (f.offsets.front() != 0) throw InvalidOffsetsError(context + ": offsets[0] != 0");
    for (std::size_t i = 1; i < f.offsets.size(); ++i) {
      if (f.offsets[i] <= f.offsets[i - 1]) {
        throw InvalidOffsetsError(context + ": offsets not strictly increasing at index " +
                                  std::to_string(i));
      }
    }
    if (f.offsets.back() != f.total_rows) {
      throw InvalidOffsetsError(context + ": offsets[n_examples] != total_rows");
    }
  } else if (f.total_rows != f.n_examples) {
    throw FormatError(context + ": example_level file with total_rows != n_examples");
  }

  const std::uint64_t row_bytes = static_cast<std::uint64_t>(f.hidden_dim) * sizeof(float);
  r.expect(f.total_rows, row_bytes);
  const std::uint64_t expected_bytes = f.total_rows * row_bytes;
  if (r.remaining() > expected_bytes) {
    throw FormatError(context + ": trailing bytes after data block");
  }
  f.data.resize(static_cast<std::size_t>(f.total_rows * f.hidden_dim));
  r.get_array(f.data.data(), f.data.size());
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    if (!std::isfinite(f.data[i])) {
      throw NonFiniteError(context + ": non-finite value at row " +
                           std::to_string(i / f.hidden_dim));
    }
  }
  return f;
}

void write_activation_file(const std::string& path, const ActivationFile& file) {
  detail::write_file_bytes(path, encode_activation_file(file));
}

ActivationFile read_activation_file(const std::string& path) {
  return decode_activation_file(detail::read_file_bytes(path), path);
}

std::string_view to_string(Label label) {
  return label == Label::rhetorical ? "rhetorical" : "informational";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

Label parse_label(std::string_view text) {
  if (text == "rhetorical") return Label::rhetorical;
  if (text == "informational") return Label::informational;
  throw InvariantError("unknown label '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "validation") return Split::validation;
  if (text == "test") return Split::test;
  throw InvariantError("unknown split '" + std::string(text) + "'");
}

void DatasetMeta::validate() const {
  std::unordered_set<std::string> seen;
  seen.reserve(examples.size());
  for (const auto& ex : examples) {
    if (!seen.insert(ex.id).second) {
      throw InvariantError("dataset meta: duplicate id '" + ex.id + "'");
    }
    const auto& s = ex.question_span;
    if (!(s.start < s.end && s.end <= ex.n_tokens)) {
      throw InvariantError("dataset meta: invalid question_span for '" + ex.id + "'");
    }
  }
}

std::size_t DatasetMeta::count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      examples.begin(), examples.end(), [&](const ExampleMeta& e) { return e.split == split; }));
}

DatasetMeta DatasetMeta::subset(Split split) const {
  DatasetMeta out{dataset_name, tokenizer_id, model_id, n_layers, {}};
  for (const auto& e : examples) {
    if (e.split == split) out.examples.push_back(e);
  }
  return out;
}

std::string meta_to_json(const DatasetMeta& meta) {
  nlohmann::ordered_json j;
  j["dataset_name"] = meta.dataset_name;
  j["tokenizer_id"] = meta.tokenizer_id;
  j["model_id"] = meta.model_id;
  j["n_layers"] = meta.n_layers;
  auto& arr = j["examples"] = nlohmann::ordered_json::array();
  for (const auto& e : meta.examples) {
    nlohmann::ordered_json row;
    row["id"] = e.id;
    row["label"] = std::string(to_string(e.label));
    row["split"] = std::string(to_string(e.split));
    row["n_tokens"] = e.n_tokens;
    row["question_span"] = {e.question_span.start, e.question_span.end};
    arr.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

DatasetMeta meta_from_json(const std::string& text) {
  DatasetMeta meta;
  try {
    const auto j = nlohmann::json::parse(text);
    meta.dataset_name = j.at("dataset_name").get<std::string>();
    meta.tokenizer_id = j.at("tokenizer_id").get<std::string>();
    meta.model_id = j.at("model_id").get<std::string>();
    meta.n_layers = j.at("n_layers").get<std::uint32_t>();
    for (const auto& row : j.at("examples")) {
      ExampleMeta e;
      e.id = row.at("id").get<std::string>();
      e.label = parse_label(row.at("label").get<std::string>());
      e.split = parse_split(row.at("split").get<std::string>());
      e.n_tokens = row.at("n_tokens").get<std::uint64_t>();
      const auto& span = row.at("question_span");
      if (!span.is_array() || span.size() != 2) {
        throw InvariantError("dataset meta: question_span must be [start, end]");
      }
      e.question_span = {span[0].get<std::uint64_t>(), span[1].get<std::uint64_t>()};
      meta.examples.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("dataset meta: ") + ex.what());
  }
  meta.validate();
  return meta;
}

void write_meta(const std::string& path, const DatasetMeta& meta) {
  meta.validate();
  detail::write_text_file(path, meta_to_json(meta));
}

DatasetMeta read_meta(const std::string& path) {
  try {
    return meta_from_json(detail::read_text_file(path));
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void check_token_counts(const ActivationFile& file, const DatasetMeta& meta) {
  if (file.n_examples != meta.size()) {
    throw InvariantError("example count mismatch: file has " + std::to_string(file.n_examples) +
                         ", meta has " + std::to_string(meta.size()));
  }
  if (file.kind != ActivationKind::token_level) return;
  for (std::uint32_t i = 0; i < file.n_examples; ++i) {
    const auto [b, e] = file.token_range(i);
    if (e - b != meta.examples[i].n_tokens) {
      throw InvariantError("token count mismatch for '" + meta.examples[i].id + "': file has " +
                           std::to_string(e - b) + ", meta has " +
                           std::to_string(meta.examples[i].n_tokens));
    }
  }
}

std::size_t LabeledMatrix::positives() const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

void LabeledMatrix::validate() const {
  if (static_cast<std::size_t>(X.rows()) != y.size() || y.size() != ids.size()) {
    throw InvariantError("labeled matrix: row count, labels and ids disagree");
  }
  if (!X.allFinite()) throw InvariantError("labeled matrix: non-finite entries");
}

LabeledMatrix join(const ActivationFile& file, const DatasetMeta& meta, Split split) {
  if (file.kind != ActivationKind::example_level) {
    throw InvariantError("join: activation file must be example_level (pool it first)");
  }
  if (file.n_examples != meta.size()) {
    throw InvariantError("join: id-count mismatch: file has " + std::to_string(file.n_examples) +
                         " examples, meta has " + std::to_string(meta.size()));
  }
  LabeledMatrix out;
  const auto n = meta.count(split);
  out.X.resize(static_cast<Eigen::Index>(n), file.hidden_dim);
  out.y.reserve(n);
  out.ids.reserve(n);
  Eigen::Index r = 0;
  for (std::uint32_t i = 0; i < file.n_examples; ++i) {
    const auto& e = meta.examples[i];
    if (e.split != split) continue;
    const auto src = file.row(i);
    for (std::uint32_t c = 0; c < file.hidden_dim; ++c) out.X(r, c) = src[c];
    out.y.push_back(e.label == Label::rhetorical ? 1 : 0);
    out.ids.push_back(e.id);
    ++r;
  }
  return out;
}

std::string activation_filename(std::string_view dataset, Split split, std::uint32_t layer) {
  return std::string(dataset) + "__" + std::string(to_string(split)) + "__L" +
         std::to_string(layer) + ".rqac";
}

std::string meta_filename(std::string_view dataset) {
  return std::string(dataset) + "__meta.json";
}

std::optional<ActivationName> parse_activation_filename(std::string_view filename) {
  constexpr std::string_view ext = ".rqac";
  if (filename.size() <= ext.size() || !filename.ends_with(ext)) return std::nullopt;
  filename.remove_suffix(ext.size());
  const auto layer_sep = filename.rfind("__L");
  if (layer_sep == std::string_view::npos) return std::nullopt;
  const auto layer_text = filename.substr(layer_sep + 3);
  if (layer_text.empty() ||
      !std::all_of(layer_text.begin(), layer_text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  const auto head = filename.substr(0, layer_sep);
  const auto split_sep = head.rfind("__");
  if (split_sep == std::string_view::npos || split_sep == 0) return std::nullopt;
  try {
    return ActivationName{std::string(head.substr(0, split_sep)),
                          parse_split(head.substr(split_sep + 2)),
                          static_cast<std::uint32_t>(std::stoul(std::string(layer_text)))};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string fingerprint_file(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace probekit
