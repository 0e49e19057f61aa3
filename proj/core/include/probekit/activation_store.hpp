#pragma once

// On-disk activation files (".rqac") and the JSON metadata sidecar that
// describes labels, splits and token spans for a dataset.
//
// Binary layout, little-endian, no padding:
//
//   magic        4 bytes  "RQAC"
//   version      u32      (currently 1)
//   kind         u32      0 = token_level, 1 = example_level
//   layer_index  u32
//   hidden_dim   u32
//   n_examples   u32
//   total_rows   u64
//   offsets      u64[n_examples + 1]   token_level only
//   data         f32[total_rows * hidden_dim], row-major

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace probekit {

enum class ActivationKind : std::uint32_t { token_level = 0, example_level = 1 };

struct ActivationFile {
  static constexpr std::array<char, 4> kMagic{'R', 'Q', 'A', 'C'};
  static constexpr std::uint32_t kVersion = 1;

  ActivationKind kind = ActivationKind::example_level;
  std::uint32_t layer_index = 0;
  std::uint32_t hidden_dim = 0;
  std::uint32_t n_examples = 0;
  std::uint64_t total_rows = 0;
  // n_examples + 1 row boundaries for token_level files; empty otherwise.
  std::vector<std::uint64_t> offsets;
  std::vector<float> data;

  // Throws InvariantError describing the first violated rule.
  void validate() const;

  std::span<const float> row(std::uint64_t r) const {
    return {data.data() + r * hidden_dim, hidden_dim};
  }

  // Token rows [begin, end) belonging to example i.
  std::pair<std::uint64_t, std::uint64_t> token_range(std::uint32_t i) const;

  // Builds an example-level file from an [n x d] matrix (values narrowed to f32).
  static ActivationFile from_matrix(const Eigen::MatrixXd& rows, std::uint32_t layer);

  // Example-level rows as a float64 matrix.
  Eigen::MatrixXd to_matrix() const;

  bool operator==(const ActivationFile&) const = default;
};

void write_activation_file(const std::string& path, const ActivationFile& file);
ActivationFile read_activation_file(const std::string& path);

// Serialized bytes without touching the filesystem.
std::vector<char> encode_activation_file(const ActivationFile& file);
ActivationFile decode_activation_file(const std::vector<char>& bytes,
                                      const std::string& context = "<memory>");

enum class Label { rhetorical, informational };
enum class Split { train, validation, test };

std::string_view to_string(Label label);
std::string_view to_string(Split split);
Label parse_label(std::string_view text);
Split parse_split(std::string_view text);

struct TokenSpan {
  std::uint64_t start = 0;
  std::uint64_t end = 0;
  bool operator==(const TokenSpan&) const = default;
};

struct ExampleMeta {
  std::string id;
  Label label = Label::informational;
  Split split = Split::train;
  std::uint64_t n_tokens = 0;
  TokenSpan question_span;
  bool operator==(const ExampleMeta&) const = default;
};

struct DatasetMeta {
  std::string dataset_name;
  std::string tokenizer_id;
  std::string model_id;
  std::uint32_t n_layers = 0;
  std::vector<ExampleMeta> examples;

  void validate() const;
  std::size_t size() const { return examples.size(); }
  std::size_t count(Split split) const;
  // Examples of one split, in original order.
  DatasetMeta subset(Split split) const;

  bool operator==(const DatasetMeta&) const = default;
};

std::string meta_to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(const std::string& text);
void write_meta(const std::string& path, const DatasetMeta& meta);
DatasetMeta read_meta(const std::string& path);

// Checks that a token-level file agrees with per-example token counts.
void check_token_counts(const ActivationFile& file, const DatasetMeta& meta);

// In-memory join of pooled activations with labels.
struct LabeledMatrix {
  Eigen::MatrixXd X;
  std::vector<int> y;  // 1 = rhetorical, 0 = informational
  std::vector<std::string> ids;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }
  std::size_t positives() const;
  void validate() const;
};

// `file` must be example-level and hold exactly meta.size() rows in meta
// order. Returns the rows of `split`, preserving order.
LabeledMatrix join(const ActivationFile& file, const DatasetMeta& meta, Split split);

// `<dataset>__<split>__L<layer>.rqac`
std::string activation_filename(std::string_view dataset, Split split, std::uint32_t layer);
// `<dataset>__meta.json`
std::string meta_filename(std::string_view dataset);

struct ActivationName {
  std::string dataset;
  Split split;
  std::uint32_t layer;
};
std::optional<ActivationName> parse_activation_filename(std::string_view filename);

// 64-bit FNV-1a of the file contents, as 16 hex digits.
std::string fingerprint_file(const std::string& path);

}  // namespace probekit
