#include "probekit/pooling.hpp"

#include <algorithm>
#include <vector>

#include "probekit/errors.hpp"

namespace probekit {

PoolingSpec PoolingSpec::parse(std::string_view strategy, std::uint32_t k) {
  PoolingSpec spec;
  if (strategy == "last") {
    spec = last_token();
  } else if (strategy == "mean") {
    spec = mean_all();
  } else if (strategy == "lastk") {
    spec = last_k(k);
  } else if (strategy == "span") {
    spec = question_span();
  } else {
    throw InvariantError("unknown pooling strategy '" + std::string(strategy) + "'");
  }
  spec.validate();
  return spec;
}

void PoolingSpec::validate() const {
  if (strategy == PoolingStrategy::last_k && k < 1) {
    throw InvariantError("pooling: last_k requires k >= 1");
  }
}

std::string PoolingSpec::name() const {
  switch (strategy) {
    case PoolingStrategy::last_token: return "last";
    case PoolingStrategy::mean_all: return "mean";
    case PoolingStrategy::last_k: return "last" + std::to_string(k);
    case PoolingStrategy::question_span_mean: return "span";
  }
  return "?";
}

namespace {

void mean_rows(const ActivationFile& file, std::uint64_t begin, std::uint64_t end,
               std::vector<double>& acc, float* out) {
  std::fill(acc.begin(), acc.end(), 0.0);
  for (std::uint64_t r = begin; r < end; ++r) {
    const auto row = file.row(r);
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(end - begin);
  for (std::size_t c = 0; c < acc.size(); ++c) out[c] = static_cast<float>(acc[c] * inv);
}

}  // namespace

ActivationFile pool(const ActivationFile& file, const DatasetMeta& meta, const PoolingSpec& spec) {
  spec.validate();
  if (file.kind != ActivationKind::token_level) {
    throw InvariantError("pool: input must be a token_level file");
  }
  check_token_counts(file, meta);

  ActivationFile out;
  out.kind = ActivationKind::example_level;
  out.layer_index = file.layer_index;
  out.hidden_dim = file.hidden_dim;
  out.n_examples = file.n_examples;
  out.total_rows = file.n_examples;
  out.data.resize(static_cast<std::size_t>(file.n_examples) * file.hidden_dim);

  std::vector<double> acc(file.hidden_dim);
  for (std::uint32_t i = 0; i < file.n_examples; ++i) {
    const auto [begin, end] = file.token_range(i);
    const auto n_tokens = end - begin;
    if (n_tokens == 0) {
      throw InvariantError("pool: example '" + meta.examples[i].id + "' has no tokens");
    }
    float* dst = out.data.data() + static_cast<std::size_t>(i) * file.hidden_dim;
    switch (spec.strategy) {
      case PoolingStrategy::last_token: {
        const auto row = file.row(end - 1);
        std::copy(row.begin(), row.end(), dst);
        break;
      }
      case PoolingStrategy::mean_all:
        mean_rows(file, begin, end, acc, dst);
        break;
      case PoolingStrategy::last_k: {
        const auto take = std::min<std::uint64_t>(spec.k, n_tokens);
        mean_rows(file, end - take, end, acc, dst);
        break;
      }
      case PoolingStrategy::question_span_mean: {
        const auto& span = meta.examples[i].question_span;
        if (!(span.start < span.end && span.end <= n_tokens)) {
          throw InvariantError("pool: question span outside token range for '" +
                               meta.examples[i].id + "'");
        }
        mean_rows(file, begin + span.start, begin + span.end, acc, dst);
        break;
      }
    }
  }
  return out;
}

}  // namespace probekit
