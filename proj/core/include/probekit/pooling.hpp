#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "probekit/activation_store.hpp"

namespace probekit {

enum class PoolingStrategy { last_token, mean_all, last_k, question_span_mean };

struct PoolingSpec {
  PoolingStrategy strategy = PoolingStrategy::last_token;
  std::uint32_t k = 1;  // last_k only

  static PoolingSpec last_token() { return {PoolingStrategy::last_token, 1}; }
  static PoolingSpec mean_all() { return {PoolingStrategy::mean_all, 1}; }
  static PoolingSpec last_k(std::uint32_t k) { return {PoolingStrategy::last_k, k}; }
  static PoolingSpec question_span() { return {PoolingStrategy::question_span_mean, 1}; }

  // Accepts the CLI spellings: last | mean | lastk | span.
  static PoolingSpec parse(std::string_view strategy, std::uint32_t k = 1);

  void validate() const;
  // Short identifier used in setting names, e.g. "last", "mean", "last5", "span".
  std::string name() const;

  bool operator==(const PoolingSpec&) const = default;
};

// Reduces a token-level file to one row per example. Means are accumulated
// in double and narrowed to float on output. `meta` must describe the same
// examples in the same order.
ActivationFile pool(const ActivationFile& file, const DatasetMeta& meta, const PoolingSpec& spec);

}  // namespace probekit
