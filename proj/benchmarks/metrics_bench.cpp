#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "probekit/metrics.hpp"

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

void BM_Auroc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto scores = noise(n, 1);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  for (auto _ : state) benchmark::DoNotOptimize(probekit::auroc(scores, labels));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auroc)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity(benchmark::oNLogN);

void BM_Spearman(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = noise(n, 2);
  const auto b = noise(n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(probekit::spearman(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Spearman)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity(benchmark::oNLogN);

void BM_SpearmanBootstrap(benchmark::State& state) {
  const auto a = noise(1000, 4);
  const auto b = noise(1000, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(probekit::spearman_bootstrap(a, b, state.range(0)));
  }
}
BENCHMARK(BM_SpearmanBootstrap)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
