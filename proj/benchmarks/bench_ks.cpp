#include <benchmark/benchmark.h>

#include <vector>

#include "privmeter/rng.hpp"
#include "privmeter/stats.hpp"

namespace {

std::vector<double> sample(std::size_t n, std::uint64_t seed, double shift) {
  privmeter::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform() + shift;
  return v;
}

void BM_KsStatistic(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = sample(n, 1, 0.0), b = sample(n, 2, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(privmeter::stats::ks_statistic(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KsStatistic)->RangeMultiplier(4)->Range(64, 65536)->Complexity();

void BM_KsPermutation(benchmark::State& state) {
  const auto a = sample(50, 1, 0.0), b = sample(50, 2, 0.1);
  const double d = privmeter::stats::ks_statistic(a, b);
  for (auto _ : state) {
    benchmark::DoNotOptimize(privmeter::stats::ks_permutation_pvalue(a, b, d, 10000, 3));
  }
}
BENCHMARK(BM_KsPermutation)->Unit(benchmark::kMillisecond);

}  // namespace
