#include <benchmark/benchmark.h>

#include "privmeter/footprint.hpp"
#include "privmeter/synth.hpp"

namespace {

void BM_BuildFootprint(benchmark::State& state) {
  const auto rules = privmeter::SuffixRules::load(PRIVMETER_BENCH_DATA_DIR "/public_suffix_list.dat");
  const auto map = privmeter::synth::entity_map(privmeter::synth::build_ecosystem({}));
  const auto runs = privmeter::synth::generate({}, static_cast<int>(state.range(0))).runs;
  for (auto _ : state) {
    const auto g = privmeter::build_footprint(runs, rules, map, privmeter::GroupingMethod::Root);
    benchmark::DoNotOptimize(privmeter::footprint_metrics(g));
  }
}
BENCHMARK(BM_BuildFootprint)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace
