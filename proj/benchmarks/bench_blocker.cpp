#include <benchmark/benchmark.h>

#include "privmeter/blocker.hpp"
#include "privmeter/synth.hpp"

namespace {

struct Fixture {
  privmeter::SuffixRules rules = privmeter::SuffixRules::load(PRIVMETER_BENCH_DATA_DIR "/public_suffix_list.dat");
  privmeter::synth::Ecosystem eco = privmeter::synth::build_ecosystem({});
  privmeter::CrawlRun run = privmeter::synth::generate({}, 1).runs.front();
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_ApplyRuleList(benchmark::State& state) {
  const auto& f = fixture();
  privmeter::BlockerSpec b;
  b.id = "list";
  b.rule_lists.push_back(
      privmeter::parse_rule_list(privmeter::synth::tracker_rule_list(f.eco, static_cast<int>(state.range(0)), true)).list);
  for (auto _ : state) benchmark::DoNotOptimize(privmeter::apply_blocker(b, f.run, f.rules));
}
BENCHMARK(BM_ApplyRuleList)->Arg(10)->Arg(150)->Unit(benchmark::kMillisecond);

void BM_ApplyHeuristic(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    privmeter::BlockerSpec b;
    b.heuristic = privmeter::HeuristicBlockerState{};
    benchmark::DoNotOptimize(privmeter::apply_blocker(b, f.run, f.rules));
  }
}
BENCHMARK(BM_ApplyHeuristic)->Unit(benchmark::kMillisecond);

}  // namespace
