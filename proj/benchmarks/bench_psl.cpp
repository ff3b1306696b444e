#include <benchmark/benchmark.h>

#include "privmeter/psl.hpp"

namespace {

const privmeter::SuffixRules& rules() {
  static const auto r = privmeter::SuffixRules::load(PRIVMETER_BENCH_DATA_DIR "/public_suffix_list.dat");
  return r;
}

void BM_LoadList(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(privmeter::SuffixRules::load(PRIVMETER_BENCH_DATA_DIR "/public_suffix_list.dat"));
  }
}
BENCHMARK(BM_LoadList)->Unit(benchmark::kMillisecond);

void BM_RegistrableDomain(benchmark::State& state) {
  const char* hosts[] = {"www.example.com", "a.b.c.example.co.uk", "foo.bar.kawasaki.jp", "cdn.site.github.io",
                         "x.y.z.w.blogspot.com", "localhost"};
  const auto& r = rules();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(privmeter::registrable_domain(hosts[i++ % 6], r));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_RegistrableDomain);

}  // namespace
