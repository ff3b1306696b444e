#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace privmeter {

/// Deterministic random source. The standard distributions are
/// implementation-defined, so every draw here is derived from the raw
/// mt19937_64 output, which the standard pins bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  /// Index drawn with probability proportional to `weights`.
  std::size_t weighted(const std::vector<double>& weights);

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::swap(first[i - 1], first[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finaliser; used to derive independent child seeds.
std::uint64_t mix64(std::uint64_t x);

/// Child seed for a (parent, tag...) path. Stable across platforms.
std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path);

}  // namespace privmeter
