#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "privmeter/crawl.hpp"
#include "privmeter/metrics.hpp"
#include "privmeter/psl.hpp"

namespace privmeter::stats {

/// Right-continuous empirical CDF with tied samples merged.
class Ecdf {
 public:
  /// Throws privmeter::Error on an empty or non-finite sample.
  explicit Ecdf(std::span<const double> samples);

  /// Fraction of samples <= x.
  double operator()(double x) const;

  const std::vector<double>& values() const { return values_; }        // distinct, ascending
  const std::vector<double>& cumulative() const { return cumulative_; }  // F at each value; last is 1
  std::size_t sample_size() const { return n_; }

 private:
  std::vector<double> values_;
  std::vector<double> cumulative_;
  std::size_t n_ = 0;
};

inline Ecdf ecdf(std::span<const double> samples) { return Ecdf(samples); }

/// sup |F_a - F_b| by a merged scan over both sorted samples.
double ks_statistic(std::span<const double> a, std::span<const double> b);

/// Asymptotic Kolmogorov tail probability with the small-sample correction
/// lambda = (sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) * d, ne = n m / (n + m).
double ks_asymptotic_pvalue(double d, std::size_t n, std::size_t m);

/// Monte Carlo permutation p-value: share of random relabelings of the
/// pooled sample whose statistic reaches `d`, with the (k + 1) / (B + 1)
/// correction. Deterministic for a given seed.
double ks_permutation_pvalue(std::span<const double> a, std::span<const double> b, double d, std::size_t shuffles,
                             std::uint64_t seed);

enum class PValueMethod {
  Asymptotic,
  Permutation,
  Auto,  // permutation when n * m < 400, asymptotic otherwise
};

inline constexpr std::size_t kPermutationShuffles = 20000;

struct KsResult {
  double d_statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t m = 0;
  bool same_distribution = true;  // p >= alpha
};

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha = 0.05,
                       PValueMethod method = PValueMethod::Asymptotic);

enum class Direction { LowerIsBetter, HigherIsBetter };

enum class Grouping {
  Anchor,           // join the current group iff indistinguishable from its first member
  CompleteLinkage,  // join iff indistinguishable from every member
};

struct RankAssignment {
  std::map<std::string, int> rank;             // 1-based group index
  std::vector<std::vector<std::string>> groups;  // in rank order; members in mean order
  std::map<std::string, double> mean;          // over the common sites
  std::map<std::string, double> stddev;        // sample standard deviation over the common sites
};

/// config -> (site -> value)
using PerSiteValues = std::map<std::string, std::map<std::string, double>>;

/// Orders configurations by mean (ties by id) and groups neighbours the KS
/// test cannot tell apart. Samples are restricted to the sites all configs
/// share. Throws privmeter::Error for fewer than two configs or no common site.
RankAssignment ks_rank(const PerSiteValues& values, double alpha, Direction direction,
                       Grouping grouping = Grouping::Anchor, PValueMethod method = PValueMethod::Asymptotic);

struct PairwiseKs {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> d;
  std::vector<std::vector<double>> p;
};

/// All pairwise KS tests over the common sites, ids in map order.
PairwiseKs pairwise_ks(const PerSiteValues& values, PValueMethod method = PValueMethod::Asymptotic);

/// Per-site values of `metric` for each config in `table`.
PerSiteValues per_site_values(const MetricTable& table, Metric metric);

/// Per-run totals of `metric`, keyed by run index rendered as text; lets the
/// ranking compare run totals instead of per-site means.
PerSiteValues per_run_values(const MetricTable& table, Metric metric);

/// (s / sqrt(n)) / |mean| with the n-1 sample deviation. Throws
/// privmeter::Error for fewer than two samples or a zero mean.
double relative_standard_error(std::span<const double> samples);

/// Linear interpolation between order statistics (the common "type 7").
double percentile(std::vector<double> values, double q);

struct StabilityPoint {
  int n = 0;
  double median = 0.0;
  double p05 = 0.0;
  double p95 = 0.0;
  std::size_t sites = 0;  // sites contributing at this n
};

struct StabilityCurve {
  std::vector<StabilityPoint> points;            // n = 2..max_n
  std::map<std::string, double> rse_at_max;      // per-site RSE using max_n runs
  std::size_t excluded_sites = 0;                // zero mean or a single observation
};

/// Relative standard error of `metric` as a function of the number of runs
/// used, summarised across sites. Runs must share a config; the first
/// `max_n` (by run index) are used. Throws privmeter::Error when fewer than
/// `max_n` runs exist.
StabilityCurve stability_curve(const std::vector<CrawlRun>& runs, Metric metric, int max_n,
                               const SuffixRules& rules);

}  // namespace privmeter::stats
