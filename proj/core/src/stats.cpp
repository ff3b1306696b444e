#include "privmeter/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "privmeter/error.hpp"
#include "privmeter/rng.hpp"

namespace privmeter::stats {

Ecdf::Ecdf(std::span<const double> samples) : n_(samples.size()) {
  if (samples.empty()) throw Error("ecdf: empty sample");
  std::vector<double> sorted(samples.begin(), samples.end());
  if (!std::all_of(sorted.begin(), sorted.end(), [](double x) { return std::isfinite(x); })) {
    throw Error("ecdf: non-finite sample");
  }
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    values_.push_back(sorted[i]);
    cumulative_.push_back(static_cast<double>(i + 1) / static_cast<double>(n_));
  }
  cumulative_.back() = 1.0;
}

double Ecdf::operator()(double x) const {
  const auto it = std::upper_bound(values_.begin(), values_.end(), x);
  if (it == values_.begin()) return 0.0;
  return cumulative_[static_cast<std::size_t>(it - values_.begin()) - 1];
}

namespace {

double sorted_ks(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  const auto m = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (j == b.size() || (i < a.size() && a[i] <= b[j])) {
      v = a[i];
    } else {
      v = b[j];
    }
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

void require_samples(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error("ks: empty sample");
}

}  // namespace

double ks_statistic(std::span<const double> a, std::span<const double> b) {
  require_samples(a, b);
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  return sorted_ks(sa, sb);
}

double ks_asymptotic_pvalue(double d, std::size_t n, std::size_t m) {
  if (n == 0 || m == 0) throw Error("ks: empty sample");
  const double ne = static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m);
  const double root = std::sqrt(ne);
  const double lambda = (root + 0.12 + 0.11 / root) * d;
  // The alternating series converges slowly near zero, where Q(lambda) = 1
  // to double precision anyway.
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-12) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_permutation_pvalue(std::span<const double> a, std::span<const double> b, double d, std::size_t shuffles,
                             std::uint64_t seed) {
  require_samples(a, b);
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  Rng rng(seed);
  std::vector<double> sa(a.size()), sb(b.size());
  std::size_t hits = 0;
  for (std::size_t s = 0; s < shuffles; ++s) {
    rng.shuffle(pooled.begin(), pooled.end());
    std::copy(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(a.size()), sa.begin());
    std::copy(pooled.begin() + static_cast<std::ptrdiff_t>(a.size()), pooled.end(), sb.begin());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sorted_ks(sa, sb) >= d - 1e-12) ++hits;
  }
  return static_cast<double>(hits + 1) / static_cast<double>(shuffles + 1);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha, PValueMethod method) {
  require_samples(a, b);
  KsResult r;
  r.n = a.size();
  r.m = b.size();
  r.d_statistic = ks_statistic(a, b);
  const bool permute = method == PValueMethod::Permutation || (method == PValueMethod::Auto && r.n * r.m < 400);
  if (r.d_statistic == 0.0) {
    r.p_value = 1.0;
  } else if (permute) {
    r.p_value = ks_permutation_pvalue(a, b, r.d_statistic, kPermutationShuffles, mix64(r.n * 1000003 + r.m));
  } else {
    r.p_value = ks_asymptotic_pvalue(r.d_statistic, r.n, r.m);
  }
  r.same_distribution = r.p_value >= alpha;
  return r;
}

namespace {

struct Samples {
  std::vector<std::string> ids;               // map order
  std::vector<std::vector<double>> values;    // over common sites
};

Samples common_samples(const PerSiteValues& values) {
  if (values.size() < 2) throw Error("ks_rank: need at least two configurations");
  std::set<std::string> common;
  bool first = true;
  for (const auto& [id, sites] : values) {
    std::set<std::string> keys;
    for (const auto& [site, v] : sites) keys.insert(site);
    if (first) {
      common = std::move(keys);
      first = false;
    } else {
      std::set<std::string> both;
      std::set_intersection(common.begin(), common.end(), keys.begin(), keys.end(),
                            std::inserter(both, both.end()));
      common = std::move(both);
    }
  }
  if (common.empty()) throw Error("ks_rank: configurations share no site");
  Samples s;
  for (const auto& [id, sites] : values) {
    s.ids.push_back(id);
    auto& col = s.values.emplace_back();
    for (const auto& site : common) col.push_back(sites.at(site));
  }
  return s;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

RankAssignment ks_rank(const PerSiteValues& values, double alpha, Direction direction, Grouping grouping,
                       PValueMethod method) {
  const auto samples = common_samples(values);
  RankAssignment out;
  std::vector<std::size_t> order(samples.ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> means(samples.ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    means[i] = mean_of(samples.values[i]);
    out.mean[samples.ids[i]] = means[i];
    out.stddev[samples.ids[i]] = stddev_of(samples.values[i]);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (means[x] != means[y]) return direction == Direction::LowerIsBetter ? means[x] < means[y] : means[x] > means[y];
    return samples.ids[x] < samples.ids[y];
  });

  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t idx : order) {
    bool joins = false;
    if (!groups.empty()) {
      const auto& current = groups.back();
      auto same = [&](std::size_t other) {
        return ks_two_sample(samples.values[idx], samples.values[other], alpha, method).same_distribution;
      };
      joins = grouping == Grouping::Anchor ? same(current.front()) : std::all_of(current.begin(), current.end(), same);
    }
    if (joins) {
      groups.back().push_back(idx);
    } else {
      groups.push_back({idx});
    }
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& names = out.groups.emplace_back();
    for (std::size_t idx : groups[g]) {
      names.push_back(samples.ids[idx]);
      out.rank[samples.ids[idx]] = static_cast<int>(g + 1);
    }
  }
  return out;
}

PairwiseKs pairwise_ks(const PerSiteValues& values, PValueMethod method) {
  const auto samples = common_samples(values);
  const auto k = samples.ids.size();
  PairwiseKs out;
  out.ids = samples.ids;
  out.d.assign(k, std::vector<double>(k, 0.0));
  out.p.assign(k, std::vector<double>(k, 1.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto r = ks_two_sample(samples.values[i], samples.values[j], 0.05, method);
      out.d[i][j] = out.d[j][i] = r.d_statistic;
      out.p[i][j] = out.p[j][i] = r.p_value;
    }
  }
  return out;
}

PerSiteValues per_site_values(const MetricTable& table, Metric metric) {
  if (metric == Metric::Cookies) throw Error("cookies are only recorded per run; compare per-run totals instead");
  PerSiteValues out;
  for (const auto& id : table.config_ids()) {
    auto& sites = out[id];
    for (const auto& [site, mean] : per_site_means(table, id)) sites[site] = mean.get(metric);
  }
  return out;
}

PerSiteValues per_run_values(const MetricTable& table, Metric metric) {
  PerSiteValues out;
  for (const auto& row : table.runs) {
    out[row.config_id][std::to_string(row.run_index)] = static_cast<double>(row.totals.get(metric));
  }
  return out;
}

double relative_standard_error(std::span<const double> samples) {
  if (samples.size() < 2) throw Error("relative_standard_error: need at least two samples");
  const double n = static_cast<double>(samples.size());
  const double mu = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (mu == 0.0) throw Error("relative_standard_error: zero mean");
  double ss = 0.0;
  for (double x : samples) ss += (x - mu) * (x - mu);
  const double s = std::sqrt(ss / (n - 1.0));
  return (s / std::sqrt(n)) / std::abs(mu);
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

StabilityCurve stability_curve(const std::vector<CrawlRun>& runs, Metric metric, int max_n,
                               const SuffixRules& rules) {
  if (metric == Metric::Cookies) throw Error("stability: cookies have no per-site value");
  if (max_n < 2) throw Error("stability: max_n must be at least 2");
  if (static_cast<int>(runs.size()) < max_n) {
    throw Error(fmt::format("stability: max_n = {} but only {} runs available", max_n, runs.size()));
  }
  std::vector<const CrawlRun*> ordered;
  for (const auto& run : runs) {
    if (run.config_id != runs.front().config_id) throw Error("stability: runs span several configurations");
    ordered.push_back(&run);
  }
  std::stable_sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->run_index < b->run_index; });

  // site -> value per run (in run order, missing runs skipped)
  std::map<std::string, std::vector<std::pair<int, double>>> series;
  for (int r = 0; r < max_n; ++r) {
    for (const auto& visit : ordered[static_cast<std::size_t>(r)]->visits) {
      series[visit.site].emplace_back(r, static_cast<double>(visit_metrics(visit, rules).get(metric)));
    }
  }

  StabilityCurve curve;
  std::set<std::string> excluded;
  for (int n = 2; n <= max_n; ++n) {
    std::vector<double> rse;
    for (const auto& [site, obs] : series) {
      std::vector<double> xs;
      for (const auto& [r, v] : obs) {
        if (r < n) xs.push_back(v);
      }
      if (xs.size() < 2 || std::accumulate(xs.begin(), xs.end(), 0.0) == 0.0) {
        if (n == max_n) excluded.insert(site);
        continue;
      }
      const double value = relative_standard_error(xs);
      rse.push_back(value);
      if (n == max_n) curve.rse_at_max[site] = value;
    }
    StabilityPoint point;
    point.n = n;
    point.sites = rse.size();
    if (!rse.empty()) {
      point.median = percentile(rse, 0.5);
      point.p05 = percentile(rse, 0.05);
      point.p95 = percentile(rse, 0.95);
    }
    curve.points.push_back(point);
  }
  curve.excluded_sites = excluded.size();
  return curve;
}

}  // namespace privmeter::stats
