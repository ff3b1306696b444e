// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any fails.

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "builders.hpp"
#include "privmeter/blocker.hpp"
#include "privmeter/crawl.hpp"
#include "privmeter/footprint.hpp"
#include "privmeter/metrics.hpp"
#include "privmeter/overlap.hpp"
#include "privmeter/psl.hpp"
#include "privmeter/report.hpp"
#include "privmeter/rng.hpp"
#include "privmeter/stats.hpp"
#include "privmeter/synth.hpp"
#include "privmeter/url.hpp"

using namespace privmeter;
namespace t = privmeter::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Fraction of `xs` at or below x, counted directly.
double step(const std::vector<double>& xs, double x) {
  return static_cast<double>(std::count_if(xs.begin(), xs.end(), [&](double v) { return v <= x; })) /
         static_cast<double>(xs.size());
}

double brute_force_d(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (const auto& xs : {a, b}) {
    for (double x : xs) d = std::max(d, std::abs(step(a, x) - step(b, x)));
  }
  return d;
}

// ---------------------------------------------------------------------------

Outcome ks_criterion() {
  const auto start = Clock::now();
  Outcome out;
  Rng rng(2024);
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> a(1 + rng.below(60)), b(1 + rng.below(60));
    const auto spread = 1 + rng.below(50);
    for (auto& x : a) x = static_cast<double>(rng.below(spread));
    for (auto& x : b) x = static_cast<double>(rng.below(spread)) + static_cast<double>(rng.below(3));
    if (std::abs(stats::ks_statistic(a, b) - brute_force_d(a, b)) > 1e-12) ++mismatches;
    if (stats::ks_statistic(a, a) != 0.0) ++mismatches;
  }
  const std::vector<double> lo{1, 2, 3}, hi{10, 11};
  if (stats::ks_statistic(lo, hi) != 1.0) ++mismatches;

  // Fixed cases: continuous samples, the second shifted and scaled.
  double worst = 0.0;
  for (int c = 0; c < 20; ++c) {
    Rng g(derive_seed(99, {static_cast<std::uint64_t>(c)}));
    const auto n = static_cast<std::size_t>(30 + 5 * (c % 8));
    const auto m = static_cast<std::size_t>(30 + 7 * (c % 5));
    std::vector<double> a(n), b(m);
    for (auto& x : a) x = g.uniform();
    const double shift = 0.04 * (c % 6);
    for (auto& x : b) x = shift + g.uniform() * (1.0 + 0.05 * (c % 3));
    const double d = stats::ks_statistic(a, b);
    const double asym = stats::ks_asymptotic_pvalue(d, n, m);
    const double perm = stats::ks_permutation_pvalue(a, b, d, 100000, 7 + c);
    worst = std::max(worst, std::abs(asym - perm));
  }
  const double elapsed = seconds_since(start);
  out.pass = mismatches == 0 && worst <= 0.02 && elapsed < 60.0;
  out.detail = fmt::format("statistic mismatches {}, max |asymptotic - permutation| {:.4f}, {:.1f}s", mismatches,
                           worst, elapsed);
  return out;
}

Outcome psl_criterion() {
  std::ifstream in(t::data_dir() + "/test_psl.txt");
  Outcome out;
  if (!in) return {false, "test_psl.txt missing"};
  std::string line;
  int checked = 0, failed = 0, skipped = 0;
  while (std::getline(in, line)) {
    const auto open = line.find("checkPublicSuffix(");
    if (open == std::string::npos || line.starts_with("//")) continue;
    const bool non_ascii = std::any_of(line.begin(), line.end(), [](unsigned char c) { return c >= 0x80; });
    if (non_ascii || line.find("xn--") != std::string::npos) {
      ++skipped;
      continue;
    }
    // Arguments are either null or a single-quoted string.
    std::vector<std::optional<std::string>> args;
    std::size_t pos = open + 18;
    for (int k = 0; k < 2; ++k) {
      while (line[pos] == ' ' || line[pos] == ',') ++pos;
      if (line.compare(pos, 4, "null") == 0) {
        args.emplace_back();
        pos += 4;
      } else {
        const auto close = line.find('\'', pos + 1);
        args.emplace_back(line.substr(pos + 1, close - pos - 1));
        pos = close + 1;
      }
    }
    ++checked;
    if (!args[0]) {
      try {
        (void)registrable_domain("", t::bundled_rules());
        ++failed;
      } catch (const std::invalid_argument&) {
      }
      continue;
    }
    const auto got = registrable_domain(*args[0], t::bundled_rules());
    const std::optional<std::string> value = got ? std::optional<std::string>(got->value) : std::nullopt;
    if (value != args[1]) ++failed;
  }
  out.pass = failed == 0 && checked >= 60;
  out.detail = fmt::format("{} vectors checked, {} failed, {} punycode/unicode skipped", checked, failed, skipped);
  return out;
}

// Default corpus shared by several criteria.
const synth::Corpus& default_corpus() {
  static const auto corpus = synth::generate({}, 10);
  return corpus;
}

bool le_everywhere(const PageMetrics& a, const PageMetrics& b) {
  return std::all_of(kAllMetrics.begin(), kAllMetrics.end(), [&](Metric m) { return a.get(m) <= b.get(m); });
}

Outcome blocker_criterion() {
  const auto& rules = t::bundled_rules();
  const auto& bare = default_corpus().runs;
  const auto eco = synth::build_ecosystem({});
  Outcome out;

  BlockerSpec b3p;
  b3p.id = "b3p";
  b3p.policy = PolicyKind::BlockAllThirdParty;
  BlockerSpec noop;
  noop.id = "bare";
  std::int64_t tp_left = 0, tp_cookies_left = 0;
  for (const auto& run : simulate({b3p}, bare, rules)) {
    tp_left += run_totals(run, rules).browsing.tp_requests;
    tp_cookies_left += std::count_if(run.cookie_jar.begin(), run.cookie_jar.end(),
                                     [](const CookieEntry& c) { return c.third_party_origin; });
  }
  const bool identity = build_metric_table(simulate({noop}, bare, rules), rules) == build_metric_table(bare, rules);

  // Random rule lists built from the corpus' own domains, mixing rule shapes.
  std::vector<std::string> domains;
  for (const auto& tr : eco.trackers) domains.push_back(tr.domain);
  for (const auto& ad : eco.ad_networks) domains.push_back(ad.domain);
  for (const auto& cdn : eco.cdns) domains.push_back(cdn.domain);
  Rng rng(5);
  int increases = 0;
  std::vector<BlockerSpec> roster;
  for (int i = 0; i < 50; ++i) {
    std::string text;
    for (const auto& d : domains) {
      const auto roll = rng.below(10);
      if (roll == 0) text += "||" + d + "^\n";
      if (roll == 1) text += d + "\n";
      if (roll == 2) text += "|www." + d + "|\n";
      if (roll == 3) text += "@@||" + d + "^\n";
    }
    BlockerSpec b;
    b.id = fmt::format("list{:02d}", i);
    b.rule_lists.push_back(parse_rule_list(text, b.id).list);
    if (i % 5 == 0) b.rule_lists.front().party_scope = PartyScope::All;
    roster.push_back(std::move(b));
  }
  const auto protected_runs = simulate(roster, bare, rules, 4);
  const auto bare_table = build_metric_table(bare, rules);
  std::map<std::pair<int, std::string>, PageMetrics> bare_sites;
  for (const auto& row : bare_table.sites) bare_sites[{row.run_index, row.site}] = row.metrics;
  std::map<int, PageMetrics> bare_runs;
  for (const auto& row : bare_table.runs) bare_runs[row.run_index] = row.totals;
  const auto table = build_metric_table(protected_runs, rules);
  for (const auto& row : table.sites) increases += !le_everywhere(row.metrics, bare_sites.at({row.run_index, row.site}));
  for (const auto& row : table.runs) increases += !le_everywhere(row.totals, bare_runs.at(row.run_index));

  out.pass = tp_left == 0 && tp_cookies_left == 0 && identity && increases == 0;
  out.detail = fmt::format("block-all leaves {} tp requests / {} tp cookies, no-op identical: {}, "
                           "metric increases under 50 random lists: {}",
                           tp_left, tp_cookies_left, identity ? "yes" : "no", increases);
  return out;
}

BlockerSpec heuristic_spec(int passes) {
  BlockerSpec b;
  b.id = "heuristic";
  b.heuristic = HeuristicBlockerState{};
  b.heuristic->threshold = 3;
  b.training_passes = passes;
  return b;
}

Outcome heuristic_criterion() {
  const auto& rules = t::bundled_rules();
  const auto& bare = default_corpus().runs;
  Outcome out;

  const auto untrained = simulate({heuristic_spec(0)}, {bare.front()}, rules).front();
  const auto before = run_totals(bare.front(), rules).browsing.tp_requests;
  const auto after = run_totals(untrained, rules).browsing.tp_requests;

  const auto once = train_heuristic(heuristic_spec(0), bare.front(), 1, rules);
  const auto twice = train_heuristic(heuristic_spec(0), bare.front(), 2, rules);
  const bool stable = !once.heuristic->blocked.empty() && once.heuristic->blocked == twice.heuristic->blocked;

  // Two trackers reading cookies on 4 and 3 distinct sites respectively.
  std::vector<SiteVisit> visits;
  for (int i = 0; i < 6; ++i) {
    std::vector<RequestRecord> extra;
    if (i < 4) extra.push_back(t::req("https://px.four.net/p.gif", 43, ResourceClass::Image, true, true));
    if (i >= 3) extra.push_back(t::req("https://px.three.org/p.gif", 43, ResourceClass::Image, true, true));
    visits.push_back(t::visit(fmt::format("site{}.com", i), std::move(extra)));
  }
  const auto hand = t::run("bare", 0, visits);
  const auto trained = train_heuristic(heuristic_spec(0), hand, 1, rules);
  const bool prevalence = trained.heuristic->blocked.contains("four.net") && !trained.heuristic->blocked.contains("three.org");

  out.pass = after < before && stable && prevalence;
  out.detail = fmt::format("untrained run tp requests {} -> {}, blocked set after 1 pass {} (stable: {}), "
                           "prevalence 4 blocked / 3 not: {}",
                           before, after, once.heuristic->blocked.size(), stable ? "yes" : "no",
                           prevalence ? "yes" : "no");
  return out;
}

Outcome stability_criterion() {
  const auto& rules = t::bundled_rules();
  int passing = 0;
  std::vector<std::string> failing;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    synth::EcosystemConfig c;
    c.seed = seed;
    const auto corpus = synth::generate(c, 10);
    const auto curve = stats::stability_curve(corpus.runs, Metric::TpRequests, 10, rules);
    bool decreasing = true;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      decreasing = decreasing && curve.points[i].median < curve.points[i - 1].median;
    }
    const double at10 = curve.points.back().median;
    worst = std::max(worst, at10);
    if (decreasing && at10 < 0.05) {
      ++passing;
    } else {
      failing.push_back(std::to_string(seed));
    }
  }
  Outcome out;
  out.pass = passing >= 19;
  out.detail = fmt::format("{}/20 seeds strictly decreasing with median RSE < 5% at n=10 (worst {:.4f}){}", passing,
                           worst, failing.empty() ? "" : fmt::format("; failing seeds {}", fmt::join(failing, ",")));
  return out;
}

// ---------------------------------------------------------------------------
// Footprint oracle

struct SmallWorld {
  std::vector<CrawlRun> runs;
  EntityMap map;
};

SmallWorld random_world(Rng& rng) {
  SmallWorld w;
  const auto n_sites = 1 + rng.below(10);
  const auto n_trackers = 1 + rng.below(15);
  const auto n_dns = 1 + rng.below(5);
  for (std::uint64_t j = 0; j < n_trackers; ++j) {
    const auto domain = fmt::format("t{}.net", j);
    if (rng.bernoulli(0.7)) w.map.adns[domain] = fmt::format("dns{}.com", rng.below(n_dns));
    if (rng.bernoulli(0.3)) w.map.cdn_domains.insert(domain);
  }
  const auto n_runs = 1 + rng.below(2);
  for (std::uint64_t r = 0; r < n_runs; ++r) {
    std::vector<SiteVisit> visits;
    for (std::uint64_t i = 0; i < n_sites; ++i) {
      if (i > 0 && rng.bernoulli(0.2)) continue;
      std::vector<RequestRecord> extra;
      for (std::uint64_t j = 0; j < n_trackers; ++j) {
        if (rng.bernoulli(0.3)) extra.push_back(t::req(fmt::format("https://s{}.t{}.net/x", rng.below(3), j)));
      }
      visits.push_back(t::visit(fmt::format("www.site{}.com", i), std::move(extra)));
    }
    w.runs.push_back(t::run("bare", static_cast<int>(r), std::move(visits)));
  }
  return w;
}

FootprintMetrics oracle_metrics(const SmallWorld& w, GroupingMethod method) {
  // Adjacency matrix over every entity name, filled straight from the URLs.
  std::vector<std::string> fps, tps;
  std::set<std::pair<std::string, std::string>> adj;
  for (const auto& run : w.runs) {
    for (const auto& v : run.visits) {
      const auto fp = v.site_host.substr(4);  // "www."
      fps.push_back(fp);
      for (const auto& r : v.requests) {
        const auto host = parse_url(r.url).host;
        if (host == v.site_host) continue;
        const auto domain = host.substr(host.find('.') + 1);
        std::string entity = domain;
        const bool cdn = w.map.cdn_domains.contains(domain);
        if (!(method == GroupingMethod::Root && cdn) && w.map.adns.contains(domain)) entity = w.map.adns.at(domain);
        tps.push_back(entity);
        adj.emplace(fp, entity);
      }
    }
  }
  std::sort(fps.begin(), fps.end());
  fps.erase(std::unique(fps.begin(), fps.end()), fps.end());
  std::sort(tps.begin(), tps.end());
  tps.erase(std::unique(tps.begin(), tps.end()), tps.end());

  FootprintMetrics m;
  m.n_third_parties = tps.size();
  if (!fps.empty()) m.mean_tp_per_fp = static_cast<double>(adj.size()) / static_cast<double>(fps.size());
  std::vector<std::pair<long, std::string>> order;  // (-degree, name)
  for (const auto& tp : tps) {
    long deg = 0;
    for (const auto& fp : fps) deg += adj.contains({fp, tp});
    order.emplace_back(-deg, tp);
  }
  std::sort(order.begin(), order.end());
  std::set<std::string> covered;
  for (std::size_t k = 0; k < order.size() && k < 10; ++k) {
    for (const auto& fp : fps) {
      if (adj.contains({fp, order[k].second})) covered.insert(fp);
    }
  }
  m.top10_fp_coverage = covered.size();
  return m;
}

Outcome footprint_criterion() {
  Rng rng(31);
  int mismatches = 0;
  for (int i = 0; i < 30; ++i) {
    const auto w = random_world(rng);
    for (auto method : {GroupingMethod::Adns, GroupingMethod::Root}) {
      const auto got = footprint_metrics(build_footprint(w.runs, t::bundled_rules(), w.map, method));
      const auto want = oracle_metrics(w, method);
      if (got.n_third_parties != want.n_third_parties || got.top10_fp_coverage != want.top10_fp_coverage ||
          std::abs(got.mean_tp_per_fp - want.mean_tp_per_fp) > 1e-12) {
        ++mismatches;
      }
    }
  }
  return {mismatches == 0, fmt::format("30 corpora x 2 methods, {} mismatches", mismatches)};
}

// ---------------------------------------------------------------------------
// Overlap oracle

Outcome overlap_criterion() {
  const auto& rules = t::bundled_rules();
  Rng rng(77);
  int mismatches = 0;
  for (int c = 0; c < 30; ++c) {
    const auto w = random_world(rng);
    std::set<std::string> present;
    for (const auto& run : w.runs) {
      for (const auto& v : run.visits) {
        for (const auto& r : v.requests) {
          if (r.host != v.site_host) present.insert(r.host.substr(r.host.find('.') + 1));
        }
      }
    }
    std::vector<BlockerSpec> roster;
    std::vector<std::set<std::string>> expected;
    for (int k = 0; k < 5; ++k) {
      std::string text;
      std::set<std::string> listed;
      for (int j = 0; j < 15; ++j) {
        if (!rng.bernoulli(0.35)) continue;
        const auto d = fmt::format("t{}.net", j);
        text += "||" + d + "^\n";
        if (present.contains(d)) listed.insert(d);
      }
      BlockerSpec b;
      b.id = fmt::format("tech{}", k);
      b.rule_lists.push_back(parse_rule_list(text).list);
      roster.push_back(std::move(b));
      expected.push_back(std::move(listed));
    }
    const auto protected_runs = simulate(roster, w.runs, rules);
    std::vector<BlockedSet> sets;
    for (const auto& b : roster) {
      sets.push_back(blocked_set(w.runs, select_config(protected_runs, b.id), BlockedKind::Domains, rules));
    }
    const auto m = overlap_matrix(sets);
    std::set<std::string> all;
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& id = roster[i].id;
      mismatches += sets[i].members != expected[i];
      all.insert(expected[i].begin(), expected[i].end());
      for (std::size_t j = 0; j < 5; ++j) {
        std::vector<std::string> common;
        std::set_intersection(expected[i].begin(), expected[i].end(), expected[j].begin(), expected[j].end(),
                              std::back_inserter(common));
        mismatches += m.pairwise.at({id, roster[j].id}) != common.size();
      }
      std::size_t only = 0;
      for (const auto& x : expected[i]) {
        bool elsewhere = false;
        for (std::size_t j = 0; j < 5; ++j) elsewhere = elsewhere || (j != i && expected[j].contains(x));
        only += !elsewhere;
      }
      mismatches += m.unique.at(id) != only;
    }
    // Inclusion-exclusion over all 31 non-empty subsets must give |union|.
    long total = 0;
    for (unsigned mask = 1; mask < 32; ++mask) {
      std::set<std::string> inter;
      bool first = true;
      for (unsigned i = 0; i < 5; ++i) {
        if (!(mask & (1u << i))) continue;
        if (first) {
          inter = sets[i].members;
          first = false;
        } else {
          std::erase_if(inter, [&](const std::string& x) { return !sets[i].members.contains(x); });
        }
      }
      total += (std::popcount(mask) % 2 ? 1 : -1) * static_cast<long>(inter.size());
    }
    mismatches += total != static_cast<long>(all.size());
  }
  return {mismatches == 0, fmt::format("30 configurations x 5 techniques, {} mismatches", mismatches)};
}

// ---------------------------------------------------------------------------

Outcome ranking_criterion() {
  const auto& rules = t::bundled_rules();
  const auto& bare = default_corpus().runs;
  const auto eco = synth::build_ecosystem({});
  std::vector<BlockerSpec> roster;
  for (int count : {10, 40, 150}) {
    BlockerSpec b;
    b.id = fmt::format("top{:03d}", count);
    b.rule_lists.push_back(parse_rule_list(synth::tracker_rule_list(eco, count, count == 150)).list);
    roster.push_back(b);
  }
  auto twin = roster[1];
  twin.id = "top040_copy";
  roster.push_back(twin);
  auto runs = simulate(roster, bare, rules, 4);
  runs.insert(runs.begin(), bare.begin(), bare.end());
  const auto table = build_metric_table(runs, rules);
  const auto r = stats::ks_rank(stats::per_site_values(table, Metric::TpRequests), 0.05, stats::Direction::LowerIsBetter);
  const auto& rk = r.rank;
  const bool nested = rk.at("top150") <= rk.at("top040") && rk.at("top040") <= rk.at("top010") &&
                      rk.at("top010") <= rk.at("bare") && rk.at("top150") < rk.at("bare");
  const bool twins = rk.at("top040") == rk.at("top040_copy");
  return {nested && twins, fmt::format("ranks bare {} top010 {} top040 {} top040_copy {} top150 {}", rk.at("bare"),
                                       rk.at("top010"), rk.at("top040"), rk.at("top040_copy"), rk.at("top150"))};
}

std::map<std::string, std::string> bundle_bytes(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::ifstream in(entry.path(), std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    files[entry.path().filename().string()] = s.str();
  }
  return files;
}

Outcome pipeline_criterion() {
  const auto start = Clock::now();
  const auto manifest = report::load_manifest(t::data_dir() + "/examples/manifest.json");
  const auto root = fs::temp_directory_path() / "privmeter_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  report::run_pipeline(manifest, (root / "first").string(), 4);
  const double one = seconds_since(start);
  report::run_pipeline(manifest, (root / "second").string(), 1);
  const double elapsed = seconds_since(start);
  const auto a = bundle_bytes(root / "first");
  const auto b = bundle_bytes(root / "second");
  fs::remove_all(root);
  const bool same = a == b && a.size() == 8;
  return {same && one < 300.0,
          fmt::format("{} files, byte-identical across runs and thread counts: {}, {:.1f}s per run", a.size(),
                      same ? "yes" : "no", elapsed / 2.0)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ks-statistic-and-pvalues", ks_criterion},
      {"psl-conformance", psl_criterion},
      {"blocker-semantics", blocker_criterion},
      {"heuristic-blocker", heuristic_criterion},
      {"run-count-stability", stability_criterion},
      {"footprint-oracle", footprint_criterion},
      {"overlap-oracle", overlap_criterion},
      {"ranking-consistency", ranking_criterion},
      {"pipeline-determinism", pipeline_criterion},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    fmt::print("{} {}: {}\n", o.pass ? "PASS" : "FAIL", name, o.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
