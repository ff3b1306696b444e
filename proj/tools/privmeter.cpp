// privmeter: command-line front end for the measurement toolkit.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "privmeter/blocker.hpp"
#include "privmeter/crawl.hpp"
#include "privmeter/csv.hpp"
#include "privmeter/error.hpp"
#include "privmeter/footprint.hpp"
#include "privmeter/metrics.hpp"
#include "privmeter/overlap.hpp"
#include "privmeter/psl.hpp"
#include "privmeter/report.hpp"
#include "privmeter/stats.hpp"
#include "privmeter/synth.hpp"

namespace fs = std::filesystem;
using namespace privmeter;

namespace {

struct Globals {
  std::string psl;
  std::optional<std::uint64_t> seed;
  double alpha = 0.05;
  unsigned jobs = 0;

  SuffixRules rules() const { return SuffixRules::load(psl.empty() ? default_psl_path() : psl); }
  unsigned threads() const { return jobs > 0 ? jobs : std::max(1u, std::thread::hardware_concurrency()); }
};

// Writes to `path`, or stdout for "" and "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw Error("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<std::string> tool_comments() { return {fmt::format("privmeter {}", report::toolkit_version())}; }

void cmd_synth(const Globals& g, const std::string& config_path, int runs, const std::string& out,
               const std::string& entity_dir, int list_size) {
  auto config = config_path.empty() ? synth::EcosystemConfig{} : synth::load_config(config_path);
  if (g.seed) config.seed = *g.seed;
  config.validate();
  const auto corpus = synth::generate(config, runs);
  Output o(out);
  write_crawl_log(corpus.runs, o.stream());
  if (!entity_dir.empty()) {
    fs::create_directories(entity_dir);
    const auto eco = synth::build_ecosystem(config);
    const auto map = synth::entity_map(eco);
    std::ofstream adns(fs::path(entity_dir) / "adns.csv");
    csv::write_row(adns, {"domain", "adns_domain"});
    for (const auto& [domain, ns] : map.adns) csv::write_row(adns, {domain, ns});
    std::ofstream cdn(fs::path(entity_dir) / "cdn.csv");
    csv::write_row(cdn, {"domain"});
    for (const auto& domain : map.cdn_domains) csv::write_row(cdn, {domain});
    std::ofstream list(fs::path(entity_dir) / "trackers.txt");
    list << synth::tracker_rule_list(eco, list_size, true);
  }
}

void cmd_ingest(const std::string& in, const std::string& out) {
  const auto runs = read_crawl_log(in);
  for (const auto& id : config_ids(runs)) {
    const auto selected = select_config(runs, id);
    std::size_t visits = 0;
    std::size_t requests = 0;
    for (const auto& run : selected) {
      visits += run.visits.size();
      for (const auto& v : run.visits) requests += v.requests.size();
    }
    std::cerr << fmt::format("{}: {} runs, {} visits, {} requests\n", id, selected.size(), visits, requests);
  }
  if (!out.empty()) {
    Output o(out);
    write_crawl_log(runs, o.stream());
  }
}

void cmd_simulate(const Globals& g, const std::string& bare_path, const std::string& bare_id,
                  const std::string& roster_path, const std::string& out) {
  const auto rules = g.rules();
  const auto bare = select_config(read_crawl_log(bare_path), bare_id);
  if (bare.empty()) throw Error(fmt::format("no runs with config_id '{}' in '{}'", bare_id, bare_path));
  const auto roster = load_roster(roster_path);
  auto all = bare;
  auto simulated = simulate(roster, bare, rules, g.threads());
  all.insert(all.end(), simulated.begin(), simulated.end());
  Output o(out);
  write_crawl_log(all, o.stream());
}

void cmd_metrics(const Globals& g, const std::string& in, const std::string& out, const std::string& format) {
  const auto table = build_metric_table(read_crawl_log(in), g.rules());
  Output o(out);
  if (format == "jsonl") {
    write_metric_jsonl(table, o.stream());
  } else {
    write_metric_csv(table, o.stream(), tool_comments());
  }
}

stats::PValueMethod parse_pvalue_method(const std::string& name) {
  if (name == "asymptotic") return stats::PValueMethod::Asymptotic;
  if (name == "permutation") return stats::PValueMethod::Permutation;
  return stats::PValueMethod::Auto;
}

void cmd_rank(const Globals& g, const std::string& in, const std::vector<std::string>& metric_names,
              const std::string& out, const std::string& pvalues_out, bool per_run, bool complete_linkage,
              const std::string& method_name, bool higher_is_better) {
  const auto table = read_metric_csv(in);
  const auto method = parse_pvalue_method(method_name);
  std::vector<std::pair<Metric, stats::RankAssignment>> ranks;
  std::optional<stats::PairwiseKs> last_pairwise;
  for (const auto& name : metric_names) {
    const auto metric = parse_metric(name);
    const auto values = per_run || metric == Metric::Cookies ? stats::per_run_values(table, metric)
                                                             : stats::per_site_values(table, metric);
    const auto direction = higher_is_better ? stats::Direction::HigherIsBetter : stats::Direction::LowerIsBetter;
    const auto grouping = complete_linkage ? stats::Grouping::CompleteLinkage : stats::Grouping::Anchor;
    ranks.emplace_back(metric, stats::ks_rank(values, g.alpha, direction, grouping, method));
    last_pairwise = stats::pairwise_ks(values, method);
  }
  Output o(out);
  report::write_rank_csv(o.stream(), ranks, tool_comments());
  if (!pvalues_out.empty() && last_pairwise) {
    Output p(pvalues_out);
    report::write_pvalue_matrix(p.stream(), *last_pairwise, tool_comments());
  }
}

void cmd_stability(const Globals& g, const std::string& in, const std::string& config_id, const std::string& metric,
                   int max_n, const std::string& out) {
  const auto runs = select_config(read_crawl_log(in), config_id);
  const auto curve = stats::stability_curve(runs, parse_metric(metric), max_n, g.rules());
  Output o(out);
  auto comments = tool_comments();
  comments.push_back(fmt::format("metric: {}; excluded sites: {}", metric, curve.excluded_sites));
  for (const auto& c : comments) csv::write_comment(o.stream(), c);
  csv::write_row(o.stream(), {"n", "median_rse", "p05_rse", "p95_rse", "sites"});
  for (const auto& p : curve.points) {
    csv::write_row(o.stream(), {std::to_string(p.n), csv::format_real(p.median), csv::format_real(p.p05),
                                csv::format_real(p.p95), std::to_string(p.sites)});
  }
}

void cmd_footprint(const Globals& g, const std::string& in, const std::string& config_id, const std::string& method,
                   const std::string& adns, const std::string& cdn, const std::string& out) {
  const auto runs = select_config(read_crawl_log(in), config_id);
  if (runs.empty()) throw Error(fmt::format("no runs with config_id '{}'", config_id));
  const auto graph = build_footprint(runs, g.rules(), EntityMap::load(adns, cdn), parse_grouping_method(method));
  const auto m = footprint_metrics(graph);
  Output o(out);
  write_edge_list(graph, o.stream(), tool_comments());
  std::cerr << fmt::format("third parties {}  mean per first party {:.3f}  top-10 coverage {}  ADNS fallback {:.3f}\n",
                           m.n_third_parties, m.mean_tp_per_fp, m.top10_fp_coverage, graph.coverage.fallback_rate());
}

void cmd_overlap(const Globals& g, const std::string& bare_path, const std::string& bare_id,
                 const std::vector<std::string>& protected_paths, const std::string& kind_name,
                 const std::string& out) {
  const auto rules = g.rules();
  const auto bare = select_config(read_crawl_log(bare_path), bare_id);
  if (bare.empty()) throw Error(fmt::format("no runs with config_id '{}' in '{}'", bare_id, bare_path));
  const auto kind = parse_blocked_kind(kind_name);
  std::vector<BlockedSet> sets;
  for (const auto& path : protected_paths) {
    const auto runs = read_crawl_log(path);
    for (const auto& id : config_ids(runs)) {
      if (id == bare_id) continue;
      sets.push_back(blocked_set(bare, select_config(runs, id), kind, rules));
    }
  }
  const auto matrix = overlap_matrix(sets);
  Output o(out);
  report::write_overlap_csv(o.stream(), {{kind, render_overlap_data(matrix)}}, tool_comments());
}

void cmd_report(const Globals& g, const std::string& manifest_path, const std::string& out) {
  auto manifest = report::load_manifest(manifest_path);
  if (g.seed) manifest.seed = g.seed;
  if (!g.psl.empty()) manifest.psl = fs::absolute(g.psl).string();
  const auto bundle = report::run_pipeline(manifest, out, g.threads());
  std::cout << fmt::format("{}\nmanifest sha256 {}\n", bundle.directory, bundle.hash);
  for (const auto& f : bundle.report_files) std::cout << "  " << f << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privmeter: measure privacy protection techniques from crawl logs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(report::toolkit_version()));

  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--psl", g.psl, "Public suffix list (default: bundled snapshot)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for synthetic corpora");
  app.add_option("--alpha", g.alpha, "KS significance level")->check(CLI::Range(0.0, 1.0));
  app.add_option("--jobs", g.jobs, "Worker threads (default: hardware concurrency)");

  std::string in, out, bare, roster, config, entity_dir, bare_id = "bare", format = "csv";
  int runs = 10;
  int list_size = 40;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic bare crawl corpus");
  synth->add_option("--config", config, "Ecosystem config (JSON)");
  synth->add_option("--runs", runs, "Number of runs")->check(CLI::PositiveNumber);
  synth->add_option("--out", out, "Crawl log to write (default stdout)");
  synth->add_option("--entities", entity_dir, "Also write adns.csv, cdn.csv and trackers.txt here");
  synth->add_option("--list-size", list_size, "Trackers in the generated rule list");

  auto* ingest = app.add_subcommand("ingest", "Validate a crawl log and print a summary");
  ingest->add_option("--in", in, "Crawl log")->required();
  ingest->add_flag("--validate", "Only validate (the default behaviour)");
  ingest->add_option("--out", out, "Rewrite the log in canonical form");

  auto* sim = app.add_subcommand("simulate", "Apply a blocker roster to bare runs");
  sim->add_option("--bare", bare, "Crawl log holding the bare runs")->required();
  sim->add_option("--bare-id", bare_id, "Config id of the bare runs");
  sim->add_option("--blockers", roster, "Blocker roster (JSON lines)")->required();
  sim->add_option("--out", out, "Crawl log to write: bare plus simulated runs");

  auto* metrics = app.add_subcommand("metrics", "Compute per-site and per-run metrics");
  metrics->add_option("--in", in, "Crawl log")->required();
  metrics->add_option("--out", out, "Output file (default stdout)");
  metrics->add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));

  std::vector<std::string> metric_names{"tp_requests"};
  std::string pvalues, method = "asymptotic";
  bool per_run = false, complete = false, higher = false;
  auto* rank = app.add_subcommand("rank", "KS-rank configurations on one or more metrics");
  rank->add_option("--metrics", in, "Metric CSV from `metrics`")->required();
  rank->add_option("--metric", metric_names, "Metric name(s)");
  rank->add_option("--out", out, "Rank CSV (default stdout)");
  rank->add_option("--pvalues", pvalues, "Pairwise p-value matrix for the last metric");
  rank->add_flag("--per-run", per_run, "Compare run totals instead of per-site values");
  rank->add_flag("--complete-linkage", complete, "Group only configs indistinguishable from every member");
  rank->add_flag("--higher-is-better", higher, "Rank larger values first");
  rank->add_option("--pvalue-method", method, "asymptotic, permutation or auto")
      ->check(CLI::IsMember({"asymptotic", "permutation", "auto"}));

  std::string stab_metric = "tp_requests";
  int max_n = 10;
  auto* stability = app.add_subcommand("stability", "Relative standard error against number of runs");
  stability->add_option("--in", in, "Crawl log")->required();
  stability->add_option("--config", bare_id, "Config id to analyse");
  stability->add_option("--metric", stab_metric, "Metric name");
  stability->add_option("--max-n", max_n, "Largest number of runs")->check(CLI::Range(2, 1000));
  stability->add_option("--out", out, "Output CSV (default stdout)");

  std::string fp_method = "adns", adns, cdn;
  auto* footprint = app.add_subcommand("footprint", "Build the first-party/third-party graph");
  footprint->add_option("--in", in, "Crawl log")->required();
  footprint->add_option("--config", bare_id, "Config id to analyse");
  footprint->add_option("--method", fp_method, "identity, adns or root")
      ->check(CLI::IsMember({"identity", "adns", "root"}));
  footprint->add_option("--adns", adns, "CSV domain,adns_domain");
  footprint->add_option("--cdn", cdn, "CSV of CDN-hosted domains");
  footprint->add_option("--out", out, "Edge list CSV (default stdout)");

  std::vector<std::string> protected_paths;
  std::string kind = "domains";
  auto* overlap = app.add_subcommand("overlap", "Overlap of what techniques block");
  overlap->add_option("--bare", bare, "Crawl log holding the bare runs")->required();
  overlap->add_option("--bare-id", bare_id, "Config id of the bare runs");
  overlap->add_option("--protected", protected_paths, "Crawl logs of protected runs")->required();
  overlap->add_option("--kind", kind, "requests or domains")->check(CLI::IsMember({"requests", "domains"}));
  overlap->add_option("--out", out, "Output CSV (default stdout)");

  std::string manifest;
  auto* rep = app.add_subcommand("report", "Run the whole pipeline from a manifest");
  rep->add_option("--manifest", manifest, "Experiment manifest (JSON)")->required();
  rep->add_option("--out", out, "Report directory")->required();

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed;

  try {
    if (*synth) cmd_synth(g, config, runs, out, entity_dir, list_size);
    else if (*ingest) cmd_ingest(in, out);
    else if (*sim) cmd_simulate(g, bare, bare_id, roster, out);
    else if (*metrics) cmd_metrics(g, in, out, format);
    else if (*rank) cmd_rank(g, in, metric_names, out, pvalues, per_run, complete, method, higher);
    else if (*stability) cmd_stability(g, in, bare_id, stab_metric, max_n, out);
    else if (*footprint) cmd_footprint(g, in, bare_id, fp_method, adns, cdn, out);
    else if (*overlap) cmd_overlap(g, bare, bare_id, protected_paths, kind, out);
    else if (*rep) cmd_report(g, manifest, out);
  } catch (const report::PipelineError& e) {
    std::cerr << "privmeter: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "privmeter: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
