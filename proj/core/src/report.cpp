#include "privmeter/report.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "privmeter/blocker.hpp"
#include "privmeter/csv.hpp"
#include "privmeter/error.hpp"

namespace privmeter::report {

namespace fs = std::filesystem;

std::string_view toolkit_version() { return PRIVMETER_VERSION; }

double mean_total(const MetricTable& table, std::string_view config_id, Metric metric) {
  const auto totals = run_totals(table, config_id);
  if (totals.empty()) throw Error(fmt::format("no runs for config '{}'", config_id));
  double sum = 0.0;
  for (const auto& t : totals) sum += static_cast<double>(t.get(metric));
  return sum / static_cast<double>(totals.size());
}

std::vector<SyntheticIndex> synthetic_indices(const MetricTable& table, std::string_view bare_id,
                                              std::span<const Metric> protection, std::span<const Metric> quality) {
  const auto ids = table.config_ids();
  if (std::find(ids.begin(), ids.end(), bare_id) == ids.end()) {
    throw Error(fmt::format("synthetic_indices: bare config '{}' not in table", bare_id));
  }
  auto index = [&](std::string_view id, std::span<const Metric> metrics) {
    if (metrics.empty()) return 1.0;
    double sum = 0.0;
    for (auto metric : metrics) {
      const double bare = mean_total(table, bare_id, metric);
      if (bare == 0.0) {
        throw Error(fmt::format("synthetic_indices: bare total of '{}' is zero", metric_name(metric)));
      }
      sum += mean_total(table, id, metric) / bare;
    }
    return sum / static_cast<double>(metrics.size());
  };
  std::vector<SyntheticIndex> out;
  for (const auto& id : ids) out.push_back({id, index(id, protection), index(id, quality)});
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::string resolve(const ExperimentManifest& m, const std::string& path) {
  if (path.empty()) return path;
  const fs::path p(path);
  return p.is_relative() && !m.base_dir.empty() ? (fs::path(m.base_dir) / p).string() : path;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace

ExperimentManifest parse_manifest(std::string_view json_text, const std::string& base_dir) {
  ExperimentManifest m;
  m.base_dir = base_dir;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("manifest: {}", e.what()));
  }
  try {
    if (!j.contains("blockers")) throw Error("manifest: missing field 'blockers'");
    m.blockers = j.at("blockers").get<std::string>();
    m.bare_log = j.value("bare_log", std::string());
    if (auto it = j.find("synth"); it != j.end()) m.synth = synth::parse_config(it->dump());
    if (m.bare_log.empty() && !m.synth) throw Error("manifest: missing field 'bare_log' (or 'synth')");
    if (!m.bare_log.empty() && m.synth) throw Error("manifest: 'bare_log' and 'synth' are exclusive");
    m.runs = j.value("runs", m.runs);
    if (m.runs < 1) throw Error("manifest: field 'runs' must be positive");
    m.bare_id = j.value("bare_id", m.bare_id);
    m.alpha = j.value("alpha", m.alpha);
    if (!(m.alpha > 0.0 && m.alpha < 1.0)) throw Error("manifest: field 'alpha' must lie in (0, 1)");
    if (auto it = j.find("metrics"); it != j.end()) {
      m.metrics.clear();
      for (const auto& name : *it) m.metrics.push_back(parse_metric(name.get<std::string>()));
    }
    if (auto it = j.find("seed"); it != j.end()) m.seed = it->get<std::uint64_t>();
    m.psl = j.value("psl", std::string());
    m.adns = j.value("adns", std::string());
    m.cdn = j.value("cdn", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("manifest: {}", e.what()));
  }
  return m;
}

ExperimentManifest load_manifest(const std::string& path) {
  return parse_manifest(read_bytes(path), fs::path(path).parent_path().string());
}

std::string canonical_manifest(const ExperimentManifest& m) {
  nlohmann::ordered_json j;
  j["toolkit_version"] = toolkit_version();
  if (!m.bare_log.empty()) j["bare_log"] = m.bare_log;
  if (m.synth) {
    j["synth"] = nlohmann::ordered_json::parse(synth::dump_config(*m.synth));
    j["runs"] = m.runs;
  }
  j["blockers"] = m.blockers;
  j["bare_id"] = m.bare_id;
  j["alpha"] = m.alpha;
  auto metrics = nlohmann::ordered_json::array();
  for (auto metric : m.metrics) metrics.push_back(metric_name(metric));
  j["metrics"] = metrics;
  if (m.seed) j["seed"] = *m.seed;
  if (!m.psl.empty()) j["psl"] = m.psl;
  if (!m.adns.empty()) j["adns"] = m.adns;
  if (!m.cdn.empty()) j["cdn"] = m.cdn;
  return j.dump(2) + "\n";
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string manifest_hash(const ExperimentManifest& m) {
  std::string material = canonical_manifest(m);
  for (const auto* path : {&m.bare_log, &m.blockers, &m.psl, &m.adns, &m.cdn}) {
    if (path->empty()) continue;
    material += "\n--" + *path + "\n" + sha256_hex(read_bytes(resolve(m, *path)));
  }
  // Rule lists are referenced from the roster, so fold them in as well.
  if (!m.blockers.empty()) {
    for (const auto& spec : load_roster(resolve(m, m.blockers))) {
      for (const auto& list : spec.rule_lists) {
        material += "\n--list " + spec.id + "/" + list.name;
        for (const auto& p : list.block_rules.patterns()) material += "\nb" + std::to_string(static_cast<int>(p.kind)) + p.value;
        for (const auto& p : list.exception_rules.patterns()) material += "\ne" + std::to_string(static_cast<int>(p.kind)) + p.value;
      }
    }
  }
  return sha256_hex(material);
}

// ---------------------------------------------------------------------------
// Writers

namespace {

void comments_out(std::ostream& out, const std::vector<std::string>& comments) {
  for (const auto& c : comments) csv::write_comment(out, c);
}

}  // namespace

void write_rank_csv(std::ostream& out, const std::vector<std::pair<Metric, stats::RankAssignment>>& ranks,
                    const std::vector<std::string>& comments) {
  comments_out(out, comments);
  csv::write_row(out, {"metric", "config_id", "mean", "std", "rank"});
  for (const auto& [metric, r] : ranks) {
    for (const auto& group : r.groups) {
      for (const auto& id : group) {
        csv::write_row(out, {std::string(metric_name(metric)), id, csv::format_real(r.mean.at(id)),
                             csv::format_real(r.stddev.at(id)), std::to_string(r.rank.at(id))});
      }
    }
  }
}

void write_pvalue_matrix(std::ostream& out, const stats::PairwiseKs& pairwise, const std::vector<std::string>& comments) {
  comments_out(out, comments);
  csv::Row header{"config_id"};
  header.insert(header.end(), pairwise.ids.begin(), pairwise.ids.end());
  csv::write_row(out, header);
  for (std::size_t i = 0; i < pairwise.ids.size(); ++i) {
    csv::Row row{pairwise.ids[i]};
    for (double p : pairwise.p[i]) row.push_back(csv::format_real(p));
    csv::write_row(out, row);
  }
}

void write_indices_csv(std::ostream& out, const std::vector<SyntheticIndex>& indices,
                       const std::vector<std::string>& comments) {
  comments_out(out, comments);
  csv::write_row(out, {"config_id", "protection_index", "quality_index"});
  for (const auto& idx : indices) {
    csv::write_row(out, {idx.config_id, csv::format_real(idx.protection_index), csv::format_real(idx.quality_index)});
  }
}

void write_overlap_csv(std::ostream& out, const std::vector<std::pair<BlockedKind, std::vector<OverlapCell>>>& tables,
                       const std::vector<std::string>& comments) {
  comments_out(out, comments);
  csv::write_row(out, {"kind", "row", "col", "value", "side_length"});
  for (const auto& [kind, cells] : tables) {
    for (const auto& c : cells) {
      csv::write_row(out, {std::string(to_string(kind)), c.row, c.col, std::to_string(c.value),
                           csv::format_real(c.side_length)});
    }
  }
}

void write_footprint_csv(std::ostream& out, const std::vector<FootprintRow>& rows,
                         const std::vector<std::string>& comments) {
  comments_out(out, comments);
  csv::write_row(out, {"config_id", "method", "run", "n_third_parties", "mean_tp_per_fp", "top10_fp_coverage",
                       "adns_fallback_rate"});
  for (const auto& r : rows) {
    csv::write_row(out, {r.config_id, std::string(to_string(r.method)), r.run, std::to_string(r.metrics.n_third_parties),
                         csv::format_real(r.metrics.mean_tp_per_fp), std::to_string(r.metrics.top10_fp_coverage),
                         csv::format_real(r.fallback_rate)});
  }
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

bool is_quality(Metric metric) {
  return std::find(kQualityMetrics.begin(), kQualityMetrics.end(), metric) != kQualityMetrics.end();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out.flush()) throw Error("write failed for '" + path.string() + "'");
}

struct Inputs {
  SuffixRules rules;
  std::vector<CrawlRun> bare;
  EntityMap entities;
};

}  // namespace

ReportBundle run_pipeline(const ExperimentManifest& manifest, const std::string& out_dir, unsigned jobs) {
  const fs::path target(out_dir);
  if (fs::exists(target) && !(fs::is_directory(target) && (fs::is_empty(target) || fs::exists(target / "manifest.json")))) {
    throw PipelineError("output", fmt::format("'{}' exists and is not a report bundle", out_dir));
  }
  const auto hash = stage("manifest", [&] { return manifest_hash(manifest); });
  const std::vector<std::string> header{fmt::format("privmeter {}", toolkit_version()),
                                        fmt::format("manifest_sha256: {}", hash)};

  fs::path tmp = target;
  tmp += ".partial";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  ReportBundle bundle;
  bundle.directory = target.string();
  bundle.hash = hash;
  try {
    auto inputs = stage(manifest.synth ? "synth" : "ingest", [&] {
      Inputs in;
      in.rules = manifest.psl.empty() ? SuffixRules::load(default_psl_path())
                                      : SuffixRules::load(resolve(manifest, manifest.psl));
      if (manifest.synth) {
        auto config = *manifest.synth;
        if (manifest.seed) config.seed = *manifest.seed;
        auto corpus = synth::generate(config, manifest.runs);
        in.bare = std::move(corpus.runs);
        for (auto& run : in.bare) run.config_id = manifest.bare_id;
        in.entities = synth::entity_map(synth::build_ecosystem(config));
      } else {
        in.bare = select_config(read_crawl_log(resolve(manifest, manifest.bare_log)), manifest.bare_id);
        if (in.bare.empty()) throw Error(fmt::format("no runs with config_id '{}'", manifest.bare_id));
      }
      if (!manifest.adns.empty() || !manifest.cdn.empty()) {
        in.entities = EntityMap::load(resolve(manifest, manifest.adns), resolve(manifest, manifest.cdn));
      }
      return in;
    });

    const auto roster = stage("simulate", [&] { return load_roster(resolve(manifest, manifest.blockers)); });
    auto protected_runs = stage("simulate", [&] { return simulate(roster, inputs.bare, inputs.rules, jobs); });

    std::vector<CrawlRun> all = inputs.bare;
    all.insert(all.end(), protected_runs.begin(), protected_runs.end());
    const auto table = stage("metrics", [&] {
      auto t = build_metric_table(all, inputs.rules);
      std::ostringstream out;
      write_metric_csv(t, out, header);
      write_file(tmp / "metrics.csv", out.str());
      return t;
    });
    bundle.report_files.push_back("metrics.csv");

    std::vector<std::pair<Metric, stats::RankAssignment>> ranks;
    stage("rank", [&] {
      std::ostringstream pv;
      comments_out(pv, header);
      csv::write_row(pv, {"metric", "config_a", "config_b", "d_statistic", "p_value"});
      for (auto metric : manifest.metrics) {
        const auto values = metric == Metric::Cookies ? stats::per_run_values(table, metric)
                                                      : stats::per_site_values(table, metric);
        if (values.size() < 2) continue;
        const auto direction = is_quality(metric) ? stats::Direction::HigherIsBetter : stats::Direction::LowerIsBetter;
        ranks.emplace_back(metric, stats::ks_rank(values, manifest.alpha, direction));
        const auto pairwise = stats::pairwise_ks(values);
        for (std::size_t i = 0; i < pairwise.ids.size(); ++i) {
          for (std::size_t j = i + 1; j < pairwise.ids.size(); ++j) {
            csv::write_row(pv, {std::string(metric_name(metric)), pairwise.ids[i], pairwise.ids[j],
                                csv::format_real(pairwise.d[i][j]), csv::format_real(pairwise.p[i][j])});
          }
        }
      }
      std::ostringstream rk;
      write_rank_csv(rk, ranks, header);
      write_file(tmp / "ranks.csv", rk.str());
      write_file(tmp / "pvalues.csv", pv.str());
    });
    bundle.report_files.push_back("ranks.csv");
    bundle.report_files.push_back("pvalues.csv");

    std::vector<FootprintRow> footprints;
    stage("footprint", [&] {
      for (const auto& id : config_ids(all)) {
        const auto runs = select_config(all, id);
        for (auto method : {GroupingMethod::Adns, GroupingMethod::Root}) {
          for (const auto& run : runs) {
            const auto g = build_footprint({run}, inputs.rules, inputs.entities, method);
            footprints.push_back({id, method, std::to_string(run.run_index), footprint_metrics(g),
                                  g.coverage.fallback_rate()});
          }
          const auto g = build_footprint(runs, inputs.rules, inputs.entities, method);
          footprints.push_back({id, method, "all", footprint_metrics(g), g.coverage.fallback_rate()});
        }
      }
      std::ostringstream out;
      write_footprint_csv(out, footprints, header);
      write_file(tmp / "footprint.csv", out.str());
    });
    bundle.report_files.push_back("footprint.csv");

    stage("overlap", [&] {
      std::vector<std::pair<BlockedKind, std::vector<OverlapCell>>> tables;
      const auto blockers = config_ids(protected_runs);
      if (blockers.size() >= 2) {
        for (auto kind : {BlockedKind::Requests, BlockedKind::Domains}) {
          std::vector<BlockedSet> sets;
          for (const auto& id : blockers) sets.push_back(blocked_set(inputs.bare, select_config(protected_runs, id), kind, inputs.rules));
          tables.emplace_back(kind, render_overlap_data(overlap_matrix(sets)));
        }
      }
      std::ostringstream out;
      write_overlap_csv(out, tables, header);
      write_file(tmp / "overlap.csv", out.str());
    });
    bundle.report_files.push_back("overlap.csv");

    const auto indices = stage("indices", [&] {
      auto idx = synthetic_indices(table, manifest.bare_id);
      std::ostringstream out;
      write_indices_csv(out, idx, header);
      write_file(tmp / "indices.csv", out.str());
      return idx;
    });
    bundle.report_files.push_back("indices.csv");

    stage("summary", [&] {
      std::ostringstream s;
      for (const auto& h : header) s << "# " << h << '\n';
      s << fmt::format("bare runs: {} ({} sites in the first run)\n", inputs.bare.size(),
                       inputs.bare.empty() ? 0 : inputs.bare.front().visits.size());
      s << fmt::format("blockers: {}\n", roster.size());
      s << fmt::format("alpha: {}\n\n", csv::format_real(manifest.alpha));
      for (const auto& [metric, r] : ranks) {
        s << fmt::format("KS ranking on {}{}:\n", metric_name(metric), metric == Metric::Cookies ? " (run totals)" : "");
        for (const auto& group : r.groups) {
          for (const auto& id : group) {
            s << fmt::format("  {:>2}  {:<32} mean {:>12}\n", r.rank.at(id), id, csv::format_real(r.mean.at(id)));
          }
        }
        s << '\n';
      }
      s << "synthetic indices (1 = unprotected browser):\n";
      for (const auto& idx : indices) {
        s << fmt::format("  {:<32} protection {:>8.4f}  quality {:>8.4f}\n", idx.config_id, idx.protection_index,
                         idx.quality_index);
      }
      s << "\nprivacy footprint over all runs:\n";
      for (const auto& f : footprints) {
        if (f.run != "all") continue;
        s << fmt::format("  {:<32} {:<5} third parties {:>5}  per first party {:>8.3f}  top-10 coverage {:>5}\n",
                         f.config_id, to_string(f.method), f.metrics.n_third_parties, f.metrics.mean_tp_per_fp,
                         f.metrics.top10_fp_coverage);
      }
      write_file(tmp / "summary.txt", s.str());
      write_file(tmp / "manifest.json", canonical_manifest(manifest));
    });
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }

  fs::remove_all(target);
  fs::rename(tmp, target);
  return bundle;
}

}  // namespace privmeter::report
