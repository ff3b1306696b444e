#include "privmeter/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "privmeter/csv.hpp"
#include "privmeter/error.hpp"

namespace privmeter {

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::FpRequests: return "fp_requests";
    case Metric::TpRequests: return "tp_requests";
    case Metric::TpDomains: return "tp_domains";
    case Metric::Cookies: return "cookies";
    case Metric::BytesTotal: return "bytes_total";
    case Metric::HtmlBytes: return "html_bytes";
    case Metric::NImages: return "n_images";
    case Metric::NScripts: return "n_scripts";
    case Metric::ImageBytes: return "image_bytes";
    case Metric::ScriptBytes: return "script_bytes";
  }
  return "";
}

Metric parse_metric(std::string_view name) {
  for (auto m : kAllMetrics) {
    if (metric_name(m) == name) return m;
  }
  throw Error(fmt::format("unknown metric '{}'", name));
}

bool is_unstable(Metric metric) { return metric == Metric::BytesTotal; }

std::int64_t PageMetrics::get(Metric metric) const {
  switch (metric) {
    case Metric::FpRequests: return browsing.fp_requests;
    case Metric::TpRequests: return browsing.tp_requests;
    case Metric::TpDomains: return browsing.tp_domains;
    case Metric::Cookies: return browsing.cookies;
    case Metric::BytesTotal: return browsing.bytes_total;
    case Metric::HtmlBytes: return html.html_bytes;
    case Metric::NImages: return html.n_images;
    case Metric::NScripts: return html.n_scripts;
    case Metric::ImageBytes: return html.image_bytes;
    case Metric::ScriptBytes: return html.script_bytes;
  }
  return 0;
}

namespace {

std::int64_t& field(PageMetrics& m, Metric metric) {
  switch (metric) {
    case Metric::FpRequests: return m.browsing.fp_requests;
    case Metric::TpRequests: return m.browsing.tp_requests;
    case Metric::TpDomains: return m.browsing.tp_domains;
    case Metric::Cookies: return m.browsing.cookies;
    case Metric::BytesTotal: return m.browsing.bytes_total;
    case Metric::HtmlBytes: return m.html.html_bytes;
    case Metric::NImages: return m.html.n_images;
    case Metric::NScripts: return m.html.n_scripts;
    case Metric::ImageBytes: return m.html.image_bytes;
    case Metric::ScriptBytes: return m.html.script_bytes;
  }
  throw Error("unreachable metric");
}

// Adds request-level metrics of one visit; third-party domains go to `tp`.
PageMetrics accumulate(const SiteVisit& visit, const SuffixRules& rules, std::set<std::string>& tp) {
  PageMetrics m;
  const auto site_entity = entity_of(visit.site_host, rules);
  for (const auto& req : visit.requests) {
    auto domain = entity_of(req.host, rules);
    if (domain == site_entity) {
      ++m.browsing.fp_requests;
    } else {
      ++m.browsing.tp_requests;
      tp.insert(std::move(domain));
    }
    m.browsing.bytes_total += req.bytes;
  }
  m.html.html_bytes = visit.html.doc_bytes;
  m.html.n_images = static_cast<std::int64_t>(visit.html.image_refs.size());
  m.html.n_scripts = static_cast<std::int64_t>(visit.html.script_refs.size());
  for (const auto& ref : visit.html.image_refs) m.html.image_bytes += ref.bytes;
  for (const auto& ref : visit.html.script_refs) m.html.script_bytes += ref.bytes;
  return m;
}

}  // namespace

PageMetrics visit_metrics(const SiteVisit& visit, const SuffixRules& rules) {
  std::set<std::string> tp;
  auto m = accumulate(visit, rules, tp);
  m.browsing.tp_domains = static_cast<std::int64_t>(tp.size());
  return m;
}

PageMetrics run_totals(const CrawlRun& run, const SuffixRules& rules) {
  PageMetrics total;
  std::set<std::string> tp;
  for (const auto& visit : run.visits) {
    const auto m = accumulate(visit, rules, tp);
    for (auto metric : kAllMetrics) field(total, metric) += m.get(metric);
  }
  total.browsing.tp_domains = static_cast<std::int64_t>(tp.size());
  total.browsing.cookies = static_cast<std::int64_t>(run.cookie_jar.size());
  return total;
}

std::vector<std::string> MetricTable::config_ids() const {
  std::vector<std::string> ids;
  for (const auto& row : runs) {
    if (std::find(ids.begin(), ids.end(), row.config_id) == ids.end()) ids.push_back(row.config_id);
  }
  return ids;
}

MetricTable build_metric_table(const std::vector<CrawlRun>& runs, const SuffixRules& rules) {
  MetricTable table;
  for (const auto& run : runs) {
    std::set<std::string> seen;
    for (const auto& visit : run.visits) {
      if (!seen.insert(visit.site).second) {
        throw Error(fmt::format("run {}/{} visits '{}' more than once", run.config_id, run.run_index, visit.site));
      }
      table.sites.push_back({run.config_id, run.run_index, visit.site, visit_metrics(visit, rules)});
    }
    table.runs.push_back({run.config_id, run.run_index, run_totals(run, rules)});
  }
  return table;
}

std::map<std::string, SiteMean> per_site_means(const MetricTable& table, std::string_view config_id) {
  std::map<std::string, SiteMean> means;
  bool any_run = false;
  for (const auto& row : table.runs) any_run = any_run || row.config_id == config_id;
  if (!any_run) throw Error(fmt::format("no runs for config '{}'", config_id));
  for (const auto& row : table.sites) {
    if (row.config_id != config_id) continue;
    auto& m = means[row.site];
    ++m.coverage;
    for (auto metric : kAllMetrics) {
      if (metric == Metric::Cookies) continue;
      m.mean[static_cast<std::size_t>(metric)] += static_cast<double>(row.metrics.get(metric));
    }
  }
  for (auto& [site, m] : means) {
    for (auto& v : m.mean) v /= m.coverage;
  }
  return means;
}

std::map<std::string, SiteMean> per_site_means(const std::vector<CrawlRun>& runs, const SuffixRules& rules) {
  if (runs.empty()) throw Error("per_site_means: no runs");
  for (const auto& run : runs) {
    if (run.config_id != runs.front().config_id) {
      throw Error(fmt::format("per_site_means: mixed configs '{}' and '{}'", runs.front().config_id, run.config_id));
    }
  }
  return per_site_means(build_metric_table(runs, rules), runs.front().config_id);
}

std::vector<PageMetrics> run_totals(const MetricTable& table, std::string_view config_id) {
  std::vector<const RunRow*> rows;
  for (const auto& row : table.runs) {
    if (row.config_id == config_id) rows.push_back(&row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->run_index < b->run_index; });
  std::vector<PageMetrics> totals;
  for (const auto* row : rows) totals.push_back(row->totals);
  return totals;
}

// ---------------------------------------------------------------------------
// Persistence

void write_metric_csv(const MetricTable& table, std::ostream& out, const std::vector<std::string>& comments) {
  for (const auto& c : comments) csv::write_comment(out, c);
  std::string unstable;
  for (auto metric : kAllMetrics) {
    if (is_unstable(metric)) unstable += (unstable.empty() ? "" : ",") + std::string(metric_name(metric));
  }
  csv::write_comment(out, "unstable: " + unstable);

  csv::Row header{"row_kind", "config_id", "run_index", "site"};
  for (auto metric : kAllMetrics) header.emplace_back(metric_name(metric));
  csv::write_row(out, header);

  auto emit = [&](std::string_view kind, const std::string& config, int run, const std::string& site,
                  const PageMetrics& m, bool with_cookies) {
    csv::Row row{std::string(kind), config, std::to_string(run), site};
    for (auto metric : kAllMetrics) {
      row.push_back(metric == Metric::Cookies && !with_cookies ? std::string() : std::to_string(m.get(metric)));
    }
    csv::write_row(out, row);
  };
  for (const auto& row : table.sites) emit("site", row.config_id, row.run_index, row.site, row.metrics, false);
  for (const auto& row : table.runs) emit("run", row.config_id, row.run_index, "", row.totals, true);
}

MetricTable read_metric_csv(std::istream& in) {
  const auto t = csv::read(in);
  const auto kind_col = t.column("row_kind");
  const auto config_col = t.column("config_id");
  const auto run_col = t.column("run_index");
  const auto site_col = t.column("site");
  std::array<std::size_t, kMetricCount> metric_col{};
  for (auto metric : kAllMetrics) metric_col[static_cast<std::size_t>(metric)] = t.column(metric_name(metric));

  MetricTable table;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    PageMetrics m;
    try {
      for (auto metric : kAllMetrics) {
        const auto& cell = row[metric_col[static_cast<std::size_t>(metric)]];
        field(m, metric) = cell.empty() ? 0 : std::stoll(cell);
      }
      const int run = std::stoi(row[run_col]);
      if (row[kind_col] == "site") {
        table.sites.push_back({row[config_col], run, row[site_col], m});
      } else if (row[kind_col] == "run") {
        table.runs.push_back({row[config_col], run, m});
      } else {
        throw Error(fmt::format("unknown row_kind '{}'", row[kind_col]));
      }
    } catch (const std::logic_error& e) {
      throw ParseError(0, fmt::format("metrics csv data row {}: {}", i + 1, e.what()));
    }
  }
  return table;
}

MetricTable read_metric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open metrics table '" + path + "'");
  return read_metric_csv(in);
}

void write_metric_jsonl(const MetricTable& table, std::ostream& out) {
  auto encode = [](const PageMetrics& m, bool with_cookies) {
    nlohmann::ordered_json j;
    for (auto metric : kAllMetrics) {
      if (metric == Metric::Cookies && !with_cookies) continue;
      j[std::string(metric_name(metric))] = m.get(metric);
    }
    return j;
  };
  for (const auto& row : table.sites) {
    nlohmann::ordered_json j{{"row_kind", "site"}, {"config_id", row.config_id}, {"run_index", row.run_index},
                             {"site", row.site}};
    j["metrics"] = encode(row.metrics, false);
    out << j.dump() << '\n';
  }
  for (const auto& row : table.runs) {
    nlohmann::ordered_json j{{"row_kind", "run"}, {"config_id", row.config_id}, {"run_index", row.run_index}};
    j["metrics"] = encode(row.totals, true);
    out << j.dump() << '\n';
  }
}

}  // namespace privmeter
