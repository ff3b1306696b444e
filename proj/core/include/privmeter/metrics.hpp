#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "privmeter/crawl.hpp"
#include "privmeter/psl.hpp"

namespace privmeter {

enum class Metric {
  FpRequests,
  TpRequests,
  TpDomains,
  Cookies,
  BytesTotal,
  HtmlBytes,
  NImages,
  NScripts,
  ImageBytes,
  ScriptBytes,
};

inline constexpr std::size_t kMetricCount = 10;

inline constexpr std::array<Metric, kMetricCount> kAllMetrics = {
    Metric::FpRequests, Metric::TpRequests, Metric::TpDomains, Metric::Cookies,    Metric::BytesTotal,
    Metric::HtmlBytes,  Metric::NImages,    Metric::NScripts,  Metric::ImageBytes, Metric::ScriptBytes,
};

/// Privacy metrics used for protection summaries. bytes_total is left out:
/// its run-to-run error stays large even after ten crawls.
inline constexpr std::array<Metric, 4> kProtectionMetrics = {Metric::FpRequests, Metric::TpRequests,
                                                             Metric::TpDomains, Metric::Cookies};

inline constexpr std::array<Metric, 5> kQualityMetrics = {Metric::HtmlBytes, Metric::NImages, Metric::NScripts,
                                                          Metric::ImageBytes, Metric::ScriptBytes};

std::string_view metric_name(Metric metric);
Metric parse_metric(std::string_view name);

/// Metrics flagged unstable in reports.
bool is_unstable(Metric metric);

struct BrowsingMetrics {
  std::int64_t fp_requests = 0;
  std::int64_t tp_requests = 0;
  std::int64_t tp_domains = 0;
  std::int64_t cookies = 0;  // run level only
  std::int64_t bytes_total = 0;

  bool operator==(const BrowsingMetrics&) const = default;
};

struct HtmlMetrics {
  std::int64_t html_bytes = 0;
  std::int64_t n_images = 0;
  std::int64_t n_scripts = 0;
  std::int64_t image_bytes = 0;
  std::int64_t script_bytes = 0;

  bool operator==(const HtmlMetrics&) const = default;
};

struct PageMetrics {
  BrowsingMetrics browsing;
  HtmlMetrics html;

  std::int64_t get(Metric metric) const;
  bool operator==(const PageMetrics&) const = default;
};

/// Metrics of one page load. cookies is always 0 here.
PageMetrics visit_metrics(const SiteVisit& visit, const SuffixRules& rules);

/// Sums over visits; tp_domains counts distinct third-party domains across
/// the run and cookies is the size of the end-of-run jar.
PageMetrics run_totals(const CrawlRun& run, const SuffixRules& rules);

struct SiteRow {
  std::string config_id;
  int run_index = 0;
  std::string site;
  PageMetrics metrics;

  bool operator==(const SiteRow&) const = default;
};

struct RunRow {
  std::string config_id;
  int run_index = 0;
  PageMetrics totals;

  bool operator==(const RunRow&) const = default;
};

/// Per-site rows keyed by (config_id, run_index, site) plus per-run totals.
struct MetricTable {
  std::vector<SiteRow> sites;
  std::vector<RunRow> runs;

  std::vector<std::string> config_ids() const;
  bool operator==(const MetricTable&) const = default;
};

/// Throws privmeter::Error when a run visits the same site twice.
MetricTable build_metric_table(const std::vector<CrawlRun>& runs, const SuffixRules& rules);

struct SiteMean {
  std::array<double, kMetricCount> mean{};  // cookies stays 0: it has no per-site value
  int coverage = 0;                         // runs in which the site was present

  double get(Metric metric) const { return mean[static_cast<std::size_t>(metric)]; }
};

/// Mean of every metric per site over the runs of `config_id`. Sites absent
/// from some runs are averaged over the runs that include them.
std::map<std::string, SiteMean> per_site_means(const MetricTable& table, std::string_view config_id);

/// Same, straight from crawl runs that share one config id.
std::map<std::string, SiteMean> per_site_means(const std::vector<CrawlRun>& runs, const SuffixRules& rules);

/// Run totals of `config_id`, ordered by run index.
std::vector<PageMetrics> run_totals(const MetricTable& table, std::string_view config_id);

/// CSV layout (see README): a `row_kind` column distinguishes `site` rows
/// from `run` rows; the cookies cell is empty on site rows.
void write_metric_csv(const MetricTable& table, std::ostream& out, const std::vector<std::string>& comments = {});
MetricTable read_metric_csv(std::istream& in);
MetricTable read_metric_csv(const std::string& path);

/// JSON-lines form of the same table.
void write_metric_jsonl(const MetricTable& table, std::ostream& out);

}  // namespace privmeter
