#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace privmeter {

enum class ResourceClass { Document, Script, Image, Stylesheet, Other };

std::string_view to_string(ResourceClass c);
ResourceClass parse_resource_class(std::string_view name);

struct RequestRecord {
  std::string url;
  std::string host;
  std::int64_t bytes = 0;  // response body size
  ResourceClass resource_class = ResourceClass::Other;
  bool sets_cookie = false;
  bool reads_cookie = false;

  bool operator==(const RequestRecord&) const = default;
};

/// Builds a request whose host is taken from the URL.
RequestRecord make_request(std::string url, std::int64_t bytes, ResourceClass cls, bool sets_cookie = false,
                           bool reads_cookie = false);

struct ResourceRef {
  std::string url;
  std::int64_t bytes = 0;

  bool operator==(const ResourceRef&) const = default;
};

struct HtmlSummary {
  std::int64_t doc_bytes = 0;
  std::vector<ResourceRef> image_refs;
  std::vector<ResourceRef> script_refs;

  bool operator==(const HtmlSummary&) const = default;
};

struct SiteVisit {
  std::string site;       // URL of the visited page
  std::string site_host;  // host of `site`
  std::vector<RequestRecord> requests;
  HtmlSummary html;

  bool operator==(const SiteVisit&) const = default;
};

struct CookieEntry {
  std::string domain;
  std::string name;
  bool third_party_origin = false;

  bool operator==(const CookieEntry&) const = default;
};

/// Orders cookies by (domain, name) only, so a jar keeps one entry per key.
struct CookieKeyLess {
  bool operator()(const CookieEntry& a, const CookieEntry& b) const {
    return std::tie(a.domain, a.name) < std::tie(b.domain, b.name);
  }
};

using CookieJar = std::set<CookieEntry, CookieKeyLess>;

/// One stateful pass over a site list under one browser configuration.
/// Visits are kept in crawl order; the jar is the end-of-run state.
struct CrawlRun {
  std::string config_id;
  int run_index = 0;
  std::vector<SiteVisit> visits;
  CookieJar cookie_jar;

  bool operator==(const CrawlRun&) const = default;
};

/// Crawl-log schema version written into every run header.
inline constexpr int kCrawlSchemaVersion = 1;

/// Checks record invariants (host matches URL host, non-negative byte
/// counts, site_host matches site). Throws privmeter::Error naming the
/// offending field.
void validate(const CrawlRun& run);
void validate(const SiteVisit& visit);

/// Reads a line-delimited crawl log. Runs come back in header order, visits
/// in file order. Throws ParseError carrying the line number and field name.
std::vector<CrawlRun> read_crawl_log(std::istream& in);
std::vector<CrawlRun> read_crawl_log(const std::string& path);

void write_crawl_log(const std::vector<CrawlRun>& runs, std::ostream& out);
void write_crawl_log(const std::vector<CrawlRun>& runs, const std::string& path);

/// Runs whose config_id equals `config_id`, ordered by run_index.
std::vector<CrawlRun> select_config(const std::vector<CrawlRun>& runs, std::string_view config_id);

/// Distinct config ids in first-appearance order.
std::vector<std::string> config_ids(const std::vector<CrawlRun>& runs);

}  // namespace privmeter
