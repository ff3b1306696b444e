#include "privmeter/crawl.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <tuple>

#include <json.hpp>

#include "privmeter/error.hpp"
#include "privmeter/url.hpp"

namespace privmeter {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ResourceClass c) {
  switch (c) {
    case ResourceClass::Document: return "document";
    case ResourceClass::Script: return "script";
    case ResourceClass::Image: return "image";
    case ResourceClass::Stylesheet: return "stylesheet";
    case ResourceClass::Other: return "other";
  }
  return "other";
}

ResourceClass parse_resource_class(std::string_view name) {
  for (auto c : {ResourceClass::Document, ResourceClass::Script, ResourceClass::Image, ResourceClass::Stylesheet,
                 ResourceClass::Other}) {
    if (to_string(c) == name) return c;
  }
  throw Error(fmt::format("unknown resource class '{}'", name));
}

RequestRecord make_request(std::string url, std::int64_t bytes, ResourceClass cls, bool sets_cookie,
                           bool reads_cookie) {
  RequestRecord r;
  r.host = url_host(url);
  r.url = std::move(url);
  r.bytes = bytes;
  r.resource_class = cls;
  r.sets_cookie = sets_cookie;
  r.reads_cookie = reads_cookie;
  return r;
}

void validate(const SiteVisit& visit) {
  if (url_host(visit.site) != visit.site_host) {
    throw Error(fmt::format("site_host: '{}' does not match site '{}'", visit.site_host, visit.site));
  }
  for (const auto& req : visit.requests) {
    if (url_host(req.url) != req.host) {
      throw Error(fmt::format("host: '{}' does not match url '{}'", req.host, req.url));
    }
    if (req.bytes < 0) throw Error(fmt::format("bytes: negative value for '{}'", req.url));
  }
  if (visit.html.doc_bytes < 0) throw Error("doc_bytes: negative value");
  for (const auto* refs : {&visit.html.image_refs, &visit.html.script_refs}) {
    for (const auto& ref : *refs) {
      if (ref.bytes < 0) throw Error(fmt::format("bytes: negative value for ref '{}'", ref.url));
    }
  }
}

void validate(const CrawlRun& run) {
  if (run.config_id.empty()) throw Error("config_id: empty");
  if (run.run_index < 0) throw Error("run_index: negative");
  for (const auto& visit : run.visits) validate(visit);
}

namespace {

class LineReader {
 public:
  LineReader(const json& record, std::size_t line) : record_(record), line_(line) {}

  const json& field(const char* name) const {
    auto it = record_.find(name);
    if (it == record_.end()) fail(name, "missing");
    return *it;
  }

  std::string str(const char* name) const {
    const auto& v = field(name);
    if (!v.is_string()) fail(name, "expected a string");
    return v.get<std::string>();
  }

  std::int64_t integer(const char* name, const json& v) const {
    if (!v.is_number_integer()) fail(name, "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < 0) fail(name, "must be non-negative");
    return x;
  }

  std::int64_t integer(const char* name) const { return integer(name, field(name)); }

  bool boolean(const json& obj, const char* name) const {
    auto it = obj.find(name);
    if (it == obj.end()) return false;
    if (!it->is_boolean()) fail(name, "expected a boolean");
    return it->get<bool>();
  }

  std::string str(const json& obj, const char* name) const {
    auto it = obj.find(name);
    if (it == obj.end()) fail(name, "missing");
    if (!it->is_string()) fail(name, "expected a string");
    return it->get<std::string>();
  }

  std::int64_t integer(const json& obj, const char* name) const {
    auto it = obj.find(name);
    if (it == obj.end()) fail(name, "missing");
    return integer(name, *it);
  }

  [[noreturn]] void fail(std::string_view field, std::string_view what) const {
    throw ParseError(line_, fmt::format("field '{}': {}", field, what));
  }

  std::size_t line() const { return line_; }

 private:
  const json& record_;
  std::size_t line_;
};

std::vector<ResourceRef> read_refs(const LineReader& r, const json& html, const char* name) {
  std::vector<ResourceRef> refs;
  auto it = html.find(name);
  if (it == html.end()) return refs;
  if (!it->is_array()) r.fail(name, "expected an array");
  for (const auto& item : *it) {
    refs.push_back({r.str(item, "url"), r.integer(item, "bytes")});
  }
  return refs;
}

SiteVisit read_visit(const LineReader& r) {
  SiteVisit visit;
  visit.site = r.str("site");
  visit.site_host = r.str("site_host");
  const auto& requests = r.field("requests");
  if (!requests.is_array()) r.fail("requests", "expected an array");
  for (const auto& item : requests) {
    RequestRecord req;
    req.url = r.str(item, "url");
    req.host = r.str(item, "host");
    req.bytes = r.integer(item, "bytes");
    try {
      req.resource_class = parse_resource_class(r.str(item, "class"));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      r.fail("class", e.what());
    }
    req.sets_cookie = r.boolean(item, "sets_cookie");
    req.reads_cookie = r.boolean(item, "reads_cookie");
    visit.requests.push_back(std::move(req));
  }
  const auto& html = r.field("html");
  if (!html.is_object()) r.fail("html", "expected an object");
  visit.html.doc_bytes = r.integer(html, "doc_bytes");
  visit.html.image_refs = read_refs(r, html, "images");
  visit.html.script_refs = read_refs(r, html, "scripts");
  return visit;
}

ordered_json refs_json(const std::vector<ResourceRef>& refs) {
  auto arr = ordered_json::array();
  for (const auto& ref : refs) arr.push_back(ordered_json{{"url", ref.url}, {"bytes", ref.bytes}});
  return arr;
}

}  // namespace

std::vector<CrawlRun> read_crawl_log(std::istream& in) {
  std::vector<CrawlRun> runs;
  std::map<std::pair<std::string, int>, std::size_t> run_slot;
  std::set<std::tuple<std::string, int, std::string, std::int64_t>> seen_visits;

  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, fmt::format("invalid record: {}", e.what()));
    }
    if (!record.is_object()) throw ParseError(line_no, "record is not an object");
    LineReader r(record, line_no);
    const auto kind = r.str("kind");
    const auto config_id = r.str("config_id");
    const auto run_index = static_cast<int>(r.integer("run_index"));
    const auto key = std::make_pair(config_id, run_index);

    if (kind == "run_header") {
      if (r.integer("schema_version") != kCrawlSchemaVersion) {
        r.fail("schema_version", fmt::format("unsupported (expected {})", kCrawlSchemaVersion));
      }
      if (config_id.empty()) r.fail("config_id", "empty");
      if (!run_slot.emplace(key, runs.size()).second) {
        r.fail("run_index", fmt::format("duplicate run {} for config '{}'", run_index, config_id));
      }
      runs.push_back(CrawlRun{config_id, run_index, {}, {}});
      continue;
    }

    auto slot = run_slot.find(key);
    if (slot == run_slot.end()) {
      r.fail("run_index", fmt::format("record precedes the header of run {} for config '{}'", run_index, config_id));
    }
    auto& run = runs[slot->second];

    if (kind == "visit") {
      const auto sequence = r.integer("sequence");
      auto visit = read_visit(r);
      try {
        validate(visit);
      } catch (const Error& e) {
        throw ParseError(line_no, e.what());
      }
      if (!seen_visits.emplace(config_id, run_index, visit.site, sequence).second) {
        r.fail("sequence", fmt::format("duplicate visit to '{}'", visit.site));
      }
      run.visits.push_back(std::move(visit));
    } else if (kind == "cookie") {
      CookieEntry cookie{r.str("domain"), r.str("name"), r.boolean(record, "third_party_origin")};
      if (!run.cookie_jar.insert(cookie).second) {
        r.fail("name", fmt::format("duplicate cookie {}/{}", cookie.domain, cookie.name));
      }
    } else {
      r.fail("kind", fmt::format("unknown record kind '{}'", kind));
    }
  }
  return runs;
}

std::vector<CrawlRun> read_crawl_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open crawl log '" + path + "'");
  return read_crawl_log(in);
}

void write_crawl_log(const std::vector<CrawlRun>& runs, std::ostream& out) {
  for (const auto& run : runs) {
    out << ordered_json{{"kind", "run_header"},
                        {"schema_version", kCrawlSchemaVersion},
                        {"config_id", run.config_id},
                        {"run_index", run.run_index}}
                .dump()
        << '\n';
    std::int64_t sequence = 0;
    for (const auto& visit : run.visits) {
      auto requests = ordered_json::array();
      for (const auto& req : visit.requests) {
        requests.push_back(ordered_json{{"url", req.url},
                                        {"host", req.host},
                                        {"bytes", req.bytes},
                                        {"class", to_string(req.resource_class)},
                                        {"sets_cookie", req.sets_cookie},
                                        {"reads_cookie", req.reads_cookie}});
      }
      out << ordered_json{{"kind", "visit"},
                          {"config_id", run.config_id},
                          {"run_index", run.run_index},
                          {"sequence", sequence++},
                          {"site", visit.site},
                          {"site_host", visit.site_host},
                          {"requests", std::move(requests)},
                          {"html",
                           ordered_json{{"doc_bytes", visit.html.doc_bytes},
                                        {"images", refs_json(visit.html.image_refs)},
                                        {"scripts", refs_json(visit.html.script_refs)}}}}
                  .dump()
          << '\n';
    }
    for (const auto& cookie : run.cookie_jar) {
      out << ordered_json{{"kind", "cookie"},
                          {"config_id", run.config_id},
                          {"run_index", run.run_index},
                          {"domain", cookie.domain},
                          {"name", cookie.name},
                          {"third_party_origin", cookie.third_party_origin}}
                  .dump()
          << '\n';
    }
  }
}

void write_crawl_log(const std::vector<CrawlRun>& runs, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write crawl log '" + path + "'");
  write_crawl_log(runs, out);
  out.flush();
  if (!out) throw Error("write failed for '" + path + "'");
}

std::vector<CrawlRun> select_config(const std::vector<CrawlRun>& runs, std::string_view config_id) {
  std::vector<CrawlRun> out;
  for (const auto& run : runs) {
    if (run.config_id == config_id) out.push_back(run);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.run_index < b.run_index; });
  return out;
}

std::vector<std::string> config_ids(const std::vector<CrawlRun>& runs) {
  std::vector<std::string> ids;
  for (const auto& run : runs) {
    if (std::find(ids.begin(), ids.end(), run.config_id) == ids.end()) ids.push_back(run.config_id);
  }
  return ids;
}

}  // namespace privmeter
