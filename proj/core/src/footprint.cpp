#include "privmeter/footprint.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <ostream>

#include "privmeter/csv.hpp"
#include "privmeter/error.hpp"
#include "privmeter/url.hpp"

namespace privmeter {

EntityMap EntityMap::load(const std::string& adns_csv, const std::string& cdn_csv) {
  EntityMap map;
  if (!adns_csv.empty()) {
    const auto t = csv::read_file(adns_csv);
    const auto d = t.column("domain");
    const auto a = t.column("adns_domain");
    for (const auto& row : t.rows) map.adns[to_lower_ascii(row[d])] = to_lower_ascii(row[a]);
  }
  if (!cdn_csv.empty()) {
    const auto t = csv::read_file(cdn_csv);
    const auto d = t.column("domain");
    for (const auto& row : t.rows) map.cdn_domains.insert(to_lower_ascii(row[d]));
  }
  return map;
}

std::string_view to_string(GroupingMethod method) {
  switch (method) {
    case GroupingMethod::Identity: return "identity";
    case GroupingMethod::Adns: return "adns";
    case GroupingMethod::Root: return "root";
  }
  return "";
}

GroupingMethod parse_grouping_method(std::string_view name) {
  for (auto m : {GroupingMethod::Identity, GroupingMethod::Adns, GroupingMethod::Root}) {
    if (to_string(m) == name) return m;
  }
  throw Error(fmt::format("unknown grouping method '{}'", name));
}

std::string third_party_entity(const std::string& domain, const EntityMap& map, GroupingMethod method,
                               EntityCoverage* coverage) {
  if (method == GroupingMethod::Identity) return domain;
  if (method == GroupingMethod::Root && map.cdn_domains.contains(domain)) return domain;
  const auto it = map.adns.find(domain);
  if (coverage) {
    ++coverage->lookups;
    if (it == map.adns.end()) ++coverage->fallbacks;
  }
  return it == map.adns.end() ? domain : it->second;
}

FootprintGraph build_footprint(const std::vector<CrawlRun>& runs, const SuffixRules& rules, const EntityMap& map,
                               GroupingMethod method) {
  FootprintGraph graph;
  graph.method = method;
  std::map<std::string, std::string> resolved;  // domain -> entity, so coverage counts distinct domains
  for (const auto& run : runs) {
    for (const auto& visit : run.visits) {
      const auto site = entity_of(visit.site_host, rules);
      graph.first_party_nodes.insert(site);
      for (const auto& req : visit.requests) {
        auto domain = entity_of(req.host, rules);
        if (domain == site) continue;
        auto it = resolved.find(domain);
        if (it == resolved.end()) {
          it = resolved.emplace(domain, third_party_entity(domain, map, method, &graph.coverage)).first;
        }
        graph.third_party_nodes.insert(it->second);
        graph.edges.emplace(site, it->second);
      }
    }
  }
  return graph;
}

FootprintMetrics footprint_metrics(const FootprintGraph& graph) {
  FootprintMetrics m;
  std::map<std::string, std::set<std::string>> neighbours;  // third party -> first parties
  std::map<std::string, std::size_t> fp_degree;
  for (const auto& [fp, tp] : graph.edges) {
    neighbours[tp].insert(fp);
    ++fp_degree[fp];
  }
  m.n_third_parties = neighbours.size();
  if (!graph.first_party_nodes.empty()) {
    std::size_t total = 0;
    for (const auto& fp : graph.first_party_nodes) {
      if (auto it = fp_degree.find(fp); it != fp_degree.end()) total += it->second;
    }
    m.mean_tp_per_fp = static_cast<double>(total) / static_cast<double>(graph.first_party_nodes.size());
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (const auto& [tp, fps] : neighbours) ranked.emplace_back(tp, fps.size());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::set<std::string> covered;
  for (std::size_t i = 0; i < std::min<std::size_t>(10, ranked.size()); ++i) {
    const auto& fps = neighbours[ranked[i].first];
    covered.insert(fps.begin(), fps.end());
  }
  m.top10_fp_coverage = covered.size();
  return m;
}

void write_edge_list(const FootprintGraph& graph, std::ostream& out, const std::vector<std::string>& comments) {
  for (const auto& c : comments) csv::write_comment(out, c);
  csv::write_comment(out, fmt::format("method: {}", to_string(graph.method)));
  csv::write_row(out, {"first_party", "third_party"});
  for (const auto& [fp, tp] : graph.edges) csv::write_row(out, {fp, tp});
}

}  // namespace privmeter
