#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "privmeter/crawl.hpp"
#include "privmeter/psl.hpp"

namespace privmeter {

/// Offline knowledge used to group third parties into entities.
struct EntityMap {
  std::map<std::string, std::string> adns;  // registrable domain -> ADNS registrable domain
  std::set<std::string> cdn_domains;        // hosted on a CDN / hosting provider

  /// `adns_csv`: header `domain,adns_domain`. `cdn_csv`: header `domain`.
  /// Either path may be empty.
  static EntityMap load(const std::string& adns_csv, const std::string& cdn_csv);
};

enum class GroupingMethod {
  Identity,  // each registrable domain is its own node
  Adns,      // grouped by authoritative DNS domain
  Root,      // ADNS, except CDN-hosted domains keep their own node
};

std::string_view to_string(GroupingMethod method);
GroupingMethod parse_grouping_method(std::string_view name);

/// Tally of ADNS lookups that fell back to the domain itself.
struct EntityCoverage {
  std::size_t lookups = 0;
  std::size_t fallbacks = 0;

  double fallback_rate() const { return lookups == 0 ? 0.0 : static_cast<double>(fallbacks) / lookups; }
};

std::string third_party_entity(const std::string& domain, const EntityMap& map, GroupingMethod method,
                               EntityCoverage* coverage = nullptr);

struct FootprintGraph {
  std::set<std::string> first_party_nodes;
  std::set<std::string> third_party_nodes;
  std::set<std::pair<std::string, std::string>> edges;  // (first party, third-party entity)
  GroupingMethod method = GroupingMethod::Adns;
  EntityCoverage coverage;

  bool operator==(const FootprintGraph& o) const {
    return first_party_nodes == o.first_party_nodes && third_party_nodes == o.third_party_nodes &&
           edges == o.edges && method == o.method;
  }
};

/// Union over every visit of `runs`: one edge per (site entity, third-party
/// entity). First and third parties stay separate node sets even when a
/// domain plays both roles.
FootprintGraph build_footprint(const std::vector<CrawlRun>& runs, const SuffixRules& rules, const EntityMap& map,
                               GroupingMethod method);

struct FootprintMetrics {
  std::size_t n_third_parties = 0;
  double mean_tp_per_fp = 0.0;
  std::size_t top10_fp_coverage = 0;

  bool operator==(const FootprintMetrics&) const = default;
};

/// Top-10 ties are broken by entity name, ascending.
FootprintMetrics footprint_metrics(const FootprintGraph& graph);

void write_edge_list(const FootprintGraph& graph, std::ostream& out, const std::vector<std::string>& comments = {});

}  // namespace privmeter
