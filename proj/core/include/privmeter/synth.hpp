#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "privmeter/crawl.hpp"
#include "privmeter/footprint.hpp"
#include "privmeter/metrics.hpp"

namespace privmeter::synth {

/// Probability that an ad slot shows a new creative on reload r. The excess
/// over `late_rate` starts at `early_rate - late_rate` for r = 1 and shrinks
/// by `decay` per reload until r = knee, after which the rate is flat.
/// Distinct creatives therefore pile up quickly over the first reloads and
/// linearly afterwards.
struct ChurnSchedule {
  double early_rate = 1.0;
  double late_rate = 0.04;
  double decay = 0.35;
  int knee = 10;

  double rate(int reload_index) const;
  bool operator==(const ChurnSchedule&) const = default;
};

struct EcosystemConfig {
  int n_sites = 100;
  int n_trackers = 150;
  int n_ad_networks = 30;
  int n_cdns = 6;
  double prevalence_exponent = 1.5;  // power-law tracker popularity
  int min_trackers_per_site = 2;
  int max_trackers_per_site = 12;
  int min_ad_slots = 2;
  int max_ad_slots = 5;
  int max_requests_per_ad = 6;
  double cdn_use_prob = 0.5;
  double cookie_set_prob = 0.6;  // share of trackers and ad networks using cookies
  ChurnSchedule churn;
  std::uint64_t seed = 1;

  /// Throws privmeter::Error when a count is negative, a range is inverted
  /// or a probability leaves [0, 1].
  void validate() const;

  bool operator==(const EcosystemConfig&) const = default;
};

/// JSON object; absent keys keep their defaults.
EcosystemConfig load_config(const std::string& path);
EcosystemConfig parse_config(const std::string& json_text);
std::string dump_config(const EcosystemConfig& config);

enum class OwnerKind { Site, Tracker, AdNetwork, Cdn };

struct Owner {
  OwnerKind kind = OwnerKind::Site;
  int index = 0;
  std::string domain;  // registrable domain chosen at construction
  bool uses_cookies = false;
};

/// The deterministic cast of a corpus: who exists, who embeds whom.
struct Ecosystem {
  EcosystemConfig config;
  std::vector<Owner> sites;
  std::vector<Owner> trackers;
  std::vector<Owner> ad_networks;
  std::vector<Owner> cdns;
  std::vector<std::vector<int>> site_trackers;  // persistent embeds per site
  std::vector<int> site_cdn;                    // -1 when the site uses none
  std::vector<int> site_ad_slots;
  std::map<std::string, std::pair<OwnerKind, int>> host_owner;  // every generated host

  const Owner& owner_of_host(const std::string& host) const;
};

Ecosystem build_ecosystem(const EcosystemConfig& config);

struct GroundTruth {
  std::vector<std::vector<int>> site_trackers;      // tracker indices per site
  std::map<std::string, bool> tracker_cookies;      // tracker domain -> uses cookies
  std::map<std::pair<int, std::string>, PageMetrics> expected;  // (run, site URL) -> bare metrics
  std::map<int, std::int64_t> expected_cookies;                 // run -> jar size
};

struct Corpus {
  std::vector<CrawlRun> runs;
  GroundTruth truth;
};

inline constexpr std::string_view kBareConfigId = "bare";

/// n_runs stateful bare runs over the same site list. Run 0 is drawn fresh;
/// run r is perturb_reload(run r-1, r). Fully determined by config.seed.
Corpus generate(const EcosystemConfig& config, int n_runs);

/// Reload `run` as reload number `reload_index` (>= 1): each ad slot shows a
/// new creative with probability churn.rate(reload_index); everything else
/// is kept byte for byte. Cookie flags and the jar are re-derived.
CrawlRun perturb_reload(const CrawlRun& run, const EcosystemConfig& config, int reload_index);

/// Ground-truth metrics of a generated run computed from construction
/// knowledge (host ownership), not from the public suffix list.
std::map<std::string, PageMetrics> expected_metrics(const CrawlRun& run, const Ecosystem& eco);

/// ADNS and CDN knowledge for the ecosystem: trackers grouped three per DNS
/// operator (every seventh tracker left unmapped), ad networks in pairs,
/// every CDN behind one shared hosting DNS.
EntityMap entity_map(const Ecosystem& eco);

/// Rule list text blocking the `count` most popular trackers (`||domain^`)
/// and, when `with_ads`, every ad network.
std::string tracker_rule_list(const Ecosystem& eco, int count, bool with_ads);

}  // namespace privmeter::synth
