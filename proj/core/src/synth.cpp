#include "privmeter/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "privmeter/error.hpp"
#include "privmeter/rng.hpp"
#include "privmeter/url.hpp"

namespace privmeter::synth {

namespace {

// Seed-derivation tags; changing one changes every corpus.
constexpr std::uint64_t kTagSite = 1;
constexpr std::uint64_t kTagTracker = 2;
constexpr std::uint64_t kTagAdNetwork = 3;
constexpr std::uint64_t kTagChurn = 4;

constexpr std::array<std::string_view, 7> kSiteTlds = {"com", "co.uk", "jp", "org", "com.au", "net", "de"};
constexpr std::array<std::string_view, 4> kTrackerTlds = {"com", "net", "io", "co.uk"};

// Roughly log-uniform byte count in [lo, hi), integer arithmetic only.
std::int64_t draw_bytes(Rng& rng, std::int64_t lo, std::int64_t hi) {
  int buckets = 0;
  while ((lo << (buckets + 1)) <= hi) ++buckets;
  const auto b = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(buckets, 1))));
  const std::int64_t start = lo << b;
  const std::int64_t end = std::min(hi, lo << (b + 1));
  return rng.between(start, std::max(start, end - 1));
}

std::vector<double> power_law_weights(int n, double exponent) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = std::pow(static_cast<double>(i + 1), -exponent);
  return w;
}

std::string site_url(const Owner& site) { return "https://www." + site.domain + "/"; }

void rebuild_html(SiteVisit& visit) {
  visit.html.image_refs.clear();
  visit.html.script_refs.clear();
  for (const auto& req : visit.requests) {
    if (req.resource_class == ResourceClass::Image) visit.html.image_refs.push_back({req.url, req.bytes});
    if (req.resource_class == ResourceClass::Script) visit.html.script_refs.push_back({req.url, req.bytes});
  }
}

std::string slot_key(int site, int slot) { return fmt::format("s{}-{}", site, slot); }

// Slot key of an ad request (".../ad/<slot>/<creative>/<n>.<ext>"), or "".
std::string slot_of(const std::string& url) {
  const auto parts = parse_url(url);
  if (!parts.path.starts_with("/ad/")) return {};
  const auto end = parts.path.find('/', 4);
  return parts.path.substr(4, end == std::string::npos ? std::string::npos : end - 4);
}

std::vector<RequestRecord> make_ad(const Ecosystem& eco, int site, int slot, int reload, Rng& rng) {
  const auto& cfg = eco.config;
  const auto& network = eco.ad_networks[rng.weighted(power_law_weights(cfg.n_ad_networks, 1.0))];
  const auto creative = fmt::format("r{}x{:06x}", reload, rng.next() & 0xffffff);
  const auto base = fmt::format("https://srv.{}/ad/{}/{}/", network.domain, slot_key(site, slot), creative);
  const auto count = rng.between(1, cfg.max_requests_per_ad);
  std::vector<RequestRecord> out;
  out.push_back(make_request(base + "0.js", draw_bytes(rng, 4000, 60000), ResourceClass::Script));
  for (std::int64_t j = 1; j < count; ++j) {
    if (j % 3 == 0) {
      out.push_back(make_request(fmt::format("{}{}.json", base, j), draw_bytes(rng, 200, 3000), ResourceClass::Other));
    } else {
      out.push_back(make_request(fmt::format("{}{}.png", base, j), draw_bytes(rng, 1000, 150000), ResourceClass::Image));
    }
  }
  return out;
}

// Re-derives sets/reads flags in crawl order and rebuilds the jar: a
// cookie-using third party sets its cookie on first contact in the run and
// reads it on every later contact.
void assign_cookie_state(CrawlRun& run, const Ecosystem& eco) {
  run.cookie_jar.clear();
  std::set<std::string> contacted;
  for (auto& visit : run.visits) {
    const auto& site = eco.owner_of_host(visit.site_host);
    for (auto& req : visit.requests) {
      const auto& owner = eco.owner_of_host(req.host);
      req.sets_cookie = false;
      req.reads_cookie = false;
      if (!owner.uses_cookies) continue;
      if (owner.domain == site.domain) {
        if (req.resource_class == ResourceClass::Document) {
          req.sets_cookie = true;
          run.cookie_jar.insert({owner.domain, "session", false});
        }
        continue;
      }
      if (contacted.insert(owner.domain).second) {
        req.sets_cookie = true;
        run.cookie_jar.insert({owner.domain, "uid", true});
      } else {
        req.reads_cookie = true;
      }
    }
  }
}

SiteVisit build_visit(const Ecosystem& eco, int i) {
  const auto& cfg = eco.config;
  const auto& site = eco.sites[static_cast<std::size_t>(i)];
  Rng rng(derive_seed(cfg.seed, {kTagSite, static_cast<std::uint64_t>(i), 1}));
  SiteVisit visit;
  visit.site = site_url(site);
  visit.site_host = "www." + site.domain;
  visit.html.doc_bytes = draw_bytes(rng, 8000, 400000);
  visit.requests.push_back(make_request(visit.site, visit.html.doc_bytes, ResourceClass::Document));

  const auto static_host = "https://static." + site.domain;
  const auto img_host = "https://img." + site.domain;
  for (std::int64_t k = 0, n = rng.between(1, 3); k < n; ++k) {
    visit.requests.push_back(
        make_request(fmt::format("{}/css/{}.css", static_host, k), draw_bytes(rng, 2000, 80000), ResourceClass::Stylesheet));
  }
  for (std::int64_t k = 0, n = rng.between(2, 8); k < n; ++k) {
    visit.requests.push_back(
        make_request(fmt::format("{}/js/{}.js", static_host, k), draw_bytes(rng, 3000, 300000), ResourceClass::Script));
  }
  if (const int c = eco.site_cdn[static_cast<std::size_t>(i)]; c >= 0) {
    const auto& cdn = eco.cdns[static_cast<std::size_t>(c)];
    for (std::int64_t k = 0, n = rng.between(1, 3); k < n; ++k) {
      visit.requests.push_back(make_request(fmt::format("https://edge.{}/lib/{}/{}.js", cdn.domain, i, k),
                                            draw_bytes(rng, 10000, 200000), ResourceClass::Script));
    }
  }
  for (int t : eco.site_trackers[static_cast<std::size_t>(i)]) {
    const auto& tracker = eco.trackers[static_cast<std::size_t>(t)];
    const bool tag_first = rng.bernoulli(0.7);
    for (std::int64_t k = 0, n = rng.between(1, 3); k < n; ++k) {
      if (k == 0 && tag_first) {
        visit.requests.push_back(make_request(fmt::format("https://tag.{}/t/{}.js", tracker.domain, i),
                                              draw_bytes(rng, 2000, 90000), ResourceClass::Script));
      } else if (k % 2 == 1) {
        visit.requests.push_back(make_request(fmt::format("https://{}/collect/{}/{}", tracker.domain, i, k),
                                              draw_bytes(rng, 40, 400), ResourceClass::Other));
      } else {
        visit.requests.push_back(make_request(fmt::format("https://px.{}/p/{}/{}.gif", tracker.domain, i, k),
                                              draw_bytes(rng, 40, 2000), ResourceClass::Image));
      }
    }
  }
  for (int slot = 0; slot < eco.site_ad_slots[static_cast<std::size_t>(i)]; ++slot) {
    Rng slot_rng(derive_seed(cfg.seed, {kTagChurn, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(slot), 0}));
    auto ad = make_ad(eco, i, slot, 0, slot_rng);
    visit.requests.insert(visit.requests.end(), ad.begin(), ad.end());
  }
  for (std::int64_t k = 0, n = rng.between(3, 20); k < n; ++k) {
    visit.requests.push_back(
        make_request(fmt::format("{}/i/{}.jpg", img_host, k), draw_bytes(rng, 1500, 500000), ResourceClass::Image));
  }
  for (std::int64_t k = 0, n = rng.between(0, 3); k < n; ++k) {
    visit.requests.push_back(
        make_request(fmt::format("{}/api/{}", static_host, k), draw_bytes(rng, 100, 20000), ResourceClass::Other));
  }
  rebuild_html(visit);
  return visit;
}

CrawlRun reload(const CrawlRun& run, const Ecosystem& eco, int reload_index) {
  if (reload_index < 1) throw Error("perturb_reload: reload_index must be >= 1");
  const auto& cfg = eco.config;
  CrawlRun out = run;
  out.run_index = reload_index;
  const double rate = cfg.churn.rate(reload_index);
  bool changed = false;
  for (auto& visit : out.visits) {
    const auto& site = eco.owner_of_host(visit.site_host);
    bool visit_changed = false;
    for (int slot = 0; slot < eco.site_ad_slots[static_cast<std::size_t>(site.index)]; ++slot) {
      Rng rng(derive_seed(cfg.seed, {kTagChurn, static_cast<std::uint64_t>(site.index), static_cast<std::uint64_t>(slot),
                                     static_cast<std::uint64_t>(reload_index)}));
      if (!rng.bernoulli(rate)) continue;
      const auto key = slot_key(site.index, slot);
      auto fresh = make_ad(eco, site.index, slot, reload_index, rng);
      auto first = std::find_if(visit.requests.begin(), visit.requests.end(),
                                [&](const RequestRecord& r) { return slot_of(r.url) == key; });
      const auto pos = static_cast<std::size_t>(first - visit.requests.begin());
      std::erase_if(visit.requests, [&](const RequestRecord& r) { return slot_of(r.url) == key; });
      visit.requests.insert(visit.requests.begin() + static_cast<std::ptrdiff_t>(std::min(pos, visit.requests.size())),
                            fresh.begin(), fresh.end());
      visit_changed = changed = true;
    }
    if (visit_changed) rebuild_html(visit);
  }
  if (changed) assign_cookie_state(out, eco);
  return out;
}

}  // namespace

double ChurnSchedule::rate(int reload_index) const {
  if (reload_index <= 0) return 1.0;
  if (knee <= 1 || reload_index >= knee) return late_rate;
  return late_rate + (early_rate - late_rate) * std::pow(decay, reload_index - 1);
}

void EcosystemConfig::validate() const {
  auto require = [](bool ok, std::string_view what) {
    if (!ok) throw Error(fmt::format("ecosystem config: {}", what));
  };
  require(n_sites >= 0 && n_trackers >= 0 && n_ad_networks >= 0 && n_cdns >= 0, "counts must be non-negative");
  require(prevalence_exponent > 0.0, "prevalence_exponent must be positive");
  require(min_trackers_per_site >= 0 && min_trackers_per_site <= max_trackers_per_site,
          "trackers per site range is invalid");
  require(min_ad_slots >= 0 && min_ad_slots <= max_ad_slots, "ad slot range is invalid");
  require(max_ad_slots == 0 || n_ad_networks > 0, "ad slots need at least one ad network");
  require(max_requests_per_ad >= 1, "max_requests_per_ad must be at least 1");
  for (double p : {cdn_use_prob, cookie_set_prob, churn.early_rate, churn.late_rate, churn.decay}) {
    require(p >= 0.0 && p <= 1.0, "probabilities must lie in [0, 1]");
  }
  require(churn.knee >= 1, "churn knee must be at least 1");
  require(n_sites <= 100000 && n_trackers <= 100000, "counts are limited to 100000");
}

EcosystemConfig parse_config(const std::string& json_text) {
  EcosystemConfig c;
  try {
    const auto j = nlohmann::json::parse(json_text);
    c.n_sites = j.value("n_sites", c.n_sites);
    c.n_trackers = j.value("n_trackers", c.n_trackers);
    c.n_ad_networks = j.value("n_ad_networks", c.n_ad_networks);
    c.n_cdns = j.value("n_cdns", c.n_cdns);
    c.prevalence_exponent = j.value("prevalence_exponent", c.prevalence_exponent);
    c.min_trackers_per_site = j.value("min_trackers_per_site", c.min_trackers_per_site);
    c.max_trackers_per_site = j.value("max_trackers_per_site", c.max_trackers_per_site);
    c.min_ad_slots = j.value("min_ad_slots", c.min_ad_slots);
    c.max_ad_slots = j.value("max_ad_slots", c.max_ad_slots);
    c.max_requests_per_ad = j.value("max_requests_per_ad", c.max_requests_per_ad);
    c.cdn_use_prob = j.value("cdn_use_prob", c.cdn_use_prob);
    c.cookie_set_prob = j.value("cookie_set_prob", c.cookie_set_prob);
    c.seed = j.value("seed", c.seed);
    if (auto it = j.find("churn"); it != j.end()) {
      c.churn.early_rate = it->value("early_rate", c.churn.early_rate);
      c.churn.late_rate = it->value("late_rate", c.churn.late_rate);
      c.churn.decay = it->value("decay", c.churn.decay);
      c.churn.knee = it->value("knee", c.churn.knee);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(fmt::format("ecosystem config: {}", e.what()));
  }
  c.validate();
  return c;
}

EcosystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ecosystem config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string dump_config(const EcosystemConfig& c) {
  nlohmann::ordered_json j{{"n_sites", c.n_sites},
                           {"n_trackers", c.n_trackers},
                           {"n_ad_networks", c.n_ad_networks},
                           {"n_cdns", c.n_cdns},
                           {"prevalence_exponent", c.prevalence_exponent},
                           {"min_trackers_per_site", c.min_trackers_per_site},
                           {"max_trackers_per_site", c.max_trackers_per_site},
                           {"min_ad_slots", c.min_ad_slots},
                           {"max_ad_slots", c.max_ad_slots},
                           {"max_requests_per_ad", c.max_requests_per_ad},
                           {"cdn_use_prob", c.cdn_use_prob},
                           {"cookie_set_prob", c.cookie_set_prob},
                           {"churn", {{"early_rate", c.churn.early_rate}, {"late_rate", c.churn.late_rate}, {"decay", c.churn.decay}, {"knee", c.churn.knee}}},
                           {"seed", c.seed}};
  return j.dump(2);
}

const Owner& Ecosystem::owner_of_host(const std::string& host) const {
  const auto it = host_owner.find(host);
  if (it == host_owner.end()) throw Error(fmt::format("host '{}' is not part of the synthetic ecosystem", host));
  const auto [kind, index] = it->second;
  const auto i = static_cast<std::size_t>(index);
  switch (kind) {
    case OwnerKind::Site: return sites[i];
    case OwnerKind::Tracker: return trackers[i];
    case OwnerKind::AdNetwork: return ad_networks[i];
    case OwnerKind::Cdn: return cdns[i];
  }
  throw Error("unreachable owner kind");
}

Ecosystem build_ecosystem(const EcosystemConfig& config) {
  config.validate();
  Ecosystem eco;
  eco.config = config;
  auto add_hosts = [&](OwnerKind kind, int index, const std::string& domain, std::initializer_list<std::string_view> prefixes) {
    for (auto p : prefixes) eco.host_owner[std::string(p) + domain] = {kind, index};
  };

  for (int j = 0; j < config.n_trackers; ++j) {
    Rng rng(derive_seed(config.seed, {kTagTracker, static_cast<std::uint64_t>(j)}));
    Owner t{OwnerKind::Tracker, j, fmt::format("trk{:03d}.{}", j, kTrackerTlds[static_cast<std::size_t>(j) % kTrackerTlds.size()]),
            rng.bernoulli(config.cookie_set_prob)};
    add_hosts(OwnerKind::Tracker, j, t.domain, {"", "px.", "tag."});
    eco.trackers.push_back(std::move(t));
  }
  for (int k = 0; k < config.n_ad_networks; ++k) {
    Rng rng(derive_seed(config.seed, {kTagAdNetwork, static_cast<std::uint64_t>(k)}));
    Owner a{OwnerKind::AdNetwork, k, fmt::format("adnet{:02d}.{}", k, k % 2 == 0 ? "com" : "net"),
            rng.bernoulli(config.cookie_set_prob)};
    add_hosts(OwnerKind::AdNetwork, k, a.domain, {"srv."});
    eco.ad_networks.push_back(std::move(a));
  }
  for (int c = 0; c < config.n_cdns; ++c) {
    Owner cdn{OwnerKind::Cdn, c, fmt::format("cdnhost{:02d}.net", c), false};
    add_hosts(OwnerKind::Cdn, c, cdn.domain, {"edge."});
    eco.cdns.push_back(std::move(cdn));
  }

  const auto weights = power_law_weights(config.n_trackers, config.prevalence_exponent);
  for (int i = 0; i < config.n_sites; ++i) {
    Rng rng(derive_seed(config.seed, {kTagSite, static_cast<std::uint64_t>(i), 0}));
    Owner site{OwnerKind::Site, i, fmt::format("site{:03d}.{}", i, kSiteTlds[static_cast<std::size_t>(i) % kSiteTlds.size()]),
               rng.bernoulli(0.8)};
    add_hosts(OwnerKind::Site, i, site.domain, {"www.", "static.", "img."});
    eco.sites.push_back(std::move(site));

    const auto want = std::min<std::int64_t>(rng.between(config.min_trackers_per_site, config.max_trackers_per_site),
                                             config.n_trackers);
    auto w = weights;
    std::vector<int> chosen;
    for (std::int64_t k = 0; k < want; ++k) {
      const auto t = rng.weighted(w);
      chosen.push_back(static_cast<int>(t));
      w[t] = 0.0;
    }
    eco.site_trackers.push_back(std::move(chosen));
    eco.site_cdn.push_back(config.n_cdns > 0 && rng.bernoulli(config.cdn_use_prob)
                               ? static_cast<int>(rng.below(static_cast<std::uint64_t>(config.n_cdns)))
                               : -1);
    eco.site_ad_slots.push_back(static_cast<int>(rng.between(config.min_ad_slots, config.max_ad_slots)));
  }
  return eco;
}

std::map<std::string, PageMetrics> expected_metrics(const CrawlRun& run, const Ecosystem& eco) {
  std::map<std::string, PageMetrics> out;
  for (const auto& visit : run.visits) {
    const auto& site = eco.owner_of_host(visit.site_host);
    PageMetrics m;
    std::set<std::string> third;
    for (const auto& req : visit.requests) {
      const auto& owner = eco.owner_of_host(req.host);
      if (owner.kind == OwnerKind::Site && owner.index == site.index) {
        ++m.browsing.fp_requests;
      } else {
        ++m.browsing.tp_requests;
        third.insert(owner.domain);
      }
      m.browsing.bytes_total += req.bytes;
      if (req.resource_class == ResourceClass::Document) m.html.html_bytes = req.bytes;
      if (req.resource_class == ResourceClass::Image) {
        ++m.html.n_images;
        m.html.image_bytes += req.bytes;
      }
      if (req.resource_class == ResourceClass::Script) {
        ++m.html.n_scripts;
        m.html.script_bytes += req.bytes;
      }
    }
    m.browsing.tp_domains = static_cast<std::int64_t>(third.size());
    out[visit.site] = m;
  }
  return out;
}

namespace {

std::int64_t expected_jar_size(const CrawlRun& run, const Ecosystem& eco) {
  std::set<std::string> owners;
  for (const auto& visit : run.visits) {
    for (const auto& req : visit.requests) {
      const auto& owner = eco.owner_of_host(req.host);
      if (owner.uses_cookies) owners.insert(owner.domain);
    }
  }
  return static_cast<std::int64_t>(owners.size());
}

}  // namespace

Corpus generate(const EcosystemConfig& config, int n_runs) {
  if (n_runs < 0) throw Error("generate: negative run count");
  const auto eco = build_ecosystem(config);
  Corpus corpus;
  corpus.truth.site_trackers = eco.site_trackers;
  for (const auto& t : eco.trackers) corpus.truth.tracker_cookies[t.domain] = t.uses_cookies;
  if (n_runs == 0) return corpus;

  CrawlRun first;
  first.config_id = std::string(kBareConfigId);
  first.run_index = 0;
  for (int i = 0; i < config.n_sites; ++i) first.visits.push_back(build_visit(eco, i));
  assign_cookie_state(first, eco);
  corpus.runs.push_back(std::move(first));
  for (int r = 1; r < n_runs; ++r) corpus.runs.push_back(reload(corpus.runs.back(), eco, r));

  for (const auto& run : corpus.runs) {
    for (auto& [site, m] : expected_metrics(run, eco)) corpus.truth.expected[{run.run_index, site}] = m;
    corpus.truth.expected_cookies[run.run_index] = expected_jar_size(run, eco);
  }
  return corpus;
}

CrawlRun perturb_reload(const CrawlRun& run, const EcosystemConfig& config, int reload_index) {
  return reload(run, build_ecosystem(config), reload_index);
}

EntityMap entity_map(const Ecosystem& eco) {
  EntityMap map;
  for (const auto& t : eco.trackers) {
    if (t.index % 7 == 6) continue;
    map.adns[t.domain] = fmt::format("dnsop{:02d}.com", t.index / 3);
  }
  for (const auto& a : eco.ad_networks) map.adns[a.domain] = fmt::format("adns{:02d}.net", a.index / 2);
  for (const auto& c : eco.cdns) {
    map.adns[c.domain] = "hostingdns.com";
    map.cdn_domains.insert(c.domain);
  }
  return map;
}

std::string tracker_rule_list(const Ecosystem& eco, int count, bool with_ads) {
  std::string text = fmt::format("! synthetic list: top {} trackers{}\n", count, with_ads ? " + ad networks" : "");
  for (int j = 0; j < std::min<int>(count, static_cast<int>(eco.trackers.size())); ++j) {
    text += "||" + eco.trackers[static_cast<std::size_t>(j)].domain + "^\n";
  }
  if (with_ads) {
    for (const auto& a : eco.ad_networks) text += "||" + a.domain + "^\n";
  }
  return text;
}

}  // namespace privmeter::synth
