#include "privmeter/blocker.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "privmeter/error.hpp"
#include "privmeter/url.hpp"

namespace privmeter {

// ---------------------------------------------------------------------------
// PatternSet

void PatternSet::add(DomainPattern pattern) {
  pattern.value = to_lower_ascii(pattern.value);
  auto& index = pattern.kind == PatternKind::Domain      ? domains_
                : pattern.kind == PatternKind::ExactHost ? hosts_
                                                         : suffixes_;
  if (!index.insert(pattern.value).second) return;
  patterns_.push_back(std::move(pattern));
}

bool PatternSet::matches(std::string_view host, std::string_view domain) const {
  if (patterns_.empty()) return false;
  const std::string h(host);
  if (!domains_.empty() && (domains_.contains(std::string(domain)) || domains_.contains(h))) return true;
  if (hosts_.contains(h)) return true;
  if (!suffixes_.empty()) {
    std::string_view rest = host;
    while (true) {
      if (suffixes_.contains(std::string(rest))) return true;
      const auto dot = rest.find('.');
      if (dot == std::string_view::npos) break;
      rest.remove_prefix(dot + 1);
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Rule list parsing

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_hostname(std::string_view s) {
  if (s.empty() || s.front() == '.' || s.back() == '.' || s.find("..") != std::string_view::npos) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '-' || c == '.' || c == '_' || c >= 0x80;
  });
}

std::optional<DomainPattern> parse_pattern(std::string_view body) {
  if (body.starts_with("||")) {
    body.remove_prefix(2);
    if (body.ends_with('^')) body.remove_suffix(1);
    if (!is_hostname(body)) return std::nullopt;
    return DomainPattern{PatternKind::HostSuffix, to_lower_ascii(body)};
  }
  if (body.size() > 2 && body.starts_with('|') && body.ends_with('|')) {
    body = body.substr(1, body.size() - 2);
    if (!is_hostname(body)) return std::nullopt;
    return DomainPattern{PatternKind::ExactHost, to_lower_ascii(body)};
  }
  if (!is_hostname(body)) return std::nullopt;
  return DomainPattern{PatternKind::Domain, to_lower_ascii(body)};
}

}  // namespace

RuleListParse parse_rule_list(std::string_view text, std::string name) {
  RuleListParse result;
  result.list.name = std::move(name);
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  auto skip = [&] {
    ++result.skipped;
    result.skipped_lines.push_back(line_no);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.starts_with('[')) continue;
    if (line.starts_with('!')) {
      auto directive = to_lower_ascii(trim(line.substr(1)));
      if (directive.starts_with("scope:")) {
        const auto value = trim(std::string_view(directive).substr(6));
        if (value == "all") {
          result.list.party_scope = PartyScope::All;
        } else if (value == "third-party") {
          result.list.party_scope = PartyScope::ThirdPartyOnly;
        } else {
          skip();
        }
      }
      continue;
    }
    if (line.find("##") != std::string_view::npos || line.find("#@#") != std::string_view::npos ||
        line.find("#?#") != std::string_view::npos || line.find('$') != std::string_view::npos) {
      skip();
      continue;
    }
    const bool exception = line.starts_with("@@");
    if (exception) line.remove_prefix(2);
    auto pattern = parse_pattern(line);
    if (!pattern) {
      skip();
      continue;
    }
    (exception ? result.list.exception_rules : result.list.block_rules).add(std::move(*pattern));
  }
  return result;
}

RuleListParse load_rule_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rule list '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_rule_list(buffer.str(), std::filesystem::path(path).stem().string());
}

// ---------------------------------------------------------------------------
// Names

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::NoOp: return "none";
    case PolicyKind::BlockAllThirdParty: return "block_all_third_party";
    case PolicyKind::BlockAllScripts: return "block_all_scripts";
  }
  return "none";
}

std::string_view to_string(CookiePolicyKind kind) {
  switch (kind) {
    case CookiePolicyKind::AllowAll: return "allow_all";
    case CookiePolicyKind::BlockThirdParty: return "block_third_party";
    case CookiePolicyKind::BlockThirdPartyExceptVisited: return "block_third_party_except_visited";
    case CookiePolicyKind::OptOutCookies: return "optout";
  }
  return "allow_all";
}

PolicyKind parse_policy_kind(std::string_view name) {
  for (auto k : {PolicyKind::NoOp, PolicyKind::BlockAllThirdParty, PolicyKind::BlockAllScripts}) {
    if (to_string(k) == name) return k;
  }
  throw Error(fmt::format("unknown policy '{}'", name));
}

CookiePolicyKind parse_cookie_policy_kind(std::string_view name) {
  for (auto k : {CookiePolicyKind::AllowAll, CookiePolicyKind::BlockThirdParty,
                 CookiePolicyKind::BlockThirdPartyExceptVisited, CookiePolicyKind::OptOutCookies}) {
    if (to_string(k) == name) return k;
  }
  throw Error(fmt::format("unknown cookie policy '{}'", name));
}

// ---------------------------------------------------------------------------
// Matching

void HeuristicBlockerState::observe(const std::string& tracker, const std::string& site) {
  auto& sites = prevalence[tracker];
  sites.insert(site);
  if (static_cast<long>(sites.size()) > threshold) blocked.insert(tracker);
}

bool match_request(const BlockerSpec& blocker, const RequestRecord& request, PartyClass party,
                   std::string_view request_domain) {
  switch (blocker.policy) {
    case PolicyKind::BlockAllThirdParty:
      if (party == PartyClass::ThirdParty) return true;
      break;
    case PolicyKind::BlockAllScripts:
      if (request.resource_class == ResourceClass::Script) return true;
      break;
    case PolicyKind::NoOp: break;
  }
  if (blocker.heuristic && party == PartyClass::ThirdParty &&
      blocker.heuristic->blocked.contains(std::string(request_domain))) {
    return true;
  }
  bool listed = false;
  for (const auto& list : blocker.rule_lists) {
    if (list.party_scope == PartyScope::ThirdPartyOnly && party != PartyClass::ThirdParty) continue;
    if (list.block_rules.matches(request.host, request_domain)) {
      listed = true;
      break;
    }
  }
  if (!listed) return false;
  for (const auto& list : blocker.rule_lists) {
    if (list.exception_rules.matches(request.host, request_domain)) return false;
  }
  return true;
}

bool match_request(const BlockerSpec& blocker, const RequestRecord& request, std::string_view site_host,
                   const SuffixRules& rules) {
  const auto domain = entity_of(request.host, rules);
  const auto party = domain == entity_of(site_host, rules) ? PartyClass::FirstParty : PartyClass::ThirdParty;
  return match_request(blocker, request, party, domain);
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

std::string cookie_entity(const CookieEntry& cookie, const SuffixRules& rules) {
  std::string_view domain = cookie.domain;
  if (domain.starts_with('.')) domain.remove_prefix(1);
  return entity_of(domain, rules);
}

struct SetterKey {
  std::string entity;
  bool third_party;
  auto operator<=>(const SetterKey&) const = default;
};

std::vector<ResourceRef> filter_refs(const BlockerSpec& blocker, const std::vector<ResourceRef>& refs,
                                     ResourceClass cls, const std::string& site_entity, const SuffixRules& rules) {
  std::vector<ResourceRef> kept;
  for (const auto& ref : refs) {
    RequestRecord probe;
    probe.url = ref.url;
    probe.host = url_host(ref.url);
    probe.bytes = ref.bytes;
    probe.resource_class = cls;
    const auto domain = entity_of(probe.host, rules);
    const auto party = domain == site_entity ? PartyClass::FirstParty : PartyClass::ThirdParty;
    if (!match_request(blocker, probe, party, domain)) kept.push_back(ref);
  }
  return kept;
}

}  // namespace

CrawlRun apply_blocker(BlockerSpec& blocker, const CrawlRun& raw, const SuffixRules& rules) {
  CrawlRun out;
  out.config_id = blocker.id;
  out.run_index = raw.run_index;
  out.visits.reserve(raw.visits.size());

  std::set<SetterKey> raw_setters;
  std::set<SetterKey> kept_setters;
  std::map<std::string, std::size_t> first_visit_as_site;
  std::map<std::string, std::size_t> first_third_party_set;

  for (std::size_t v = 0; v < raw.visits.size(); ++v) {
    const auto& visit = raw.visits[v];
    const auto site_entity = entity_of(visit.site_host, rules);
    first_visit_as_site.emplace(site_entity, v);

    SiteVisit filtered;
    filtered.site = visit.site;
    filtered.site_host = visit.site_host;
    filtered.html.doc_bytes = visit.html.doc_bytes;
    std::vector<std::string> cookie_readers;

    for (const auto& req : visit.requests) {
      const auto domain = entity_of(req.host, rules);
      const bool third = domain != site_entity;
      if (req.sets_cookie) raw_setters.insert({domain, third});
      if (match_request(blocker, req, third ? PartyClass::ThirdParty : PartyClass::FirstParty, domain)) continue;
      if (req.sets_cookie) {
        kept_setters.insert({domain, third});
        if (third) first_third_party_set.emplace(domain, v);
      }
      if (third && req.reads_cookie) cookie_readers.push_back(domain);
      filtered.requests.push_back(req);
    }
    filtered.html.image_refs = filter_refs(blocker, visit.html.image_refs, ResourceClass::Image, site_entity, rules);
    filtered.html.script_refs = filter_refs(blocker, visit.html.script_refs, ResourceClass::Script, site_entity, rules);

    // The heuristic learns at visit granularity: what it sees here only
    // affects later visits.
    if (blocker.heuristic) {
      for (const auto& tracker : cookie_readers) blocker.heuristic->observe(tracker, site_entity);
    }
    out.visits.push_back(std::move(filtered));
  }

  const auto& policy = blocker.cookie_policy;
  std::set<std::string> opted_out;
  for (const auto& cookie : raw.cookie_jar) {
    const auto entity = cookie_entity(cookie, rules);
    if (policy.kind == CookiePolicyKind::OptOutCookies && policy.optout_domains.contains(entity)) {
      opted_out.insert(entity);
      continue;
    }
    const SetterKey key{entity, cookie.third_party_origin};
    // Dropped only when every logged setter was blocked; cookies with no
    // logged setter (script-set) are kept.
    const bool survives = kept_setters.contains(key) || !raw_setters.contains(key);
    if (!survives) continue;
    if (cookie.third_party_origin) {
      if (policy.kind == CookiePolicyKind::BlockThirdParty) continue;
      if (policy.kind == CookiePolicyKind::BlockThirdPartyExceptVisited) {
        const auto visited = first_visit_as_site.find(entity);
        const auto set_at = first_third_party_set.find(entity);
        const bool visited_before = visited != first_visit_as_site.end() &&
                                    (set_at == first_third_party_set.end() || visited->second < set_at->second);
        if (!visited_before) continue;
      }
    }
    out.cookie_jar.insert(cookie);
  }
  for (const auto& domain : opted_out) {
    out.cookie_jar.insert(CookieEntry{domain, std::string(kOptOutCookieName), true});
  }
  return out;
}

BlockerSpec train_heuristic(BlockerSpec blocker, const CrawlRun& corpus, int passes, const SuffixRules& rules) {
  if (!blocker.heuristic) throw Error(fmt::format("blocker '{}' has no heuristic to train", blocker.id));
  if (passes < 0) throw Error("training passes must be non-negative");
  for (int pass = 0; pass < passes; ++pass) apply_blocker(blocker, corpus, rules);
  return blocker;
}

// ---------------------------------------------------------------------------
// Roster

std::vector<BlockerSpec> parse_roster(std::string_view text, const std::string& base_dir) {
  namespace fs = std::filesystem;
  using nlohmann::json;
  std::vector<BlockerSpec> roster;
  std::set<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.starts_with('#')) continue;
    try {
      const auto record = json::parse(line);
      BlockerSpec spec;
      spec.id = record.at("id").get<std::string>();
      if (spec.id.empty()) throw Error("field 'id': empty");
      if (!ids.insert(spec.id).second) throw Error(fmt::format("field 'id': duplicate '{}'", spec.id));
      if (auto it = record.find("lists"); it != record.end()) {
        for (const auto& rel : *it) {
          auto path = fs::path(rel.get<std::string>());
          if (path.is_relative()) path = fs::path(base_dir) / path;
          spec.rule_lists.push_back(load_rule_list(path.string()).list);
        }
      }
      if (auto it = record.find("rules"); it != record.end()) {
        std::string joined;
        for (const auto& rule : *it) joined += rule.get<std::string>() + "\n";
        spec.rule_lists.push_back(parse_rule_list(joined, spec.id + "-inline").list);
      }
      if (auto it = record.find("scope"); it != record.end()) {
        const auto scope = it->get<std::string>();
        if (scope != "all" && scope != "third-party") throw Error(fmt::format("field 'scope': unknown '{}'", scope));
        for (auto& list : spec.rule_lists) {
          list.party_scope = scope == "all" ? PartyScope::All : PartyScope::ThirdPartyOnly;
        }
      }
      spec.policy = parse_policy_kind(record.value("policy", std::string("none")));
      spec.cookie_policy.kind = parse_cookie_policy_kind(record.value("cookie_policy", std::string("allow_all")));
      if (auto it = record.find("optout_domains"); it != record.end()) {
        if (spec.cookie_policy.kind != CookiePolicyKind::OptOutCookies) {
          throw Error("field 'optout_domains': only valid with cookie_policy 'optout'");
        }
        for (const auto& d : *it) spec.cookie_policy.optout_domains.insert(to_lower_ascii(d.get<std::string>()));
      }
      if (auto it = record.find("heuristic"); it != record.end()) {
        HeuristicBlockerState state;
        state.threshold = it->value("threshold", 3);
        spec.heuristic = std::move(state);
      }
      spec.training_passes = record.value("training_passes", 0);
      if (spec.training_passes < 0) throw Error("field 'training_passes': negative");
      if (spec.training_passes > 0 && !spec.heuristic) {
        throw Error("field 'training_passes': blocker has no heuristic");
      }
      roster.push_back(std::move(spec));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, fmt::format("roster: {}", e.what()));
    }
  }
  return roster;
}

std::vector<BlockerSpec> load_roster(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open blocker roster '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_roster(buffer.str(), std::filesystem::path(path).parent_path().string());
}

std::vector<CrawlRun> simulate(const std::vector<BlockerSpec>& roster, const std::vector<CrawlRun>& bare,
                               const SuffixRules& rules, unsigned jobs) {
  std::vector<std::vector<CrawlRun>> per_blocker(roster.size());
  std::vector<std::exception_ptr> errors(roster.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t b = next++; b < roster.size(); b = next++) try {
      BlockerSpec trained = roster[b];
      if (trained.heuristic && trained.training_passes > 0 && !bare.empty()) {
        trained = train_heuristic(std::move(trained), bare.front(), trained.training_passes, rules);
      }
      auto& out = per_blocker[b];
      for (const auto& run : bare) {
        BlockerSpec instance = trained;
        out.push_back(apply_blocker(instance, run, rules));
      }
    } catch (...) {
      errors[b] = std::current_exception();
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(roster.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < jobs; ++i) pool.emplace_back(worker);
  }
  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
  std::vector<CrawlRun> result;
  for (auto& runs : per_blocker) {
    for (auto& run : runs) result.push_back(std::move(run));
  }
  return result;
}

}  // namespace privmeter
