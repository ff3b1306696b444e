#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "privmeter/crawl.hpp"
#include "privmeter/psl.hpp"

namespace privmeter {

// ---------------------------------------------------------------------------
// Rule lists

enum class PatternKind {
  Domain,      // bare `example.com`: that registrable domain (or that exact host)
  ExactHost,   // `|host|`
  HostSuffix,  // `||example.com^`: the host and every subdomain
};

struct DomainPattern {
  PatternKind kind = PatternKind::Domain;
  std::string value;  // lowercase

  bool operator==(const DomainPattern&) const = default;
};

/// Insertion-ordered pattern collection with hashed lookup per kind.
class PatternSet {
 public:
  void add(DomainPattern pattern);

  /// `host` is the request host, `domain` its entity (registrable domain).
  bool matches(std::string_view host, std::string_view domain) const;

  const std::vector<DomainPattern>& patterns() const { return patterns_; }
  std::size_t size() const { return patterns_.size(); }
  bool empty() const { return patterns_.empty(); }

  bool operator==(const PatternSet& other) const { return patterns_ == other.patterns_; }

 private:
  std::vector<DomainPattern> patterns_;
  std::unordered_set<std::string> domains_;
  std::unordered_set<std::string> hosts_;
  std::unordered_set<std::string> suffixes_;
};

enum class PartyScope { ThirdPartyOnly, All };

struct RuleList {
  std::string name;
  PatternSet block_rules;
  PatternSet exception_rules;
  PartyScope party_scope = PartyScope::ThirdPartyOnly;

  bool operator==(const RuleList&) const = default;
};

struct RuleListParse {
  RuleList list;
  std::size_t skipped = 0;                // unsupported lines (cosmetic, `$` options, regexes)
  std::vector<std::size_t> skipped_lines;  // 1-based
};

/// Parses the domain-level filter subset:
///   `! comment`, `[Adblock ...]` header  -> ignored
///   `! scope: all` / `! scope: third-party` -> sets party_scope
///   `||example.com^`                    -> host-suffix rule
///   `|host.example.com|`                -> exact-host rule
///   `example.com`                       -> registrable-domain rule
///   `@@` prefix                         -> exception of the same shape
/// Cosmetic rules (`##`, `#@#`), option suffixes (`$...`) and anything that
/// is not a plain hostname are skipped and counted, never fatal.
RuleListParse parse_rule_list(std::string_view text, std::string name = {});
RuleListParse load_rule_list(const std::string& path);

// ---------------------------------------------------------------------------
// Blockers

enum class PolicyKind { NoOp, BlockAllThirdParty, BlockAllScripts };

enum class CookiePolicyKind { AllowAll, BlockThirdParty, BlockThirdPartyExceptVisited, OptOutCookies };

struct CookiePolicy {
  CookiePolicyKind kind = CookiePolicyKind::AllowAll;
  std::set<std::string> optout_domains;  // only for OptOutCookies

  bool operator==(const CookiePolicy&) const = default;
};

/// Name given to the single cookie that replaces an opted-out domain's jar entries.
inline constexpr std::string_view kOptOutCookieName = "optout";

/// Cookie-prevalence heuristic: a third party is blocked once it has read a
/// cookie as a third party on more than `threshold` distinct sites.
struct HeuristicBlockerState {
  std::map<std::string, std::set<std::string>> prevalence;  // tracker -> sites
  std::set<std::string> blocked;
  int threshold = 3;

  /// Records that `tracker` read a cookie while embedded in `site`.
  void observe(const std::string& tracker, const std::string& site);

  bool operator==(const HeuristicBlockerState&) const = default;
};

struct BlockerSpec {
  std::string id;
  std::vector<RuleList> rule_lists;
  PolicyKind policy = PolicyKind::NoOp;
  CookiePolicy cookie_policy;
  std::optional<HeuristicBlockerState> heuristic;
  int training_passes = 0;  // passes over the first bare run before measuring

  bool operator==(const BlockerSpec&) const = default;
};

std::string_view to_string(PolicyKind kind);
std::string_view to_string(CookiePolicyKind kind);
PolicyKind parse_policy_kind(std::string_view name);
CookiePolicyKind parse_cookie_policy_kind(std::string_view name);

/// Whether `blocker` suppresses `request` given its party and entity.
bool match_request(const BlockerSpec& blocker, const RequestRecord& request, PartyClass party,
                   std::string_view request_domain);

/// Convenience overload that classifies the request against `site_host`.
bool match_request(const BlockerSpec& blocker, const RequestRecord& request, std::string_view site_host,
                   const SuffixRules& rules);

/// Filters a bare run through `blocker`. Blocked requests and the HTML refs
/// they back are removed and the cookie jar is reconciled with what still
/// loads and with the cookie policy. Heuristic state is read and updated in
/// visit order, so `blocker` is modified when it carries one.
CrawlRun apply_blocker(BlockerSpec& blocker, const CrawlRun& raw, const SuffixRules& rules);

/// Runs `passes` sequential applications over `corpus`, carrying the
/// heuristic state, and returns the trained blocker. Throws privmeter::Error
/// when `blocker` has no heuristic.
BlockerSpec train_heuristic(BlockerSpec blocker, const CrawlRun& corpus, int passes, const SuffixRules& rules);

/// Reads a blocker roster: one JSON object per line. Rule list paths are
/// resolved relative to the roster file.
std::vector<BlockerSpec> load_roster(const std::string& path);
std::vector<BlockerSpec> parse_roster(std::string_view text, const std::string& base_dir);

/// Simulates every blocker on every bare run. Heuristic blockers are first
/// trained for `training_passes` passes over the first run; each measured
/// run then starts from that trained state. Work is spread over `jobs`
/// threads across blockers; output order is roster order, then run order.
std::vector<CrawlRun> simulate(const std::vector<BlockerSpec>& roster, const std::vector<CrawlRun>& bare,
                               const SuffixRules& rules, unsigned jobs = 1);

}  // namespace privmeter
