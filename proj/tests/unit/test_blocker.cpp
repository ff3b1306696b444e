#include <gtest/gtest.h>

#include <functional>

#include "builders.hpp"
#include "privmeter/blocker.hpp"
#include "privmeter/error.hpp"
#include "privmeter/metrics.hpp"
#include "privmeter/rng.hpp"
#include "privmeter/synth.hpp"

using namespace privmeter;
namespace t = privmeter::testing;

namespace {

BlockerSpec list_blocker(const std::string& text, const std::string& id = "list") {
  BlockerSpec b;
  b.id = id;
  b.rule_lists.push_back(parse_rule_list(text, id).list);
  return b;
}

BlockerSpec heuristic_blocker(int threshold = 3) {
  BlockerSpec b;
  b.id = "heur";
  b.heuristic = HeuristicBlockerState{};
  b.heuristic->threshold = threshold;
  return b;
}

// Site i embeds a cookie-reading tracker.net pixel when `embeds(i)`.
CrawlRun tracker_corpus(int n_sites, const std::function<bool(int)>& embeds) {
  std::vector<SiteVisit> visits;
  for (int i = 0; i < n_sites; ++i) {
    std::vector<RequestRecord> extra;
    if (embeds(i)) extra.push_back(t::req("https://px.tracker.net/p.gif", 43, ResourceClass::Image, true, true));
    visits.push_back(t::visit("site" + std::to_string(i) + ".com", std::move(extra)));
  }
  return t::run("bare", 0, std::move(visits), {{"tracker.net", "uid", true}});
}

bool has_host(const SiteVisit& v, const std::string& host) {
  return std::any_of(v.requests.begin(), v.requests.end(), [&](const RequestRecord& r) { return r.host == host; });
}

}  // namespace

TEST(RuleListParse, HostSuffixRule) {
  const auto p = parse_rule_list("||tracker.net^");
  ASSERT_EQ(p.list.block_rules.size(), 1u);
  EXPECT_EQ(p.list.block_rules.patterns()[0], (DomainPattern{PatternKind::HostSuffix, "tracker.net"}));
  EXPECT_EQ(p.skipped, 0u);
}

TEST(RuleListParse, ExceptionRule) {
  const auto p = parse_rule_list("@@||cdn.net^");
  EXPECT_TRUE(p.list.block_rules.empty());
  ASSERT_EQ(p.list.exception_rules.size(), 1u);
  EXPECT_EQ(p.list.exception_rules.patterns()[0].value, "cdn.net");
}

TEST(RuleListParse, CosmeticLineSkipped) {
  const auto p = parse_rule_list("ads.example.com\n##.banner");
  EXPECT_EQ(p.list.block_rules.size(), 1u);
  EXPECT_EQ(p.skipped, 1u);
  EXPECT_EQ(p.skipped_lines, std::vector<std::size_t>{2});
}

TEST(RuleListParse, SubsetDetails) {
  const auto p = parse_rule_list(
      "[Adblock Plus 2.0]\n! comment\n! scope: all\n|Exact.Host.com|\nTracker.NET\n||a.b^$script\n/ads/*\n#@#.x\n");
  EXPECT_EQ(p.list.party_scope, PartyScope::All);
  EXPECT_EQ(p.list.block_rules.patterns(),
            (std::vector<DomainPattern>{{PatternKind::ExactHost, "exact.host.com"}, {PatternKind::Domain, "tracker.net"}}));
  EXPECT_EQ(p.skipped, 3u);
  EXPECT_EQ(parse_rule_list("").list.party_scope, PartyScope::ThirdPartyOnly);
}

TEST(MatchRequest, PolicyExamples) {
  BlockerSpec b;
  b.policy = PolicyKind::BlockAllThirdParty;
  const auto tp = t::req("https://x.tracker.net/a");
  EXPECT_TRUE(match_request(b, tp, PartyClass::ThirdParty, "tracker.net"));
  EXPECT_FALSE(match_request(b, tp, PartyClass::FirstParty, "tracker.net"));
  b.policy = PolicyKind::BlockAllScripts;
  EXPECT_TRUE(match_request(b, t::req("https://a.com/x.js", 1, ResourceClass::Script), PartyClass::FirstParty, "a.com"));
  EXPECT_FALSE(match_request(b, t::req("https://a.com/x.png", 1, ResourceClass::Image), PartyClass::ThirdParty, "a.com"));
  b.policy = PolicyKind::NoOp;
  EXPECT_FALSE(match_request(b, tp, PartyClass::ThirdParty, "tracker.net"));
}

TEST(MatchRequest, ListExamples) {
  const auto b = list_blocker("tracker.net\n@@safe.tracker.net");
  EXPECT_TRUE(match_request(b, t::req("https://a.tracker.net/x"), PartyClass::ThirdParty, "tracker.net"));
  EXPECT_FALSE(match_request(b, t::req("https://safe.tracker.net/x"), PartyClass::ThirdParty, "tracker.net"));
  // Third-party scope leaves first-party loads alone.
  EXPECT_FALSE(match_request(b, t::req("https://a.tracker.net/x"), PartyClass::FirstParty, "tracker.net"));
}

TEST(MatchRequest, ShapesAndScope) {
  auto b = list_blocker("||ads.example.com^\n|px.other.org|");
  const auto rules = t::tiny_rules();
  EXPECT_TRUE(match_request(b, t::req("https://ads.example.com/"), "site.com", rules));
  EXPECT_TRUE(match_request(b, t::req("https://x.ads.example.com/"), "site.com", rules));
  EXPECT_FALSE(match_request(b, t::req("https://example.com/"), "site.com", rules));
  EXPECT_FALSE(match_request(b, t::req("https://badads.example.com/"), "site.com", rules));
  EXPECT_TRUE(match_request(b, t::req("https://px.other.org/"), "site.com", rules));
  EXPECT_FALSE(match_request(b, t::req("https://a.px.other.org/"), "site.com", rules));
  b.rule_lists[0].party_scope = PartyScope::All;
  EXPECT_TRUE(match_request(b, t::req("https://ads.example.com/"), "www.example.com", rules));
}

TEST(MatchRequest, ExceptionsSpanListsButNotPolicy) {
  BlockerSpec b;
  b.rule_lists.push_back(parse_rule_list("||tracker.net^").list);
  b.rule_lists.push_back(parse_rule_list("@@||good.tracker.net^").list);
  const auto good = t::req("https://good.tracker.net/");
  EXPECT_FALSE(match_request(b, good, PartyClass::ThirdParty, "tracker.net"));
  b.policy = PolicyKind::BlockAllThirdParty;
  EXPECT_TRUE(match_request(b, good, PartyClass::ThirdParty, "tracker.net"));
}

TEST(ApplyBlocker, NoOpIsIdentityExceptId) {
  const auto corpus = synth::generate({}, 1).runs[0];
  BlockerSpec noop;
  noop.id = "noop";
  auto out = apply_blocker(noop, corpus, t::bundled_rules());
  EXPECT_EQ(out.config_id, "noop");
  out.config_id = corpus.config_id;
  EXPECT_EQ(out, corpus);
}

TEST(ApplyBlocker, BlockAllThirdPartyLeavesOnlyFirstParty) {
  const auto corpus = synth::generate({}, 1).runs[0];
  BlockerSpec b;
  b.id = "b3p";
  b.policy = PolicyKind::BlockAllThirdParty;
  const auto out = apply_blocker(b, corpus, t::bundled_rules());
  const auto totals = run_totals(out, t::bundled_rules());
  EXPECT_EQ(totals.browsing.tp_requests, 0);
  EXPECT_EQ(totals.browsing.fp_requests, run_totals(corpus, t::bundled_rules()).browsing.fp_requests);
  for (const auto& c : out.cookie_jar) EXPECT_FALSE(c.third_party_origin) << c.domain;
}

TEST(ApplyBlocker, BlockedRequestsTakeHtmlRefsWithThem) {
  auto v = t::visit("site.com", {t::req("https://cdn.tracker.net/t.js", 500, ResourceClass::Script),
                                 t::req("https://site.com/logo.png", 200, ResourceClass::Image)});
  v.html.script_refs = {{"https://cdn.tracker.net/t.js", 500}};
  v.html.image_refs = {{"https://site.com/logo.png", 200}};
  auto b = list_blocker("||tracker.net^");
  const auto out = apply_blocker(b, t::run("bare", 0, {v}), t::tiny_rules());
  EXPECT_TRUE(out.visits[0].html.script_refs.empty());
  EXPECT_EQ(out.visits[0].html.image_refs.size(), 1u);
  EXPECT_EQ(out.visits[0].requests.size(), 2u);
}

TEST(ApplyBlocker, HeuristicBlocksStrictlyAfterThreshold) {
  // tracker.net reads cookies as a third party on sites 1..5 (indices 0..4).
  const auto corpus = tracker_corpus(6, [](int) { return true; });
  auto b = heuristic_blocker();
  const auto out = apply_blocker(b, corpus, t::tiny_rules());
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(has_host(out.visits[i], "px.tracker.net")) << i;
  for (int i = 4; i < 6; ++i) EXPECT_FALSE(has_host(out.visits[i], "px.tracker.net")) << i;
  EXPECT_TRUE(b.heuristic->blocked.contains("tracker.net"));
  EXPECT_EQ(b.heuristic->prevalence["tracker.net"].size(), 4u);
}

TEST(TrainHeuristic, Examples) {
  const auto rules = t::tiny_rules();
  const auto four = tracker_corpus(8, [](int i) { return i % 2 == 0; });
  const auto two = tracker_corpus(8, [](int i) { return i < 2; });
  auto zero = train_heuristic(heuristic_blocker(), four, 0, rules);
  EXPECT_EQ(zero, heuristic_blocker());
  EXPECT_TRUE(train_heuristic(heuristic_blocker(), four, 1, rules).heuristic->blocked.contains("tracker.net"));
  EXPECT_FALSE(train_heuristic(heuristic_blocker(), two, 5, rules).heuristic->blocked.contains("tracker.net"));
  const auto three = tracker_corpus(8, [](int i) { return i < 3; });
  EXPECT_FALSE(train_heuristic(heuristic_blocker(), three, 3, rules).heuristic->blocked.contains("tracker.net"));
  BlockerSpec plain;
  EXPECT_THROW(train_heuristic(plain, four, 1, rules), Error);
}

TEST(TrainHeuristic, StableAfterOnePass) {
  const auto corpus = synth::generate({}, 1).runs[0];
  const auto once = train_heuristic(heuristic_blocker(), corpus, 1, t::bundled_rules());
  const auto twice = train_heuristic(once, corpus, 1, t::bundled_rules());
  EXPECT_FALSE(once.heuristic->blocked.empty());
  EXPECT_EQ(once.heuristic->blocked, twice.heuristic->blocked);
}

TEST(CookiePolicies, ThirdPartyBlockingVariants) {
  const auto rules = t::tiny_rules();
  // tracker.net sets a cookie on site0 and is visited directly afterwards;
  // shop.com is visited first and later sets a third-party cookie.
  std::vector<SiteVisit> visits{
      t::visit("shop.com"),
      t::visit("site0.com", {t::req("https://px.tracker.net/p", 1, ResourceClass::Image, true),
                             t::req("https://w.shop.com/p", 1, ResourceClass::Image, true)}),
      t::visit("tracker.net"),
  };
  const CookieJar jar{{"tracker.net", "uid", true}, {"shop.com", "uid", true}, {"site0.com", "session", false}};
  const auto raw = t::run("bare", 0, visits, jar);

  BlockerSpec b;
  b.cookie_policy.kind = CookiePolicyKind::BlockThirdParty;
  EXPECT_EQ(apply_blocker(b, raw, rules).cookie_jar, (CookieJar{{"site0.com", "session", false}}));

  b.cookie_policy.kind = CookiePolicyKind::BlockThirdPartyExceptVisited;
  EXPECT_EQ(apply_blocker(b, raw, rules).cookie_jar,
            (CookieJar{{"shop.com", "uid", true}, {"site0.com", "session", false}}));

  b.cookie_policy.kind = CookiePolicyKind::OptOutCookies;
  b.cookie_policy.optout_domains = {"tracker.net"};
  const auto jar_out = apply_blocker(b, raw, rules).cookie_jar;
  EXPECT_EQ(jar_out.size(), 3u);
  EXPECT_TRUE(jar_out.contains({"tracker.net", std::string(kOptOutCookieName), true}));
  EXPECT_FALSE(jar_out.contains({"tracker.net", "uid", true}));
}

TEST(CookiePolicies, BlockedSetterRemovesCookie) {
  const auto raw = tracker_corpus(2, [](int i) { return i == 0; });
  auto b = list_blocker("||tracker.net^");
  EXPECT_TRUE(apply_blocker(b, raw, t::tiny_rules()).cookie_jar.empty());
}

TEST(BlockerProperties, IdempotentAndFirstPartyPreserving) {
  const auto rules = t::bundled_rules();
  const auto corpus = synth::generate({}, 1).runs[0];
  auto b = list_blocker(synth::tracker_rule_list(synth::build_ecosystem({}), 30, true));
  auto once = apply_blocker(b, corpus, rules);
  auto twice = apply_blocker(b, once, rules);
  EXPECT_EQ(once, twice);
  BlockerSpec b3p;
  b3p.id = b.id;
  b3p.policy = PolicyKind::BlockAllThirdParty;
  const auto fp_bare = run_totals(corpus, rules).browsing.fp_requests;
  EXPECT_EQ(run_totals(once, rules).browsing.fp_requests, fp_bare);
  EXPECT_EQ(run_totals(apply_blocker(b3p, corpus, rules), rules).browsing.fp_requests, fp_bare);
}

TEST(BlockerProperties, RandomListsNeverIncreaseMetrics) {
  const auto rules = t::bundled_rules();
  synth::EcosystemConfig config;
  config.n_sites = 30;
  const auto corpus = synth::generate(config, 1).runs[0];
  const auto eco = synth::build_ecosystem(config);
  const auto bare = per_site_means({corpus}, rules);
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    std::string text;
    for (const auto& tr : eco.trackers) {
      if (rng.bernoulli(0.3)) text += (rng.bernoulli(0.5) ? "||" + tr.domain + "^" : tr.domain) + "\n";
    }
    auto b = list_blocker(text);
    const auto out = per_site_means({apply_blocker(b, corpus, rules)}, rules);
    for (const auto& [site, m] : out) {
      for (auto metric : kAllMetrics) EXPECT_LE(m.get(metric), bare.at(site).get(metric)) << site;
    }
  }
}

TEST(Roster, ParsesAllFields) {
  const auto roster = parse_roster(
      "# comment\n"
      R"({"id":"a","rules":["||t.net^"],"scope":"all","policy":"block_all_scripts"})" "\n"
      R"({"id":"h","heuristic":{"threshold":5},"training_passes":2})" "\n"
      R"({"id":"o","cookie_policy":"optout","optout_domains":["T.net"]})" "\n",
      ".");
  ASSERT_EQ(roster.size(), 3u);
  EXPECT_EQ(roster[0].policy, PolicyKind::BlockAllScripts);
  EXPECT_EQ(roster[0].rule_lists.at(0).party_scope, PartyScope::All);
  EXPECT_EQ(roster[1].heuristic->threshold, 5);
  EXPECT_EQ(roster[1].training_passes, 2);
  EXPECT_EQ(roster[2].cookie_policy.optout_domains, std::set<std::string>{"t.net"});
}

TEST(Roster, ErrorsCarryLine) {
  EXPECT_THROW(parse_roster(R"({"id":"a"})" "\n" R"({"id":"a"})", "."), ParseError);
  EXPECT_THROW(parse_roster(R"({"id":"a","policy":"nope"})", "."), ParseError);
  EXPECT_THROW(parse_roster(R"({"id":"a","training_passes":1})", "."), ParseError);
  EXPECT_THROW(parse_roster(R"({"id":"a","optout_domains":["x.com"]})", "."), ParseError);
  try {
    parse_roster("\n" R"({"id":"a","lists":["/nonexistent/list.txt"]})", ".");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Simulate, ParallelMatchesSequentialAndOrder) {
  const auto bare = synth::generate({}, 3).runs;
  const auto roster = load_roster(t::data_dir() + "/examples/roster.jsonl");
  const auto seq = simulate(roster, bare, t::bundled_rules(), 1);
  const auto par = simulate(roster, bare, t::bundled_rules(), 4);
  EXPECT_EQ(seq, par);
  ASSERT_EQ(seq.size(), roster.size() * bare.size());
  EXPECT_EQ(seq[0].config_id, roster[0].id);
  EXPECT_EQ(seq[2].run_index, 2);
}
