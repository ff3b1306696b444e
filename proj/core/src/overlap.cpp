#include "privmeter/overlap.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "privmeter/error.hpp"
#include "privmeter/url.hpp"

namespace privmeter {

std::string_view to_string(BlockedKind kind) { return kind == BlockedKind::Requests ? "requests" : "domains"; }

BlockedKind parse_blocked_kind(std::string_view name) {
  if (name == "requests") return BlockedKind::Requests;
  if (name == "domains") return BlockedKind::Domains;
  throw Error(fmt::format("unknown overlap kind '{}'", name));
}

namespace {

struct Resources {
  std::set<std::string> sites;
  std::set<std::string> members;
};

Resources third_party_resources(const std::vector<CrawlRun>& runs, BlockedKind kind, const SuffixRules& rules) {
  Resources out;
  for (const auto& run : runs) {
    for (const auto& visit : run.visits) {
      out.sites.insert(visit.site);
      const auto site = entity_of(visit.site_host, rules);
      for (const auto& req : visit.requests) {
        auto domain = entity_of(req.host, rules);
        if (domain == site) continue;
        out.members.insert(kind == BlockedKind::Domains ? std::move(domain) : normalize_request_url(req.url));
      }
    }
  }
  return out;
}

}  // namespace

BlockedSet blocked_set(const std::vector<CrawlRun>& bare, const std::vector<CrawlRun>& protected_runs,
                       BlockedKind kind, const SuffixRules& rules) {
  const auto before = third_party_resources(bare, kind, rules);
  const auto after = third_party_resources(protected_runs, kind, rules);
  if (std::none_of(before.sites.begin(), before.sites.end(), [&](const auto& s) { return after.sites.contains(s); })) {
    throw Error("blocked_set: bare and protected runs share no site");
  }
  BlockedSet set;
  set.kind = kind;
  if (!protected_runs.empty()) set.technique = protected_runs.front().config_id;
  std::set_difference(before.members.begin(), before.members.end(), after.members.begin(), after.members.end(),
                      std::inserter(set.members, set.members.end()));
  return set;
}

OverlapMatrix overlap_matrix(const std::vector<BlockedSet>& sets) {
  if (sets.size() < 2) throw Error("overlap_matrix: need at least two blocked sets");
  OverlapMatrix m;
  m.kind = sets.front().kind;
  for (const auto& s : sets) {
    if (s.kind != m.kind) throw Error("overlap_matrix: blocked sets mix requests and domains");
    if (m.sizes.contains(s.technique)) throw Error(fmt::format("overlap_matrix: duplicate technique '{}'", s.technique));
    m.techniques.push_back(s.technique);
    m.sizes[s.technique] = s.members.size();
  }
  for (const auto& a : sets) {
    for (const auto& b : sets) {
      std::size_t common = 0;
      for (const auto& x : a.members) common += b.members.contains(x);
      m.pairwise[{a.technique, b.technique}] = common;
    }
    std::size_t only = 0;
    for (const auto& x : a.members) {
      const bool elsewhere = std::any_of(sets.begin(), sets.end(), [&](const BlockedSet& other) {
        return &other != &a && other.members.contains(x);
      });
      only += !elsewhere;
    }
    m.unique[a.technique] = only;
  }
  return m;
}

std::vector<OverlapCell> render_overlap_data(const OverlapMatrix& matrix) {
  std::vector<OverlapCell> cells;
  for (const auto& row : matrix.techniques) {
    cells.push_back({row, "*", matrix.sizes.at(row), 0.0});
    for (const auto& col : matrix.techniques) {
      const auto value = row == col ? matrix.unique.at(row) : matrix.pairwise.at({row, col});
      cells.push_back({row, col, value, 0.0});
    }
  }
  std::size_t max = 0;
  for (const auto& c : cells) max = std::max(max, c.value);
  if (max > 0) {
    for (auto& c : cells) c.side_length = std::sqrt(static_cast<double>(c.value) / static_cast<double>(max));
  }
  return cells;
}

}  // namespace privmeter
