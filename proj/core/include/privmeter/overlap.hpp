#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "privmeter/crawl.hpp"
#include "privmeter/psl.hpp"

namespace privmeter {

enum class BlockedKind { Requests, Domains };

std::string_view to_string(BlockedKind kind);
BlockedKind parse_blocked_kind(std::string_view name);

struct BlockedSet {
  std::string technique;
  BlockedKind kind = BlockedKind::Domains;
  std::set<std::string> members;  // normalized URLs or registrable domains

  bool operator==(const BlockedSet&) const = default;
};

/// Third-party resources seen in any bare run but in no protected run.
/// Request identity is host + path (see normalize_request_url). Throws
/// privmeter::Error when the two run sets share no site.
BlockedSet blocked_set(const std::vector<CrawlRun>& bare, const std::vector<CrawlRun>& protected_runs,
                       BlockedKind kind, const SuffixRules& rules);

struct OverlapMatrix {
  BlockedKind kind = BlockedKind::Domains;
  std::vector<std::string> techniques;  // input order
  std::map<std::string, std::size_t> sizes;
  std::map<std::pair<std::string, std::string>, std::size_t> pairwise;  // every ordered pair, diagonal = size
  std::map<std::string, std::size_t> unique;

  bool operator==(const OverlapMatrix&) const = default;
};

/// Throws privmeter::Error for fewer than two sets, mixed kinds or repeated techniques.
OverlapMatrix overlap_matrix(const std::vector<BlockedSet>& sets);

struct OverlapCell {
  std::string row;
  std::string col;  // "*" for the row total |B_row|
  std::size_t value = 0;
  double side_length = 0.0;  // sqrt(value / max), so square surface encodes the count

  bool operator==(const OverlapCell&) const = default;
};

/// One cell per (row, col): intersections off the diagonal, the
/// row-exclusive count on it, plus the row total. Side lengths are scaled
/// by the largest value in the table.
std::vector<OverlapCell> render_overlap_data(const OverlapMatrix& matrix);

}  // namespace privmeter
