#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>

namespace privmeter {

enum class RuleKind { Normal, Wildcard, Exception };

/// Public Suffix List rules. Immutable once parsed; lookups are const and
/// safe to share between threads.
///
/// Rules are stored as dot-joined label sequences without their `*.` or `!`
/// prefix, one hash set per rule kind.
class SuffixRules {
 public:
  SuffixRules() = default;

  /// Parses the standard `public_suffix_list.dat` syntax. `//` comments and
  /// blank lines are ignored, as are the ICANN/PRIVATE section markers (all
  /// rules are loaded). A `// VERSION:` comment, when present, becomes the
  /// source version. Throws ParseError on lines with embedded whitespace or
  /// empty labels.
  static SuffixRules parse(std::istream& in, std::string source_version = {});
  static SuffixRules parse(std::string_view text, std::string source_version = {});
  static SuffixRules load(const std::string& path);

  /// Adds one rule in list syntax (`com`, `*.ck`, `!www.ck`).
  void add(std::string_view rule);

  bool contains(RuleKind kind, std::string_view labels) const;
  std::size_t size() const { return normal_.size() + wildcard_.size() + exception_.size(); }
  bool empty() const { return size() == 0; }
  const std::string& source_version() const { return source_version_; }

  /// Number of trailing labels of `host` forming its public suffix
  /// (longest matching rule; exceptions win; default rule `*` gives 1).
  /// `host` must already be lowercased and contain no empty label.
  std::size_t suffix_label_count(std::string_view host) const;

 private:
  std::unordered_set<std::string> normal_;
  std::unordered_set<std::string> wildcard_;
  std::unordered_set<std::string> exception_;
  std::string source_version_;
};

/// eTLD+1 of a host: one label plus its public suffix, lowercased.
struct RegistrableDomain {
  std::string value;

  auto operator<=>(const RegistrableDomain&) const = default;
};

/// Registrable domain of `host`, or nullopt when the host is itself a public
/// suffix, is an IP literal, or has an empty label (e.g. a leading dot).
/// Throws std::invalid_argument for an empty host.
std::optional<RegistrableDomain> registrable_domain(std::string_view host, const SuffixRules& rules);

/// Entity identifier for party comparisons: the registrable domain when one
/// exists, otherwise the lowercased host itself (IP literals, bare suffixes).
std::string entity_of(std::string_view host, const SuffixRules& rules);

enum class PartyClass { FirstParty, ThirdParty };

PartyClass classify_party(std::string_view request_host, std::string_view site_host, const SuffixRules& rules);

/// Location of the bundled PSL snapshot: $PRIVMETER_DATA_DIR, then the
/// install prefix, then the source tree.
std::string default_psl_path();

/// Directory holding bundled data files (same search order).
std::string default_data_dir();

}  // namespace privmeter
