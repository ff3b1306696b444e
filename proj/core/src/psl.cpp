#include "privmeter/psl.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "privmeter/error.hpp"
#include "privmeter/url.hpp"

namespace privmeter {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool has_empty_label(std::string_view labels) {
  return labels.empty() || labels.front() == '.' || labels.back() == '.' ||
         labels.find("..") != std::string_view::npos;
}

// Byte offsets of each label start, left to right.
std::vector<std::size_t> label_starts(std::string_view host) {
  std::vector<std::size_t> starts{0};
  for (std::size_t i = 0; i < host.size(); ++i) {
    if (host[i] == '.') starts.push_back(i + 1);
  }
  return starts;
}

}  // namespace

void SuffixRules::add(std::string_view rule) {
  RuleKind kind = RuleKind::Normal;
  if (rule.starts_with('!')) {
    kind = RuleKind::Exception;
    rule.remove_prefix(1);
  } else if (rule.starts_with("*.")) {
    kind = RuleKind::Wildcard;
    rule.remove_prefix(2);
  }
  if (rule.starts_with('.')) rule.remove_prefix(1);
  if (has_empty_label(rule)) throw Error(fmt::format("empty label in rule '{}'", rule));
  auto labels = to_lower_ascii(rule);
  switch (kind) {
    case RuleKind::Normal: normal_.insert(std::move(labels)); break;
    case RuleKind::Wildcard: wildcard_.insert(std::move(labels)); break;
    case RuleKind::Exception: exception_.insert(std::move(labels)); break;
  }
}

SuffixRules SuffixRules::parse(std::istream& in, std::string source_version) {
  SuffixRules rules;
  rules.source_version_ = std::move(source_version);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.starts_with("//")) {
      constexpr std::string_view kVersion = "// VERSION:";
      if (line.starts_with(kVersion) && rules.source_version_.empty()) {
        rules.source_version_ = std::string(trim(line.substr(kVersion.size())));
      }
      continue;
    }
    if (std::any_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      throw ParseError(line_no, fmt::format("whitespace inside rule '{}'", line));
    }
    try {
      rules.add(line);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return rules;
}

SuffixRules SuffixRules::parse(std::string_view text, std::string source_version) {
  std::istringstream in{std::string(text)};
  return parse(in, std::move(source_version));
}

SuffixRules SuffixRules::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open public suffix list '" + path + "'");
  return parse(in, {});
}

bool SuffixRules::contains(RuleKind kind, std::string_view labels) const {
  const std::string key(labels);
  switch (kind) {
    case RuleKind::Normal: return normal_.contains(key);
    case RuleKind::Wildcard: return wildcard_.contains(key);
    case RuleKind::Exception: return exception_.contains(key);
  }
  return false;
}

std::size_t SuffixRules::suffix_label_count(std::string_view host) const {
  const auto starts = label_starts(host);
  const std::size_t n = starts.size();
  std::size_t best = 1;  // default rule "*"
  std::string key;
  // i indexes the leftmost label of the candidate suffix; walking left to
  // right visits longer suffixes first. Any exception overrides the rest.
  for (std::size_t i = 0; i < n; ++i) {
    key.assign(host.substr(starts[i]));
    const std::size_t len = n - i;
    if (exception_.contains(key)) return len - 1;
    if (len > best && normal_.contains(key)) best = len;
    if (i + 1 < n && len > best) {
      key.assign(host.substr(starts[i + 1]));
      if (wildcard_.contains(key)) best = len;
    }
  }
  return best;
}

std::optional<RegistrableDomain> registrable_domain(std::string_view host, const SuffixRules& rules) {
  if (host.empty()) throw std::invalid_argument("registrable_domain: empty host");
  std::string h = to_lower_ascii(host);
  if (h.size() > 1 && h.back() == '.') h.pop_back();  // fully-qualified form
  if (has_empty_label(h) || is_ip_literal(h)) return std::nullopt;
  const auto starts = label_starts(h);
  const std::size_t suffix = rules.suffix_label_count(h);
  if (suffix >= starts.size()) return std::nullopt;
  return RegistrableDomain{h.substr(starts[starts.size() - suffix - 1])};
}

std::string entity_of(std::string_view host, const SuffixRules& rules) {
  if (auto domain = registrable_domain(host, rules)) return std::move(domain->value);
  return to_lower_ascii(host);
}

PartyClass classify_party(std::string_view request_host, std::string_view site_host, const SuffixRules& rules) {
  return entity_of(request_host, rules) == entity_of(site_host, rules) ? PartyClass::FirstParty
                                                                       : PartyClass::ThirdParty;
}

std::string default_data_dir() {
  namespace fs = std::filesystem;
  if (const char* env = std::getenv("PRIVMETER_DATA_DIR"); env && *env) return env;
  if (fs::exists(fs::path(PRIVMETER_INSTALL_DATA_DIR) / "public_suffix_list.dat")) {
    return PRIVMETER_INSTALL_DATA_DIR;
  }
  return PRIVMETER_SOURCE_DATA_DIR;
}

std::string default_psl_path() {
  return (std::filesystem::path(default_data_dir()) / "public_suffix_list.dat").string();
}

}  // namespace privmeter
