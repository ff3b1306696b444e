#include "privmeter/url.hpp"

#include <algorithm>
#include <cctype>

#include "privmeter/error.hpp"

namespace privmeter {

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(c < 0x80 ? std::tolower(c) : c);
  });
  return out;
}

UrlParts parse_url(std::string_view url) {
  UrlParts parts;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos || scheme_end == 0) {
    throw Error("url without scheme: '" + std::string(url) + "'");
  }
  parts.scheme = to_lower_ascii(url.substr(0, scheme_end));
  std::string_view rest = url.substr(scheme_end + 3);

  const auto authority_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, authority_end);
  rest = authority_end == std::string_view::npos ? std::string_view{} : rest.substr(authority_end);

  if (const auto at = authority.rfind('@'); at != std::string_view::npos) {
    authority.remove_prefix(at + 1);
  }
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) {
      throw Error("unterminated IPv6 literal in url: '" + std::string(url) + "'");
    }
    parts.host = to_lower_ascii(authority.substr(1, close - 1));
    if (close + 1 < authority.size() && authority[close + 1] == ':') {
      parts.port = std::string(authority.substr(close + 2));
    }
  } else {
    const auto colon = authority.rfind(':');
    parts.host = to_lower_ascii(authority.substr(0, colon));
    if (colon != std::string_view::npos) parts.port = std::string(authority.substr(colon + 1));
  }
  if (parts.host.empty()) {
    throw Error("url without host: '" + std::string(url) + "'");
  }

  if (const auto hash = rest.find('#'); hash != std::string_view::npos) rest = rest.substr(0, hash);
  if (const auto q = rest.find('?'); q != std::string_view::npos) {
    parts.query = std::string(rest.substr(q + 1));
    rest = rest.substr(0, q);
  }
  parts.path = rest.empty() ? "/" : std::string(rest);
  return parts;
}

std::string url_host(std::string_view url) { return parse_url(url).host; }

std::string normalize_request_url(std::string_view url) {
  auto parts = parse_url(url);
  return parts.host + parts.path;
}

bool is_ip_literal(std::string_view host) {
  if (host.find(':') != std::string_view::npos) return true;  // IPv6
  int labels = 0;
  std::size_t start = 0;
  while (start <= host.size()) {
    const auto dot = host.find('.', start);
    const auto label = host.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
    if (label.empty() || label.size() > 3 ||
        !std::all_of(label.begin(), label.end(), [](unsigned char c) { return std::isdigit(c); })) {
      return false;
    }
    if (std::stoi(std::string(label)) > 255) return false;
    ++labels;
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return labels == 4;
}

}  // namespace privmeter
