#pragma once

#include <string>
#include <string_view>

namespace privmeter {

struct UrlParts {
  std::string scheme;
  std::string host;  // lowercased, brackets stripped for IPv6 literals
  std::string port;
  std::string path;  // begins with '/' (defaults to "/")
  std::string query;

  bool operator==(const UrlParts&) const = default;
};

/// Splits an absolute URL (`scheme://[user@]host[:port][/path][?query][#frag]`).
/// Throws privmeter::Error when the URL has no scheme or no host.
UrlParts parse_url(std::string_view url);

/// Host component of `url`, lowercased.
std::string url_host(std::string_view url);

/// Request identity used for overlap sets: lowercased host followed by the
/// path, with scheme, query string and fragment removed.
std::string normalize_request_url(std::string_view url);

std::string to_lower_ascii(std::string_view s);

bool is_ip_literal(std::string_view host);

}  // namespace privmeter
