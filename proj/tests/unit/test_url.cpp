#include <gtest/gtest.h>

#include "privmeter/error.hpp"
#include "privmeter/url.hpp"

using namespace privmeter;

TEST(Url, SplitsComponents) {
  const auto p = parse_url("HTTPS://user@Tracker.NET:8443/a/b.js?x=1#frag");
  EXPECT_EQ(p.scheme, "https");
  EXPECT_EQ(p.host, "tracker.net");
  EXPECT_EQ(p.port, "8443");
  EXPECT_EQ(p.path, "/a/b.js");
  EXPECT_EQ(p.query, "x=1");
}

TEST(Url, DefaultsPathToRoot) {
  EXPECT_EQ(parse_url("http://example.com").path, "/");
  EXPECT_EQ(parse_url("http://example.com?q").path, "/");
}

TEST(Url, Ipv6LiteralDropsBrackets) {
  const auto p = parse_url("http://[2001:DB8::1]:80/x");
  EXPECT_EQ(p.host, "2001:db8::1");
  EXPECT_EQ(p.port, "80");
  EXPECT_TRUE(is_ip_literal(p.host));
}

TEST(Url, RejectsMissingSchemeOrHost) {
  EXPECT_THROW(parse_url("example.com/x"), Error);
  EXPECT_THROW(parse_url("https:///path"), Error);
  EXPECT_THROW(parse_url("http://[::1/x"), Error);
}

TEST(Url, NormalizationDropsSchemeAndQuery) {
  EXPECT_EQ(normalize_request_url("https://Ads.Example.com/p/1.png?cb=123"), "ads.example.com/p/1.png");
  EXPECT_EQ(normalize_request_url("http://ads.example.com/p/1.png#x"), "ads.example.com/p/1.png");
}

TEST(Url, IpLiteralDetection) {
  EXPECT_TRUE(is_ip_literal("192.168.0.1"));
  EXPECT_FALSE(is_ip_literal("192.168.0.256"));
  EXPECT_FALSE(is_ip_literal("1.2.3"));
  EXPECT_FALSE(is_ip_literal("1.2.3.com"));
  EXPECT_FALSE(is_ip_literal("example.com"));
}
