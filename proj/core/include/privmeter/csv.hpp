#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace privmeter::csv {

using Row = std::vector<std::string>;

/// A parsed CSV file: leading `#` comment lines, a header, then data rows.
struct Table {
  std::vector<std::string> comments;  // without the leading "# "
  Row header;
  std::vector<Row> rows;

  /// Index of `name` in the header; throws privmeter::Error if missing.
  std::size_t column(std::string_view name) const;
};

/// RFC 4180 quoting: fields containing a comma, quote or newline are quoted.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const Row& row);

void write_comment(std::ostream& out, std::string_view text);

/// Reads a table. Comment lines are only recognised before the header.
/// Rows whose width differs from the header raise privmeter::ParseError.
Table read(std::istream& in);

Table read_file(const std::string& path);

/// Fixed, locale-independent formatting of reals for report files.
std::string format_real(double value);

}  // namespace privmeter::csv
