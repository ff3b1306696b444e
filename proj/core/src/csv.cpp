#include "privmeter/csv.hpp"

#include <fmt/format.h>

#include <fstream>
#include <istream>
#include <ostream>

#include "privmeter/error.hpp"

namespace privmeter::csv {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(fmt::format("csv: missing column '{}'", name));
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << escape(row[i]);
  }
  out << '\n';
}

void write_comment(std::ostream& out, std::string_view text) { out << "# " << text << '\n'; }

namespace {

// Splits one logical record; quoted fields may span physical lines.
bool read_record(std::istream& in, Row& row, std::size_t& line_no) {
  row.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  while (true) {
    if (i == line.size()) {
      if (quoted) {
        field += '\n';
        if (!std::getline(in, line)) throw ParseError(line_no, "csv: unterminated quoted field");
        ++line_no;
        i = 0;
        continue;
      }
      break;
    }
    const char c = line[i++];
    if (quoted) {
      if (c == '"') {
        if (i < line.size() && line[i] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  row.push_back(std::move(field));
  return true;
}

}  // namespace

Table read(std::istream& in) {
  Table table;
  std::size_t line_no = 0;
  Row row;
  bool have_header = false;
  while (in.peek() != std::char_traits<char>::eof()) {
    if (!have_header && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
      ++line_no;
      comment.erase(0, 1);
      if (!comment.empty() && comment.front() == ' ') comment.erase(0, 1);
      table.comments.push_back(std::move(comment));
      continue;
    }
    if (!read_record(in, row, line_no)) break;
    if (row.size() == 1 && row.front().empty()) continue;  // blank line
    if (!have_header) {
      table.header = row;
      have_header = true;
      continue;
    }
    if (row.size() != table.header.size()) {
      throw ParseError(line_no, fmt::format("csv: expected {} fields, found {}", table.header.size(), row.size()));
    }
    table.rows.push_back(row);
  }
  return table;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return read(in);
}

std::string format_real(double value) { return fmt::format("{:.10g}", value); }

}  // namespace privmeter::csv
