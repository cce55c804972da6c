#include "commitgate/csv.hpp"

#include "commitgate/error.hpp"

#include <fmt/format.h>

#include <cmath>

namespace commitgate::csv {

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_row(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += escape(row[i]);
  }
  out += '\n';
  return out;
}

std::vector<Row> parse(std::string_view text) {
  std::vector<Row> rows;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (text[i] == '\n' || text[i] == '\r') {
      ++i;
      continue;
    }
    if (text[i] == '#') {
      while (i < n && text[i] != '\n') ++i;
      continue;
    }
    Row row;
    std::string field;
    bool in_quotes = false;
    for (; i < n; ++i) {
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            field += '"';
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          field += c;
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        row.push_back(std::move(field));
        field.clear();
      } else if (c == '\n' || c == '\r') {
        break;
      } else {
        field += c;
      }
    }
    if (in_quotes) throw InputError("csv: unterminated quoted field");
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

int Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

Table parse_table(std::string_view text, const Row& expected_header) {
  auto rows = parse(text);
  if (rows.empty()) throw InputError("csv: missing header row");
  Table t;
  t.header = std::move(rows.front());
  if (!expected_header.empty() && t.header != expected_header) {
    throw InputError(fmt::format("csv: unexpected header '{}'",
                                 format_row(t.header).substr(0, 200)));
  }
  t.rows.assign(std::make_move_iterator(rows.begin() + 1),
                std::make_move_iterator(rows.end()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != t.header.size()) {
      throw InputError(fmt::format("csv: row {} has {} fields, expected {}", r + 1,
                                   t.rows[r].size(), t.header.size()));
    }
  }
  return t;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

}  // namespace commitgate::csv
