#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace commitgate::csv {

using Row = std::vector<std::string>;

// RFC 4180 quoting: fields containing ',', '"', CR or LF are quoted.
std::string escape(std::string_view field);
std::string format_row(const Row& row);

// Parses a whole document. Lines starting with '#' outside of quotes are
// comments and skipped; blank lines are skipped.
std::vector<Row> parse(std::string_view text);

// Parses with a header row and checks its columns.
struct Table {
  Row header;
  std::vector<Row> rows;
  int column(std::string_view name) const;  // -1 when absent
};
Table parse_table(std::string_view text, const Row& expected_header = {});

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

}  // namespace commitgate::csv
