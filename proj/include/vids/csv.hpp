#pragma once

// Minimal RFC 4180 reading and writing. Numbers are written in the shortest
// form that parses back to the same double.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vids {

std::string format_double(double v);

// Whole-string numeric parse; nullopt if the cell is not a number.
std::optional<double> parse_double(std::string_view cell);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws InputError naming the column if absent.
  std::size_t column(std::string_view name) const;
};

// Throws ParseError on malformed quoting or ragged rows.
CsvTable read_csv(std::istream& is);
CsvTable read_csv_file(const std::string& path);

std::string csv_escape(std::string_view cell);
void write_csv_row(std::ostream& os, const std::vector<std::string>& cells);

}  // namespace vids
