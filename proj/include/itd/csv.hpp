#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace itd::csv {

using Row = std::vector<std::string>;

/// Splits one line on commas. Double-quoted cells may contain commas and
/// doubled quotes (`""`), which are unescaped.
Row split(std::string_view line);

/// Quotes a cell only when it contains a comma, quote, or newline.
std::string escape(std::string_view cell);
std::string join(const Row &cells);

struct NumberedRow {
  std::size_t line = 0;
  Row cells;
};

/// A parsed file. Leading `#` comment lines are skipped before the header
/// and kept in `comments`. Blank lines are dropped.
struct Table {
  std::vector<std::string> comments;
  Row header;
  std::vector<NumberedRow> rows;
};

Table read(std::istream &in);
Table read_file(const std::filesystem::path &path);

} // namespace itd::csv
