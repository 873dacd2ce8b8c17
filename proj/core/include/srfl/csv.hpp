#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace srfl::csv {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
// Fixed-point text with the given number of decimals.
std::string format_fixed(double value, int decimals);

std::vector<std::string> split_line(std::string_view line);

double parse_double(std::string_view cell, std::size_t line);
std::int64_t parse_int(std::string_view cell, std::size_t line);

// Line-oriented reader that skips blank lines and `#` comment lines and keeps
// track of the current 1-based line number for diagnostics.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  bool next(std::vector<std::string>& cells);
  std::size_t line() const noexcept { return line_; }
  // Comment lines seen so far, without the leading '#'.
  const std::vector<std::string>& comments() const noexcept { return comments_; }

 private:
  std::ifstream in_;
  std::size_t line_ = 0;
  std::vector<std::string> comments_;
};

// Validates a header row against the expected column names. Reports the first
// missing or misplaced column by name.
void expect_header(const std::vector<std::string>& got,
                   const std::vector<std::string>& expected, std::size_t line);

std::string join(const std::vector<std::string>& cells);

}  // namespace srfl::csv
