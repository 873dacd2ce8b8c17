#include "srfl/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "srfl/errors.hpp"

namespace srfl::csv {

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, decimals);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

double parse_double(std::string_view cell, std::size_t line) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
    throw ParseError("non-numeric cell '" + std::string(cell) + "'", line);
  }
  return value;
}

std::int64_t parse_int(std::string_view cell, std::size_t line) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
    throw ParseError("non-integer cell '" + std::string(cell) + "'", line);
  }
  return value;
}

Reader::Reader(const std::filesystem::path& path) : in_(path) {
  if (!in_) throw ParseError("cannot open " + path.string(), 0);
}

bool Reader::next(std::vector<std::string>& cells) {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    if (text.front() == '#') {
      comments_.push_back(text.substr(1));
      continue;
    }
    cells = split_line(text);
    return true;
  }
  return false;
}

void expect_header(const std::vector<std::string>& got,
                   const std::vector<std::string>& expected, std::size_t line) {
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= got.size() || got[i] != expected[i]) {
      const bool present = std::find(got.begin(), got.end(), expected[i]) != got.end();
      throw ParseError(std::string(present ? "misplaced" : "missing") + " column '" +
                           expected[i] + "'",
                       line);
    }
  }
  if (got.size() != expected.size()) {
    throw ParseError("unexpected extra column '" + got[expected.size()] + "'", line);
  }
}

std::string join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

}  // namespace srfl::csv
