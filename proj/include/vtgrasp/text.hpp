#pragma once

// Small helpers for the comma-separated formats used across the library.

#include <charconv>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "vtgrasp/error.hpp"

namespace vtgrasp::text {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::parse, std::string(what) + ": cannot parse '" + std::string(s) + "' as a number");
  }
  return v;
}

inline long long parse_int(std::string_view s, std::string_view what) {
  s = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw Error(ErrorCode::parse, std::string(what) + ": cannot parse '" + std::string(s) + "' as an integer");
  }
  return v;
}

/// Reads a CSV stream, checking the header names as a prefix, and returns the data rows.
inline std::vector<std::vector<std::string>> read_csv(std::istream& in, const std::vector<std::string>& required_header,
                                                      std::vector<std::string>* header_out = nullptr) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse, "csv: missing header");
  auto header = split(trim(line), ',');
  if (header.size() < required_header.size()) throw Error(ErrorCode::parse, "csv: header too short");
  for (std::size_t i = 0; i < required_header.size(); ++i) {
    if (header[i] != required_header[i]) {
      throw Error(ErrorCode::parse, "csv: expected column '" + required_header[i] + "', found '" +
                                        std::string(header[i]) + "'");
    }
  }
  if (header_out) {
    header_out->clear();
    for (auto h : header) header_out->emplace_back(h);
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> row;
    for (auto f : split(trim(line), ',')) row.emplace_back(f);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace vtgrasp::text
