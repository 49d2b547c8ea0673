#pragma once

#include <string_view>
#include <vector>

namespace wmfrec::detail {

enum class Separator { kTab, kComma, kSpace };

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

inline Separator detect_separator(std::string_view line) {
  if (line.find('\t') != std::string_view::npos) return Separator::kTab;
  if (line.find(',') != std::string_view::npos) return Separator::kComma;
  return Separator::kSpace;
}

inline std::vector<std::string_view> split(std::string_view line, Separator sep) {
  std::vector<std::string_view> fields;
  if (sep == Separator::kSpace) {
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
      if (pos >= line.size()) break;
      const auto end = line.find_first_of(" \t", pos);
      fields.push_back(line.substr(pos, end == std::string_view::npos ? end : end - pos));
      pos = end == std::string_view::npos ? line.size() : end;
    }
    return fields;
  }
  const char delim = sep == Separator::kTab ? '\t' : ',';
  std::size_t start = 0;
  while (true) {
    const auto end = line.find(delim, start);
    fields.push_back(trim(line.substr(start, end == std::string_view::npos ? end : end - start)));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return fields;
}

}  // namespace wmfrec::detail
