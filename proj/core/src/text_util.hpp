#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace ipakit::detail {

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    cells.emplace_back(line.substr(start, tab == std::string_view::npos ? tab : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return cells;
}

// getline that also strips a trailing '\r'.
inline bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

inline bool is_blank_or_comment(std::string_view line) {
  return line.empty() || line.front() == '#';
}

}  // namespace ipakit::detail
