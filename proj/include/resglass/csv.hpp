#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "resglass/common.hpp"

namespace resglass {

// Shortest round-trippable decimal; the fixed format keeps reruns byte-identical.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace detail {

inline std::string to_cell(double x) { return format_double(x); }
inline std::string to_cell(int x) { return std::to_string(x); }
inline std::string to_cell(long long x) { return std::to_string(x); }
inline std::string to_cell(std::size_t x) { return std::to_string(x); }
inline std::string to_cell(const char* s) { return s; }
inline std::string to_cell(std::string s) { return s; }

}  // namespace detail

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
    require(!header_.empty(), "CsvTable: header must not be empty");
  }

  // Comment lines are emitted before the header, each prefixed with "# ".
  void add_comment(std::string line) { comments_.push_back(std::move(line)); }

  void add_row(std::vector<std::string> cells) {
    require(cells.size() == header_.size(), "CsvTable: row width != header width");
    rows_.push_back(std::move(cells));
  }

  template <class... Args>
  void add(Args&&... args) {
    add_row({detail::to_cell(std::forward<Args>(args))...});
  }

  std::size_t row_count() const { return rows_.size(); }

  std::string to_string() const {
    std::string out;
    for (const auto& c : comments_) out += "# " + c + "\n";
    out += join(header_);
    for (const auto& row : rows_) out += join(row);
    return out;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw param_error("CsvTable: cannot open " + path.string());
    f << to_string();
  }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    line += '\n';
    return line;
  }

  std::vector<std::string> header_;
  std::vector<std::string> comments_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace resglass
