#pragma once

#include <string>
#include <vector>

namespace twostage {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int n_rows() const { return static_cast<int>(rows.size()); }
  int n_cols() const { return static_cast<int>(header.size()); }
  // index of a named column, or -1
  int col_index(const std::string& name) const;
};

// Comma-separated, first row is the header; '#' lines and blank lines skipped.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

}  // namespace twostage
