#include "twostage/dataset.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <stdexcept>

namespace twostage {

namespace {

bool is_missing(const std::string& s) { return s.empty() || s == "NA"; }

double parse_number(const std::string& s, const std::string& col, int row) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw std::runtime_error("column '" + col + "' has non-numeric value '" + s +
                             "' at data row " + std::to_string(row + 1));
  return value;
}

}  // namespace

EncodedDataset encode_dataset(const CsvTable& table, const DatasetSchema& schema,
                              Outcome outcome) {
  if (schema.covariates.empty()) throw std::invalid_argument("schema: no covariates");
  const int t_col = table.col_index(schema.treatment);
  if (t_col < 0) throw std::runtime_error("treatment column '" + schema.treatment + "' not found");
  const int y_col = table.col_index(schema.outcome);
  if (y_col < 0) throw std::runtime_error("outcome column '" + schema.outcome + "' not found");
  std::vector<int> x_cols;
  for (const CovariateSpec& spec : schema.covariates) {
    const int c = table.col_index(spec.name);
    if (c < 0) throw std::runtime_error("covariate column '" + spec.name + "' not found");
    x_cols.push_back(c);
  }

  // Drop rows with any missing field among used columns.
  std::vector<int> keep;
  for (int r = 0; r < table.n_rows(); ++r) {
    bool missing = is_missing(table.rows[static_cast<size_t>(r)][static_cast<size_t>(t_col)]) ||
                   is_missing(table.rows[static_cast<size_t>(r)][static_cast<size_t>(y_col)]);
    for (int c : x_cols)
      missing = missing ||
                is_missing(table.rows[static_cast<size_t>(r)][static_cast<size_t>(c)]);
    if (!missing) keep.push_back(r);
  }
  if (keep.empty()) throw std::runtime_error("no complete rows after dropping missing values");

  // Collect categorical levels and lay out encoded columns.
  std::vector<std::string> col_names;
  std::map<std::string, std::vector<int>> cols_of;
  std::vector<std::vector<std::string>> dummy_levels(schema.covariates.size());
  for (size_t k = 0; k < schema.covariates.size(); ++k) {
    const CovariateSpec& spec = schema.covariates[k];
    if (!spec.categorical) {
      cols_of[spec.name] = {static_cast<int>(col_names.size())};
      col_names.push_back(spec.name);
      continue;
    }
    std::set<std::string> levels;
    for (int r : keep)
      levels.insert(table.rows[static_cast<size_t>(r)][static_cast<size_t>(x_cols[k])]);
    if (levels.count(spec.reference) == 0)
      throw std::runtime_error("reference level '" + spec.reference +
                               "' not present in covariate '" + spec.name + "'");
    std::vector<int> cols;
    for (const std::string& level : levels) {
      if (level == spec.reference) continue;
      dummy_levels[k].push_back(level);
      cols.push_back(static_cast<int>(col_names.size()));
      col_names.push_back(spec.name + "=" + level);
    }
    cols_of[spec.name] = cols;
  }

  EncodedDataset out;
  out.n_dropped = table.n_rows() - static_cast<int>(keep.size());
  out.col_names = col_names;
  out.cols_of = std::move(cols_of);
  out.data.outcome = outcome;
  out.data.x = Mat(static_cast<int>(keep.size()), static_cast<int>(col_names.size()));
  out.data.t.resize(keep.size());
  out.data.y.resize(keep.size());

  for (size_t i = 0; i < keep.size(); ++i) {
    const int r = keep[i];
    const auto& row = table.rows[static_cast<size_t>(r)];
    const std::string& t_raw = row[static_cast<size_t>(t_col)];
    if (t_raw != "0" && t_raw != "1")
      throw std::runtime_error("treatment must be 0 or 1, got '" + t_raw +
                               "' at data row " + std::to_string(r + 1));
    out.data.t[i] = t_raw == "1" ? 1 : 0;
    out.data.y[i] = parse_number(row[static_cast<size_t>(y_col)], schema.outcome, r);
    int col = 0;
    for (size_t k = 0; k < schema.covariates.size(); ++k) {
      const CovariateSpec& spec = schema.covariates[k];
      const std::string& raw = row[static_cast<size_t>(x_cols[k])];
      if (!spec.categorical) {
        out.data.x(static_cast<int>(i), col++) = parse_number(raw, spec.name, r);
        continue;
      }
      for (const std::string& level : dummy_levels[k])
        out.data.x(static_cast<int>(i), col++) = raw == level ? 1.0 : 0.0;
    }
  }
  if (outcome == Outcome::Binary)
    for (size_t i = 0; i < out.data.y.size(); ++i)
      if (out.data.y[i] != 0.0 && out.data.y[i] != 1.0)
        throw std::runtime_error("binary outcome must be 0 or 1 at data row " +
                                 std::to_string(keep[i] + 1));
  return out;
}

}  // namespace twostage
