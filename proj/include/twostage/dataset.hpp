#pragma once

#include <map>
#include <string>
#include <vector>

#include "twostage/csv.hpp"
#include "twostage/dgp.hpp"

namespace twostage {

struct CovariateSpec {
  std::string name;
  bool categorical = false;
  std::string reference;  // categorical only: level mapped to all-zero dummies
};

struct DatasetSchema {
  std::vector<CovariateSpec> covariates;
  std::string treatment = "t";
  std::string outcome = "y";
};

struct EncodedDataset {
  TrialDataset data;
  std::vector<std::string> col_names;               // encoded design columns
  std::map<std::string, std::vector<int>> cols_of;  // covariate -> encoded columns
  int n_dropped = 0;                                // rows removed for missing values
};

// Missing values ("" or "NA") drop the whole row; treatment must be 0/1.
EncodedDataset encode_dataset(const CsvTable& table, const DatasetSchema& schema,
                              Outcome outcome);

}  // namespace twostage
