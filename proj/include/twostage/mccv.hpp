#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twostage/harness.hpp"

namespace twostage {

struct MccvConfig {
  int repetitions = 100;
  double design_fraction = 0.5;
  SubgroupingRule rule;
  Link link = Link::Logit;
  std::vector<int> adjust_cols;          // encoded covariate columns entering stage 2
  std::vector<double> reference_levels;  // values fixed when scoring stage 1
  uint64_t seed = 1;
  std::vector<Method> methods = {Method::NaiveBART, Method::CorrectedBART};
  BartHyper bart;
  GbmHyper gbm;
  bool gbm_tune = true;
  int threads = 1;
};

struct MccvCell {
  double point_median = 0.0;
  double se_median = 0.0;
  double lo_median = 0.0;
  double hi_median = 0.0;
  // exponentiated variants, populated for the logit link
  double or_point = 0.0;
  double or_lo = 0.0;
  double or_hi = 0.0;
  int n_valid = 0;
  int n_total = 0;
};

struct MccvLabelStats {
  double size_median = 0.0;
  double size_sd = 0.0;
  double mean_confidence = 0.0;  // share of draws on the first-label side, averaged
  int n_classified = 0;
};

struct MccvResult {
  std::vector<std::tuple<Method, std::string, MccvCell>> cells;
  std::map<std::string, MccvLabelStats> label_stats;
  Link link = Link::Logit;
};

// Repeated design/evaluation splits with coordinate-wise median pooling of the
// per-repetition estimates, SEs, and CI bounds.
MccvResult run_mccv(const TrialDataset& data, const MccvConfig& config);

std::string mccv_effects_csv(const MccvResult& result);
std::string mccv_subgroups_csv(const MccvResult& result);

}  // namespace twostage
