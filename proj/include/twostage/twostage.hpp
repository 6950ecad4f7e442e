#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twostage/design.hpp"
#include "twostage/dgp.hpp"
#include "twostage/glm.hpp"
#include "twostage/scores.hpp"

namespace twostage {

struct SplitSpec {
  double design_fraction = 0.5;  // share of treated subjects used to train stage 1
  uint64_t seed = 0;
};

struct SplitResult {
  std::vector<int> design_idx;  // treated subjects only, ascending
  std::vector<int> eval_idx;    // everyone else, ascending
};

// Draws floor(design_fraction * n_treated) treated subjects into the design
// set; the evaluation set is the disjoint remainder of the data.
SplitResult split_design_eval(const TrialDataset& data, const SplitSpec& spec);

struct RubinPool {
  double delta_bar = 0.0;
  double total_var = 0.0;
  double within_var = 0.0;
  double between_var = 0.0;
};

// Multiple-imputation pooling: mean estimate, mean within-design variance,
// plus (1 + 1/K) times the between-design variance.
RubinPool rubin_pool(const std::vector<double>& deltas, const std::vector<double>& variances);

struct LabelEffect {
  EffectEstimate est;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct SubgroupEffects {
  std::map<std::string, LabelEffect> by_label;
  std::map<std::string, std::string> failures;  // label -> error kind
};

SubgroupEffects naive_estimate(const std::vector<double>& score_point,
                               const SubgroupingRule& rule, const TrialDataset& eval_data,
                               Link link, const Eigen::MatrixXd* z = nullptr);

struct PooledEstimate {
  std::string label;
  double delta_bar = 0.0;
  double within_var = 0.0;
  double between_var = 0.0;
  double total_var = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int k_valid = 0;
  int k_total = 0;
};

struct CorrectedEffects {
  std::map<std::string, PooledEstimate> by_label;
  std::map<std::string, std::string> failures;  // label -> reason
};

// One GLM per label per posterior draw, then Rubin pooling over the draws that
// fit cleanly.  A label needs at least max(2, K/2) valid draws; if every label
// falls short the call throws.
CorrectedEffects corrected_estimate(const ScoreDrawMatrix& score_draws,
                                    const SubgroupingRule& rule, const TrialDataset& eval_data,
                                    Link link, const Eigen::MatrixXd* z = nullptr);

struct Classification {
  std::vector<int> label_ix;           // by posterior-mean score
  std::vector<double> confidence;      // share of draws on the first-label side
};

Classification classify_posterior_mean(const ScoreDrawMatrix& score_draws,
                                       const SubgroupingRule& rule);

constexpr double kCiMultiplier = 1.96;

}  // namespace twostage
