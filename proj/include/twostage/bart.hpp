#pragma once

#include <cstdint>
#include <vector>

#include "twostage/dgp.hpp"
#include "twostage/mat.hpp"
#include "twostage/rng.hpp"
#include "twostage/scores.hpp"

namespace twostage {

struct BartHyper {
  int m = 200;          // trees in the sum
  double alpha = 0.95;  // depth-prior base
  double beta = 2.0;    // depth-prior power
  double k = 2.0;       // leaf-prior scale
  double nu = 3.0;      // sigma^2 prior df
  double q = 0.90;      // sigma^2 calibration quantile
  int n_burn = 500;
  int n_keep = 100;
  int n_cutpoints = 100;
};

struct CompactNode {
  int feature = -1;  // -1 marks a leaf
  double cut = 0.0;
  int left = -1;
  int right = -1;
  double mu = 0.0;
};

struct CompactTree {
  std::vector<CompactNode> nodes;

  double value(const double* x) const {
    int ix = 0;
    while (nodes[static_cast<size_t>(ix)].feature >= 0) {
      const CompactNode& nd = nodes[static_cast<size_t>(ix)];
      ix = x[nd.feature] <= nd.cut ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(ix)].mu;
  }
};

struct BartEnsemble {
  std::vector<CompactTree> trees;  // model-scale leaf values
  double sigma = 0.0;              // model scale
};

struct BartChain {
  std::vector<BartEnsemble> kept;
  std::vector<double> sigma_draws;  // original outcome scale; empty for binary
  Outcome outcome = Outcome::Continuous;
  double y_center = 0.0;
  double y_scale = 1.0;
  double offset = 0.0;  // probit intercept for binary chains
  double sigma_mu = 0.0;
  double lambda = 0.0;
  double nu = 0.0;
  double sigma_hat_ols = 0.0;  // model-scale residual SD used for calibration
  double accept_rate = 0.0;
  Mat train_x;
  std::vector<double> train_y;
  Mat split_counts;  // n_keep x p splitting-rule tallies
  BartHyper hyper;

  int p() const { return train_x.p; }
};

BartChain fit_bart(const Mat& x, const std::vector<double>& y, Outcome outcome,
                   const BartHyper& hyper, uint64_t seed);

// Row k = the k-th retained ensemble evaluated at every Xnew row, mapped back
// to the outcome scale (probabilities for binary chains).
ScoreDrawMatrix predict_posterior(const BartChain& chain, const Mat& xnew);

struct VipSummary {
  std::vector<double> mean;
  std::vector<double> lo;  // 2.5% across draws
  std::vector<double> hi;  // 97.5% across draws
};

// Per-draw share of splitting rules using each feature; draws with no splits
// count as uniform across features.
VipSummary vip(const BartChain& chain);

// Share of posterior replicates whose event rate reaches the observed rate.
double posterior_predictive_pvalue(const BartChain& chain, const std::vector<double>& y,
                                   int n_rep, uint64_t seed);

// Leaf count of one tree drawn from the structural prior alone.
int sample_prior_tree_leaves(double alpha, double beta, Rng& rng, int max_depth = 30);

}  // namespace twostage
