#pragma once

#include <cstdint>
#include <vector>

#include "twostage/mat.hpp"

namespace twostage {

enum class GbmLoss { SquaredError, Logistic };

struct GbmHyper {
  double eta = 0.1;
  int max_depth = 3;
  double colsample = 1.0;
  double lambda = 1.0;
  double gamma = 0.0;
  int n_rounds = 100;
  GbmLoss loss = GbmLoss::SquaredError;
};

struct GbmNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;  // unscaled leaf value; predictions apply eta

  bool is_leaf() const { return left < 0; }
};

struct GbmTree {
  std::vector<GbmNode> nodes;

  double leaf_weight(const double* x) const {
    int ix = 0;
    while (!nodes[static_cast<size_t>(ix)].is_leaf()) {
      const GbmNode& nd = nodes[static_cast<size_t>(ix)];
      ix = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<size_t>(ix)].weight;
  }
};

struct GbmModel {
  std::vector<GbmTree> trees;
  double base_score = 0.0;
  double eta = 0.1;
  GbmLoss loss = GbmLoss::SquaredError;
  int p = 0;
};

GbmModel fit_gbm(const Mat& x, const std::vector<double>& y, const GbmHyper& hyper,
                 uint64_t seed);

// Margin predictions: base score plus eta-scaled leaf weights.
std::vector<double> predict_gbm_margin(const GbmModel& model, const Mat& xnew);

// Response-scale predictions: probabilities for logistic loss.
std::vector<double> predict_gbm(const GbmModel& model, const Mat& xnew);

// Grid search over eta x depth x colsample with per-fold early stopping;
// returns the winning configuration with its stopped round count.
GbmHyper tune_cv(const Mat& x, const std::vector<double>& y, GbmLoss loss, int folds,
                 uint64_t seed);

namespace gbm_detail {
constexpr int kMaxRounds = 500;
constexpr int kPatience = 20;
}  // namespace gbm_detail

}  // namespace twostage
