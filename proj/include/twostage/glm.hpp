#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace twostage {

enum class Link { Identity, Logit };

struct GlmError : std::runtime_error {
  std::string kind;
  explicit GlmError(const std::string& k, const std::string& detail = "")
      : std::runtime_error(detail.empty() ? k : k + ": " + detail), kind(k) {}
};

struct GlmFit {
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  Eigen::MatrixXd cov;
  Link link = Link::Identity;
  int n_used = 0;
  bool converged = false;
  int iterations = 0;
  double deviance = 0.0;
  bool zero_variance = false;
};

struct EffectEstimate {
  double delta = 0.0;
  double se = 0.0;
  int n_treated = 0;
  int n_control = 0;
  std::string label;
  bool zero_variance = false;
};

// OLS of y on [1, t, Z]; the treatment column is position 1.
GlmFit ols_fit(const std::vector<double>& y, const std::vector<int>& t,
               const Eigen::MatrixXd* z);

// IRLS logistic regression of y on [1, t, Z] with Wald covariance from the
// inverse observed information.
GlmFit logistic_fit(const std::vector<double>& y, const std::vector<int>& t,
                    const Eigen::MatrixXd* z);

EffectEstimate fit_gaussian_effect(const std::vector<double>& y, const std::vector<int>& t,
                                   const Eigen::MatrixXd* z = nullptr);

EffectEstimate fit_logistic_effect(const std::vector<double>& y, const std::vector<int>& t,
                                   const Eigen::MatrixXd* z = nullptr);

inline EffectEstimate fit_effect(Link link, const std::vector<double>& y,
                                 const std::vector<int>& t,
                                 const Eigen::MatrixXd* z = nullptr) {
  return link == Link::Identity ? fit_gaussian_effect(y, t, z) : fit_logistic_effect(y, t, z);
}

}  // namespace twostage
