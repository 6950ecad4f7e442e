#include "twostage/glm.hpp"

#include <cmath>

namespace twostage {

namespace {

constexpr double kScoreTol = 1e-8;
constexpr double kDevianceRelTol = 1e-10;
constexpr int kMaxIter = 50;
constexpr double kCoefDivergence = 15.0;
constexpr double kProbClamp = 1e-10;

Eigen::MatrixXd build_design(size_t n, const std::vector<int>& t, const Eigen::MatrixXd* z) {
  const int q = z ? static_cast<int>(z->cols()) : 0;
  Eigen::MatrixXd x(n, 2 + q);
  for (size_t i = 0; i < n; ++i) {
    x(static_cast<Eigen::Index>(i), 0) = 1.0;
    x(static_cast<Eigen::Index>(i), 1) = static_cast<double>(t[i]);
  }
  if (z) {
    if (static_cast<size_t>(z->rows()) != n) throw GlmError("covariate row mismatch");
    x.rightCols(q) = *z;
  }
  return x;
}

void check_arms(const std::vector<int>& t) {
  int n1 = 0;
  for (int ti : t) n1 += ti;
  if (n1 == 0 || n1 == static_cast<int>(t.size())) throw GlmError("degenerate arm");
}

double binomial_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pi = std::min(1.0 - kProbClamp, std::max(kProbClamp, p(i)));
    d += y(i) * std::log(pi) + (1.0 - y(i)) * std::log(1.0 - pi);
  }
  return -2.0 * d;
}

}  // namespace

GlmFit ols_fit(const std::vector<double>& y, const std::vector<int>& t,
               const Eigen::MatrixXd* z) {
  const size_t n = y.size();
  if (t.size() != n) throw GlmError("length mismatch");
  check_arms(t);
  const Eigen::MatrixXd x = build_design(n, t, z);
  const int p = static_cast<int>(x.cols());
  if (static_cast<int>(n) <= p) throw GlmError("too few observations");

  Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < p) throw GlmError("rank-deficient design");
  const Eigen::VectorXd beta = qr.solve(yv);
  const Eigen::VectorXd resid = yv - x * beta;
  const double rss = resid.squaredNorm();
  const double sigma2 = rss / static_cast<double>(static_cast<int>(n) - p);

  GlmFit fit;
  fit.link = Link::Identity;
  fit.n_used = static_cast<int>(n);
  fit.coef = beta;
  const Eigen::MatrixXd xtx_inv =
      (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.cov = sigma2 * xtx_inv;
  fit.se = fit.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.converged = true;
  fit.deviance = rss;
  const double ymean = yv.mean();
  const double yvar = (yv.array() - ymean).square().sum();
  fit.zero_variance = yvar <= 0.0;
  return fit;
}

GlmFit logistic_fit(const std::vector<double>& y, const std::vector<int>& t,
                    const Eigen::MatrixXd* z) {
  const size_t n = y.size();
  if (t.size() != n) throw GlmError("length mismatch");
  check_arms(t);
  for (double yi : y)
    if (yi != 0.0 && yi != 1.0) throw GlmError("non-binary response");

  double ysum = 0.0;
  for (double yi : y) ysum += yi;
  if (ysum == 0.0 || ysum == static_cast<double>(n)) throw GlmError("degenerate response");

  if (!z) {
    // 2x2 structure: a perfectly aligned table has no MLE, an empty cell sends
    // the estimate to infinity.
    long a = 0, b = 0, c = 0, d = 0;
    for (size_t i = 0; i < n; ++i) {
      if (t[i] == 1)
        (y[i] == 1.0 ? a : b) += 1;
      else
        (y[i] == 1.0 ? c : d) += 1;
    }
    if ((b == 0 && c == 0) || (a == 0 && d == 0)) throw GlmError("separation");
    if (a == 0 || b == 0 || c == 0 || d == 0) throw GlmError("zero cell");
  }

  const Eigen::MatrixXd x = build_design(n, t, z);
  const int p = static_cast<int>(x.cols());
  if (static_cast<int>(n) <= p) throw GlmError("too few observations");
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < p) throw GlmError("rank-deficient design");
  }
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = x * beta;
  Eigen::VectorXd prob = eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
  double dev = binomial_deviance(yv, prob);

  GlmFit fit;
  fit.link = Link::Logit;
  fit.n_used = static_cast<int>(n);

  bool converged = false;
  int iter = 0;
  Eigen::MatrixXd info(p, p);
  while (iter < kMaxIter) {
    ++iter;
    const Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).matrix();
    const Eigen::VectorXd score = x.transpose() * (yv - prob);
    if (score.lpNorm<Eigen::Infinity>() < kScoreTol) {
      converged = true;
      break;
    }
    info = x.transpose() * w.asDiagonal() * x;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success) throw GlmError("separation");
    const Eigen::VectorXd step = ldlt.solve(score);

    double scale = 1.0;
    Eigen::VectorXd beta_new;
    double dev_new = dev;
    bool improved = false;
    for (int half = 0; half < 10; ++half) {
      beta_new = beta + scale * step;
      const Eigen::VectorXd eta_new = x * beta_new;
      const Eigen::VectorXd prob_new =
          eta_new.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
      dev_new = binomial_deviance(yv, prob_new);
      if (dev_new <= dev + 1e-12) {
        beta = beta_new;
        eta = eta_new;
        prob = prob_new;
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) throw GlmError("separation");
    if (beta.lpNorm<Eigen::Infinity>() > kCoefDivergence) throw GlmError("separation");
    const double rel = std::abs(dev - dev_new) / (std::abs(dev_new) + 1e-12);
    dev = dev_new;
    if (rel < kDevianceRelTol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw GlmError("nonconvergence");

  const Eigen::VectorXd w = (prob.array() * (1.0 - prob.array())).matrix();
  info = x.transpose() * w.asDiagonal() * x;
  fit.cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.coef = beta;
  fit.se = fit.cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.converged = true;
  fit.iterations = iter;
  fit.deviance = dev;
  return fit;
}

namespace {

EffectEstimate effect_from(const GlmFit& fit, const std::vector<int>& t) {
  EffectEstimate e;
  e.delta = fit.coef(1);
  e.se = fit.se(1);
  e.zero_variance = fit.zero_variance;
  for (int ti : t) (ti == 1 ? e.n_treated : e.n_control) += 1;
  return e;
}

}  // namespace

EffectEstimate fit_gaussian_effect(const std::vector<double>& y, const std::vector<int>& t,
                                   const Eigen::MatrixXd* z) {
  return effect_from(ols_fit(y, t, z), t);
}

EffectEstimate fit_logistic_effect(const std::vector<double>& y, const std::vector<int>& t,
                                   const Eigen::MatrixXd* z) {
  return effect_from(logistic_fit(y, t, z), t);
}

}  // namespace twostage
