#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "twostage/glm.hpp"
#include "twostage/rng.hpp"

using namespace twostage;

namespace {

// y/t vectors realizing a 2x2 table: a,b treated events/non-events; c,d control.
void fill_table(long a, long b, long c, long d, std::vector<double>& y, std::vector<int>& t) {
  y.clear();
  t.clear();
  for (long i = 0; i < a; ++i) {
    y.push_back(1.0);
    t.push_back(1);
  }
  for (long i = 0; i < b; ++i) {
    y.push_back(0.0);
    t.push_back(1);
  }
  for (long i = 0; i < c; ++i) {
    y.push_back(1.0);
    t.push_back(0);
  }
  for (long i = 0; i < d; ++i) {
    y.push_back(0.0);
    t.push_back(0);
  }
}

double bernoulli_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& beta) {
  double ll = 0.0;
  const Eigen::VectorXd eta = x * beta;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    ll += y(i) * eta(i) - std::log(1.0 + std::exp(eta(i)));
  return ll;
}

}  // namespace

TEST_CASE("unadjusted logistic fit equals the closed-form 2x2 estimate") {
  std::vector<double> y;
  std::vector<int> t;
  fill_table(30, 20, 20, 30, y, t);
  const EffectEstimate e = fit_logistic_effect(y, t);
  CHECK(e.delta == doctest::Approx(std::log(2.25)).epsilon(1e-9));
  CHECK(e.se ==
        doctest::Approx(std::sqrt(1.0 / 30 + 1.0 / 20 + 1.0 / 20 + 1.0 / 30)).epsilon(1e-9));
  CHECK(e.n_treated == 50);
  CHECK(e.n_control == 50);
}

TEST_CASE("random non-degenerate tables match the closed form to 1e-8") {
  Rng rng(2001);
  std::vector<double> y;
  std::vector<int> t;
  for (int rep = 0; rep < 300; ++rep) {
    const long a = 1 + static_cast<long>(rng.uniform_int(40));
    const long b = 1 + static_cast<long>(rng.uniform_int(40));
    const long c = 1 + static_cast<long>(rng.uniform_int(40));
    const long d = 1 + static_cast<long>(rng.uniform_int(40));
    fill_table(a, b, c, d, y, t);
    const EffectEstimate e = fit_logistic_effect(y, t);
    const double log_or = std::log(static_cast<double>(a) * d / (static_cast<double>(b) * c));
    const double woolf = std::sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d);
    REQUIRE(std::abs(e.delta - log_or) < 1e-8);
    REQUIRE(std::abs(e.se - woolf) < 1e-8);
  }
}

TEST_CASE("Wald covariance matches a finite-difference Hessian") {
  Rng rng(42);
  const int n = 400;
  Eigen::MatrixXd z(n, 2);
  std::vector<double> y(n);
  std::vector<int> t(n);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = rng.normal();
    z(i, 1) = rng.normal();
    t[static_cast<size_t>(i)] = rng.bernoulli(0.5) ? 1 : 0;
    const double eta = -0.3 + 0.8 * t[static_cast<size_t>(i)] + 0.5 * z(i, 0) - 0.7 * z(i, 1);
    y[static_cast<size_t>(i)] = rng.bernoulli(expit(eta)) ? 1.0 : 0.0;
  }
  const GlmFit fit = logistic_fit(y, t, &z);
  REQUIRE(fit.converged);

  Eigen::MatrixXd x(n, 4);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = t[static_cast<size_t>(i)];
    x(i, 2) = z(i, 0);
    x(i, 3) = z(i, 1);
  }
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const double h = 1e-5;
  Eigen::MatrixXd hess(4, 4);
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) {
      Eigen::VectorXd bpp = fit.coef, bpm = fit.coef, bmp = fit.coef, bmm = fit.coef;
      bpp(j) += h;
      bpp(k) += h;
      bpm(j) += h;
      bpm(k) -= h;
      bmp(j) -= h;
      bmp(k) += h;
      bmm(j) -= h;
      bmm(k) -= h;
      hess(j, k) = (bernoulli_loglik(x, yv, bpp) - bernoulli_loglik(x, yv, bpm) -
                    bernoulli_loglik(x, yv, bmp) + bernoulli_loglik(x, yv, bmm)) /
                   (4.0 * h * h);
    }
  const Eigen::MatrixXd cov_fd = (-hess).ldlt().solve(Eigen::MatrixXd::Identity(4, 4));
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k)
      CHECK(std::abs(fit.cov(j, k) - cov_fd(j, k)) <
            1e-4 * std::max(1.0, std::abs(cov_fd(j, k))));
}

TEST_CASE("identity-link effect is the difference in arm means") {
  const std::vector<double> y = {0.0, 1.0, 2.0, 5.0};
  const std::vector<int> t = {0, 0, 1, 1};
  const EffectEstimate e = fit_gaussian_effect(y, t);
  CHECK(e.delta == doctest::Approx(3.0).epsilon(1e-12));
  // pooled residual variance 2.5 over balanced arms of 2
  CHECK(e.se == doctest::Approx(std::sqrt(2.5)).epsilon(1e-12));
}

TEST_CASE("identity link is shift-invariant, both links flip sign with arms") {
  Rng rng(7);
  const int n = 120;
  std::vector<double> y(n), y_shift(n);
  std::vector<int> t(n), t_flip(n);
  for (int i = 0; i < n; ++i) {
    t[static_cast<size_t>(i)] = i % 2;
    t_flip[static_cast<size_t>(i)] = 1 - i % 2;
    y[static_cast<size_t>(i)] = rng.normal(0.4 * t[static_cast<size_t>(i)], 1.0);
    y_shift[static_cast<size_t>(i)] = y[static_cast<size_t>(i)] + 100.0;
  }
  const EffectEstimate base = fit_gaussian_effect(y, t);
  const EffectEstimate shifted = fit_gaussian_effect(y_shift, t);
  const EffectEstimate flipped = fit_gaussian_effect(y, t_flip);
  CHECK(base.delta == doctest::Approx(shifted.delta).epsilon(1e-9));
  CHECK(base.se == doctest::Approx(shifted.se).epsilon(1e-9));
  CHECK(base.delta == doctest::Approx(-flipped.delta).epsilon(1e-9));
  CHECK(base.se == doctest::Approx(flipped.se).epsilon(1e-9));

  std::vector<double> yb(n);
  for (int i = 0; i < n; ++i)
    yb[static_cast<size_t>(i)] = rng.bernoulli(expit(0.7 * t[static_cast<size_t>(i)])) ? 1.0 : 0.0;
  const EffectEstimate lb = fit_logistic_effect(yb, t);
  const EffectEstimate lf = fit_logistic_effect(yb, t_flip);
  CHECK(lb.delta == doctest::Approx(-lf.delta).epsilon(1e-8));
  CHECK(lb.se == doctest::Approx(lf.se).epsilon(1e-8));
}

TEST_CASE("logistic failure taxonomy") {
  std::vector<double> y;
  std::vector<int> t;

  SUBCASE("perfect alignment is separation") {
    fill_table(25, 0, 0, 25, y, t);
    CHECK_THROWS_WITH_AS(fit_logistic_effect(y, t), "separation", GlmError);
  }
  SUBCASE("single empty cell is reported as such") {
    fill_table(25, 0, 10, 15, y, t);
    CHECK_THROWS_WITH_AS(fit_logistic_effect(y, t), "zero cell", GlmError);
  }
  SUBCASE("constant response") {
    y = {1.0, 1.0, 1.0, 1.0};
    t = {0, 1, 0, 1};
    CHECK_THROWS_WITH_AS(fit_logistic_effect(y, t), "degenerate response", GlmError);
  }
  SUBCASE("single arm") {
    y = {0.0, 1.0, 0.0, 1.0};
    t = {1, 1, 1, 1};
    CHECK_THROWS_WITH_AS(fit_logistic_effect(y, t), "degenerate arm", GlmError);
    CHECK_THROWS_WITH_AS(fit_gaussian_effect(y, t), "degenerate arm", GlmError);
  }
  SUBCASE("non-binary response rejected by the logit link") {
    y = {0.0, 2.0, 1.0, 0.0};
    t = {0, 1, 0, 1};
    CHECK_THROWS_WITH_AS(fit_logistic_effect(y, t), "non-binary response", GlmError);
  }
}

TEST_CASE("rank-deficient adjustment columns are rejected") {
  std::vector<double> y = {0.1, 0.9, 0.4, 1.2, 0.3, 0.8};
  std::vector<int> t = {0, 1, 0, 1, 0, 1};
  Eigen::MatrixXd z(6, 1);
  for (int i = 0; i < 6; ++i) z(i, 0) = t[static_cast<size_t>(i)];  // collinear with arm
  CHECK_THROWS_WITH_AS(fit_gaussian_effect(y, t, &z), "rank-deficient design", GlmError);
}

TEST_CASE("constant gaussian response sets the zero-variance flag") {
  const std::vector<double> y = {2.0, 2.0, 2.0, 2.0, 2.0, 2.0};
  const std::vector<int> t = {0, 1, 0, 1, 0, 1};
  const EffectEstimate e = fit_gaussian_effect(y, t);
  CHECK(e.zero_variance);
  CHECK(e.delta == doctest::Approx(0.0));
  CHECK(e.se == doctest::Approx(0.0));
}

TEST_CASE("adjusted logistic fit recovers known coefficients on a large sample") {
  Rng rng(99);
  const int n = 20000;
  Eigen::MatrixXd z(n, 1);
  std::vector<double> y(n);
  std::vector<int> t(n);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = rng.normal();
    t[static_cast<size_t>(i)] = rng.bernoulli(0.5) ? 1 : 0;
    const double eta = 0.2 + 0.9 * t[static_cast<size_t>(i)] - 0.6 * z(i, 0);
    y[static_cast<size_t>(i)] = rng.bernoulli(expit(eta)) ? 1.0 : 0.0;
  }
  const GlmFit fit = logistic_fit(y, t, &z);
  CHECK(std::abs(fit.coef(0) - 0.2) < 0.08);
  CHECK(std::abs(fit.coef(1) - 0.9) < 0.08);
  CHECK(std::abs(fit.coef(2) - -0.6) < 0.08);
}
