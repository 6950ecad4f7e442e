#include "twostage/dgp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "twostage/rng.hpp"

namespace twostage {

namespace {

enum class ColDist { StdNormal, ExpCentered, BernPlusMinus, ChiSqStd, Bern01 };

// Column distributions depend on both the covariate family and the outcome
// family; the two mixed layouts interleave differently.
std::array<ColDist, kNumCovariates> column_layout(CovariateKind kind, Outcome outcome) {
  using D = ColDist;
  if (kind == CovariateKind::Gaussian10)
    return {D::StdNormal, D::StdNormal, D::StdNormal, D::StdNormal, D::StdNormal,
            D::StdNormal, D::StdNormal, D::StdNormal, D::StdNormal, D::StdNormal};
  if (outcome == Outcome::Binary)
    return {D::StdNormal, D::StdNormal, D::StdNormal, D::StdNormal,
            D::ExpCentered, D::ExpCentered, D::BernPlusMinus, D::BernPlusMinus,
            D::ChiSqStd, D::ChiSqStd};
  return {D::StdNormal, D::ExpCentered, D::ChiSqStd, D::Bern01, D::StdNormal,
          D::StdNormal, D::ExpCentered, D::ChiSqStd, D::Bern01, D::StdNormal};
}

double draw_col(ColDist d, Rng& rng) {
  switch (d) {
    case ColDist::StdNormal:
      return rng.normal();
    case ColDist::ExpCentered:
      return rng.exponential() - 1.0;
    case ColDist::BernPlusMinus:
      return rng.bernoulli(0.5) ? 1.0 : -1.0;
    case ColDist::ChiSqStd:
      return (rng.chi_squared(10.0) - 10.0) / std::sqrt(20.0);
    case ColDist::Bern01:
      return rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  return 0.0;
}

double dot_mu(const std::array<double, kNumCovariates>& mu, const double* x) {
  double s = 0.0;
  for (int j = 0; j < kNumCovariates; ++j) s += mu[j] * x[j];
  return s;
}

}  // namespace

double canonical_g(const double* x, Outcome outcome) {
  if (outcome == Outcome::Binary) {
    return std::sin(M_PI * x[0]) / 5.0 - std::sin(M_PI * x[1]) / 5.0 + x[2] * x[2] / 5.0 -
           x[3] * x[3] / 5.0 - x[4] * x[5] / 10.0 + x[6] - x[7] + std::exp(x[8]) / 5.0 -
           std::exp(x[9]) / 5.0;
  }
  return std::sin(M_PI * x[0] * x[1]) / 2.0 + (x[2] - 0.5) * (x[2] - 0.5) / 3.0 +
         x[3] * x[3] * x[3] / 4.0 + x[4] / 5.0 - std::sin(M_PI * x[5] * x[6]) / 2.0 -
         (x[7] - 0.5) * (x[7] - 0.5) / 3.0 - x[8] * x[8] * x[8] / 4.0 - x[9] / 5.0;
}

double canonical_g(const std::vector<double>& x, Outcome outcome) {
  if (x.size() != kNumCovariates) throw std::invalid_argument("canonical_g expects 10 covariates");
  return canonical_g(x.data(), outcome);
}

double true_pbs(const DgpScenario& scenario, const double* x) {
  const double f1 = dot_mu(scenario.mu, x) + canonical_g(x, scenario.outcome);
  return scenario.outcome == Outcome::Binary ? expit(f1) : f1;
}

double true_pbs(const DgpScenario& scenario, const std::vector<double>& x) {
  if (x.size() != kNumCovariates) throw std::invalid_argument("true_pbs expects 10 covariates");
  return true_pbs(scenario, x.data());
}

TrialDataset gen_trial(const DgpScenario& scenario, int n, uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_trial needs n >= 2");
  Rng rng(seed);
  const auto layout = column_layout(scenario.covariates, scenario.outcome);

  TrialDataset data;
  data.outcome = scenario.outcome;
  data.x = Mat(n, kNumCovariates);
  for (int i = 0; i < n; ++i) {
    double* row = data.x.row(i);
    for (int j = 0; j < kNumCovariates; ++j) row[j] = draw_col(layout[j], rng);
  }
  data.t.resize(n);
  for (int i = 0; i < n; ++i) data.t[i] = rng.bernoulli(0.5) ? 1 : 0;
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    const double* row = data.x.row(i);
    const double f =
        dot_mu(scenario.mu, row) + canonical_g(row, scenario.outcome) * data.t[i];
    if (scenario.outcome == Outcome::Continuous)
      data.y[i] = f + rng.normal();
    else
      data.y[i] = rng.bernoulli(expit(f)) ? 1.0 : 0.0;
  }
  return data;
}

OracleEstimand oracle_estimand(const DgpScenario& scenario, const SubgroupingRule& rule,
                               long n_mc, uint64_t seed) {
  if (n_mc < 100000) throw std::invalid_argument("oracle_estimand needs n_mc >= 1e5");
  rule.validate();
  Rng rng(seed);
  const auto layout = column_layout(scenario.covariates, scenario.outcome);
  const bool binary = scenario.outcome == Outcome::Binary;

  struct Acc {
    long n = 0;
    double sum_g = 0, sum_g2 = 0;
    double sum_p1 = 0, sum_p1sq = 0, sum_p0 = 0, sum_p0sq = 0, sum_p1p0 = 0;
  };
  std::vector<Acc> acc(rule.n_groups());

  double x[kNumCovariates];
  for (long i = 0; i < n_mc; ++i) {
    for (int j = 0; j < kNumCovariates; ++j) x[j] = draw_col(layout[j], rng);
    const double lin = dot_mu(scenario.mu, x);
    const double g = canonical_g(x, scenario.outcome);
    const double f1 = lin + g;

    // Classification score: treated risk for binary outcomes; a treated
    // outcome with doubled noise variance for continuous ones.
    double score;
    if (binary)
      score = expit(f1);
    else
      score = f1 + std::sqrt(2.0) * rng.normal();

    Acc& a = acc[static_cast<size_t>(rule.label_index_of(score))];
    a.n += 1;
    a.sum_g += g;
    a.sum_g2 += g * g;
    if (binary) {
      const double p1 = expit(f1);
      const double p0 = expit(lin);
      a.sum_p1 += p1;
      a.sum_p1sq += p1 * p1;
      a.sum_p0 += p0;
      a.sum_p0sq += p0 * p0;
      a.sum_p1p0 += p1 * p0;
    }
  }

  OracleEstimand out;
  out.n_mc = n_mc;
  out.seed = seed;
  for (int li = 0; li < rule.n_groups(); ++li) {
    const Acc& a = acc[static_cast<size_t>(li)];
    const std::string& label = rule.labels[static_cast<size_t>(li)];
    if (a.n == 0)
      throw std::runtime_error("oracle_estimand: empty subgroup '" + label + "' after " +
                               std::to_string(n_mc) + " draws");
    OracleLabel res;
    res.n = a.n;
    const double n = static_cast<double>(a.n);
    const double mean_g = a.sum_g / n;
    const double var_g = std::max(0.0, a.sum_g2 / n - mean_g * mean_g);
    res.delta_link_avg = mean_g;
    if (binary) {
      const double p1 = a.sum_p1 / n;
      const double p0 = a.sum_p0 / n;
      res.delta = logit(p1) - logit(p0);
      // Delta method on (mean p1, mean p0) with their within-subject covariance.
      const double ga = 1.0 / (p1 * (1.0 - p1));
      const double gb = 1.0 / (p0 * (1.0 - p0));
      const double v1 = std::max(0.0, a.sum_p1sq / n - p1 * p1);
      const double v0 = std::max(0.0, a.sum_p0sq / n - p0 * p0);
      const double c10 = a.sum_p1p0 / n - p1 * p0;
      const double var_d = std::max(0.0, ga * ga * v1 + gb * gb * v0 - 2.0 * ga * gb * c10);
      res.mc_se = std::sqrt(var_d / n);
    } else {
      res.delta = mean_g;
      res.mc_se = std::sqrt(var_g / n);
    }
    out.per_label[label] = res;
  }
  return out;
}

void write_trial_csv(const TrialDataset& data, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  for (int j = 1; j <= kNumCovariates; ++j) f << "x" << j << ",";
  f << "t,y\n";
  char buf[40];
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < kNumCovariates; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.x(i, j));
      f << buf << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", data.y[static_cast<size_t>(i)]);
    f << data.t[static_cast<size_t>(i)] << "," << buf << "\n";
  }
}

}  // namespace twostage
