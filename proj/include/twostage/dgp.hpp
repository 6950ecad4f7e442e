#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twostage/design.hpp"
#include "twostage/mat.hpp"

namespace twostage {

enum class Outcome { Continuous, Binary };

enum class CovariateKind { Gaussian10, Mixed10 };

constexpr int kNumCovariates = 10;

struct DgpScenario {
  Outcome outcome = Outcome::Binary;
  CovariateKind covariates = CovariateKind::Gaussian10;
  std::array<double, kNumCovariates> mu = {0.5, 1.0, 0.75, 1.0, 0.5, -0.5, -1.0, -0.75, -1.0, -0.5};
  double min_cond = 0.5;  // probability scale for binary, outcome scale for continuous

  static DgpScenario standard(Outcome o, CovariateKind c) {
    DgpScenario s;
    s.outcome = o;
    s.covariates = c;
    s.min_cond = (o == Outcome::Binary) ? 0.5 : 0.0;
    return s;
  }
};

struct TrialDataset {
  Mat x;                  // n x 10 covariates
  std::vector<int> t;     // treatment arm, 0/1
  std::vector<double> y;  // outcome; {0,1} when binary
  Outcome outcome = Outcome::Binary;

  int n() const { return x.n; }
  TrialDataset rows(const std::vector<int>& idx) const {
    TrialDataset out;
    out.x = x.rows(idx);
    out.t = subset(t, idx);
    out.y = subset(y, idx);
    out.outcome = outcome;
    return out;
  }
};

struct OracleLabel {
  double delta = 0.0;          // link-scale subgroup effect
  double mc_se = 0.0;          // Monte Carlo SE of delta
  double delta_link_avg = 0.0; // mean of per-subject link-scale differences
  long n = 0;                  // subjects landing in this label
};

struct OracleEstimand {
  std::map<std::string, OracleLabel> per_label;
  long n_mc = 0;
  uint64_t seed = 0;
};

// Treatment-interaction term g(x); the shape differs by outcome family.
double canonical_g(const std::vector<double>& x, Outcome outcome);
double canonical_g(const double* x, Outcome outcome);

// E[Y | T=1, X=x]: probability scale for binary, outcome scale otherwise.
double true_pbs(const DgpScenario& scenario, const std::vector<double>& x);
double true_pbs(const DgpScenario& scenario, const double* x);

TrialDataset gen_trial(const DgpScenario& scenario, int n, uint64_t seed);

// Ground-truth subgroup effects by large-sample simulation.  Binary subjects
// are classified on their noiseless treated risk; continuous subjects on a
// noisy treated outcome (see README for the calibration).
OracleEstimand oracle_estimand(const DgpScenario& scenario, const SubgroupingRule& rule,
                               long n_mc, uint64_t seed);

void write_trial_csv(const TrialDataset& data, const std::string& path);

}  // namespace twostage
