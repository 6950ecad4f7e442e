#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "twostage/dgp.hpp"
#include "twostage/rng.hpp"
#include "twostage/twostage.hpp"

using namespace twostage;

namespace {

SubgroupingRule responder_rule(double cut) {
  SubgroupingRule rule;
  rule.cutpoints = {cut};
  rule.labels = {"UR", "LR"};
  return rule;
}

}  // namespace

TEST_CASE("pooling arithmetic on the worked example") {
  const RubinPool p = rubin_pool({0.5, 0.7}, {0.04, 0.06});
  CHECK(std::abs(p.delta_bar - 0.6) < 1e-12);
  CHECK(std::abs(p.within_var - 0.05) < 1e-12);
  CHECK(std::abs(p.between_var - 0.02) < 1e-12);
  CHECK(std::abs(p.total_var - 0.08) < 1e-12);
}

TEST_CASE("pooling collapses when every design agrees") {
  const RubinPool p = rubin_pool({0.6, 0.6, 0.6}, {0.05, 0.05, 0.05});
  CHECK(p.between_var == doctest::Approx(0.0));
  CHECK(p.total_var == doctest::Approx(0.05));
  CHECK(p.delta_bar == doctest::Approx(0.6));
}

TEST_CASE("pooling input validation") {
  CHECK_THROWS_AS(rubin_pool({0.5}, {0.04}), std::invalid_argument);
  CHECK_THROWS_AS(rubin_pool({0.5, 0.6}, {0.04}), std::invalid_argument);
  CHECK_THROWS_AS(rubin_pool({0.5, 0.6}, {0.04, -0.01}), std::invalid_argument);
}

TEST_CASE("design/evaluation split partitions the data") {
  const auto sc = DgpScenario::standard(Outcome::Binary, CovariateKind::Gaussian10);
  const TrialDataset d = gen_trial(sc, 500, 13);
  int n_treated = 0;
  for (int ti : d.t) n_treated += ti;

  const SplitResult s = split_design_eval(d, SplitSpec{0.5, 99});
  CHECK(static_cast<int>(s.design_idx.size()) == n_treated / 2);
  CHECK(s.design_idx.size() + s.eval_idx.size() == static_cast<size_t>(d.n()));
  for (int i : s.design_idx) CHECK(d.t[static_cast<size_t>(i)] == 1);

  std::set<int> seen(s.design_idx.begin(), s.design_idx.end());
  for (int i : s.eval_idx) CHECK(seen.insert(i).second);
  CHECK(seen.size() == static_cast<size_t>(d.n()));
  CHECK(std::is_sorted(s.design_idx.begin(), s.design_idx.end()));
  CHECK(std::is_sorted(s.eval_idx.begin(), s.eval_idx.end()));

  const SplitResult again = split_design_eval(d, SplitSpec{0.5, 99});
  CHECK(again.design_idx == s.design_idx);
  const SplitResult other = split_design_eval(d, SplitSpec{0.5, 100});
  CHECK(other.design_idx != s.design_idx);

  CHECK_THROWS_AS(split_design_eval(d, SplitSpec{0.0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(split_design_eval(d, SplitSpec{1.0, 1}), std::invalid_argument);

  TrialDataset tiny = d.rows({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  CHECK_THROWS_AS(split_design_eval(tiny, SplitSpec{0.5, 1}), std::runtime_error);
}

TEST_CASE("point-score estimates match per-stratum fits done by hand") {
  const auto sc = DgpScenario::standard(Outcome::Continuous, CovariateKind::Gaussian10);
  const TrialDataset d = gen_trial(sc, 400, 31);
  std::vector<double> scores(static_cast<size_t>(d.n()));
  for (int i = 0; i < d.n(); ++i)
    scores[static_cast<size_t>(i)] = true_pbs(sc, d.x.row(i));

  const SubgroupingRule rule = responder_rule(0.0);
  const SubgroupEffects eff = naive_estimate(scores, rule, d, Link::Identity);
  REQUIRE(eff.by_label.count("LR") == 1);
  REQUIRE(eff.by_label.count("UR") == 1);

  for (const std::string label : {"UR", "LR"}) {
    std::vector<double> y;
    std::vector<int> t;
    for (int i = 0; i < d.n(); ++i)
      if (rule.label_of(scores[static_cast<size_t>(i)]) == label) {
        y.push_back(d.y[static_cast<size_t>(i)]);
        t.push_back(d.t[static_cast<size_t>(i)]);
      }
    const EffectEstimate direct = fit_gaussian_effect(y, t);
    const LabelEffect& got = eff.by_label.at(label);
    CHECK(got.est.delta == doctest::Approx(direct.delta).epsilon(1e-12));
    CHECK(got.est.se == doctest::Approx(direct.se).epsilon(1e-12));
    CHECK(got.ci_low == doctest::Approx(direct.delta - 1.96 * direct.se));
    CHECK(got.ci_high == doctest::Approx(direct.delta + 1.96 * direct.se));
  }
}

TEST_CASE("a collapsing rule reproduces the unstratified estimate") {
  const auto sc = DgpScenario::standard(Outcome::Binary, CovariateKind::Gaussian10);
  const TrialDataset d = gen_trial(sc, 300, 17);
  const std::vector<double> scores(static_cast<size_t>(d.n()), 0.25);

  const SubgroupEffects eff = naive_estimate(scores, responder_rule(0.5), d, Link::Logit);
  REQUIRE(eff.by_label.count("UR") == 1);
  CHECK(eff.failures.count("LR") == 1);  // empty stratum cannot be fit

  const EffectEstimate overall = fit_logistic_effect(d.y, d.t);
  CHECK(eff.by_label.at("UR").est.delta == doctest::Approx(overall.delta).epsilon(1e-12));

  // corrected path with identical draws: between-design variance vanishes
  ScoreDrawMatrix draws(3, d.n(), ScoreScale::Probability);
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < d.n(); ++i) draws.at(k, i) = 0.25;
  const CorrectedEffects ce = corrected_estimate(draws, responder_rule(0.5), d, Link::Logit);
  const PooledEstimate& pe = ce.by_label.at("UR");
  CHECK(pe.delta_bar == doctest::Approx(overall.delta).epsilon(1e-12));
  CHECK(pe.between_var == doctest::Approx(0.0));
  CHECK(pe.total_var == doctest::Approx(overall.se * overall.se).epsilon(1e-10));
  CHECK(ce.failures.count("LR") == 1);
}

TEST_CASE("pooled variance always dominates the mean within-design variance") {
  const auto sc = DgpScenario::standard(Outcome::Binary, CovariateKind::Gaussian10);
  const TrialDataset d = gen_trial(sc, 500, 23);
  Rng rng(5);
  ScoreDrawMatrix draws(20, d.n(), ScoreScale::Probability);
  for (int k = 0; k < 20; ++k)
    for (int i = 0; i < d.n(); ++i)
      draws.at(k, i) = expit(logit(true_pbs(sc, d.x.row(i))) + 0.3 * rng.normal());

  const CorrectedEffects ce = corrected_estimate(draws, responder_rule(0.5), d, Link::Logit);
  REQUIRE(!ce.by_label.empty());
  for (const auto& [label, pe] : ce.by_label) {
    CHECK(pe.total_var >= pe.within_var);
    CHECK(pe.k_total == 20);
    CHECK(pe.k_valid >= 10);
    CHECK(pe.ci_high > pe.ci_low);
  }
}

TEST_CASE("scale equivariance of the identity-link pipeline") {
  const auto sc = DgpScenario::standard(Outcome::Continuous, CovariateKind::Gaussian10);
  TrialDataset d = gen_trial(sc, 400, 41);
  Rng rng(9);
  ScoreDrawMatrix draws(10, d.n(), ScoreScale::Outcome);
  for (int k = 0; k < 10; ++k)
    for (int i = 0; i < d.n(); ++i)
      draws.at(k, i) = true_pbs(sc, d.x.row(i)) + 0.2 * rng.normal();

  const CorrectedEffects base = corrected_estimate(draws, responder_rule(0.0), d, Link::Identity);
  TrialDataset scaled = d;
  for (double& yi : scaled.y) yi *= 3.0;
  const CorrectedEffects tri = corrected_estimate(draws, responder_rule(0.0), scaled, Link::Identity);
  for (const auto& [label, pe] : base.by_label) {
    CHECK(tri.by_label.at(label).delta_bar == doctest::Approx(3.0 * pe.delta_bar));
    CHECK(tri.by_label.at(label).total_var == doctest::Approx(9.0 * pe.total_var));
  }
}

TEST_CASE("subject order does not change subgroup estimates") {
  const auto sc = DgpScenario::standard(Outcome::Binary, CovariateKind::Gaussian10);
  const TrialDataset d = gen_trial(sc, 300, 57);
  std::vector<double> scores(static_cast<size_t>(d.n()));
  for (int i = 0; i < d.n(); ++i)
    scores[static_cast<size_t>(i)] = true_pbs(sc, d.x.row(i));

  std::vector<int> perm(static_cast<size_t>(d.n()));
  for (int i = 0; i < d.n(); ++i) perm[static_cast<size_t>(i)] = d.n() - 1 - i;
  const TrialDataset rev = d.rows(perm);
  std::vector<double> scores_rev(scores.rbegin(), scores.rend());

  const SubgroupEffects a = naive_estimate(scores, responder_rule(0.5), d, Link::Logit);
  const SubgroupEffects b = naive_estimate(scores_rev, responder_rule(0.5), rev, Link::Logit);
  for (const auto& [label, le] : a.by_label) {
    CHECK(b.by_label.at(label).est.delta == doctest::Approx(le.est.delta).epsilon(1e-10));
    CHECK(b.by_label.at(label).est.se == doctest::Approx(le.est.se).epsilon(1e-10));
  }
}

TEST_CASE("posterior-mean classification and first-label confidence") {
  SubgroupingRule rule = responder_rule(0.5);  // labels UR (low), LR (high)
  ScoreDrawMatrix draws(4, 3, ScoreScale::Probability);
  // subject 0: all draws below; subject 1: all above; subject 2: split 2/2
  const double rows[4][3] = {{0.1, 0.9, 0.4},
                             {0.2, 0.8, 0.6},
                             {0.3, 0.7, 0.45},
                             {0.2, 0.9, 0.65}};
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < 3; ++i) draws.at(k, i) = rows[k][i];

  const Classification c = classify_posterior_mean(draws, rule);
  CHECK(c.label_ix == std::vector<int>{0, 1, 1});  // means 0.2, 0.825, 0.525
  CHECK(c.confidence[0] == doctest::Approx(1.0));
  CHECK(c.confidence[1] == doctest::Approx(0.0));
  CHECK(c.confidence[2] == doctest::Approx(0.5));
}

TEST_CASE("corrected estimation needs at least two draws") {
  const auto sc = DgpScenario::standard(Outcome::Binary, CovariateKind::Gaussian10);
  const TrialDataset d = gen_trial(sc, 100, 3);
  ScoreDrawMatrix draws(1, d.n(), ScoreScale::Probability);
  CHECK_THROWS_AS(corrected_estimate(draws, responder_rule(0.5), d, Link::Logit),
                  std::invalid_argument);
}
