#include "twostage/twostage.hpp"

#include <algorithm>
#include <cmath>

#include "twostage/rng.hpp"

namespace twostage {

SplitResult split_design_eval(const TrialDataset& data, const SplitSpec& spec) {
  if (spec.design_fraction <= 0.0 || spec.design_fraction >= 1.0)
    throw std::invalid_argument("design_fraction must be in (0,1)");
  std::vector<int> treated;
  for (int i = 0; i < data.n(); ++i)
    if (data.t[static_cast<size_t>(i)] == 1) treated.push_back(i);
  if (treated.size() < 20) throw std::runtime_error("too few treated subjects to split");

  Rng rng(spec.seed);
  for (size_t i = treated.size() - 1; i > 0; --i) {
    const size_t j = rng.uniform_int(i + 1);
    std::swap(treated[i], treated[j]);
  }
  const size_t n_design =
      static_cast<size_t>(spec.design_fraction * static_cast<double>(treated.size()));

  SplitResult out;
  out.design_idx.assign(treated.begin(), treated.begin() + static_cast<long>(n_design));
  std::sort(out.design_idx.begin(), out.design_idx.end());
  std::vector<char> in_design(static_cast<size_t>(data.n()), 0);
  for (int i : out.design_idx) in_design[static_cast<size_t>(i)] = 1;
  for (int i = 0; i < data.n(); ++i)
    if (!in_design[static_cast<size_t>(i)]) out.eval_idx.push_back(i);
  return out;
}

RubinPool rubin_pool(const std::vector<double>& deltas, const std::vector<double>& variances) {
  const size_t k = deltas.size();
  if (k != variances.size()) throw std::invalid_argument("rubin_pool length mismatch");
  if (k <= 1) throw std::invalid_argument("between-design variance undefined");
  for (double v : variances)
    if (v < 0.0) throw std::invalid_argument("negative variance");

  RubinPool out;
  for (size_t i = 0; i < k; ++i) {
    out.delta_bar += deltas[i];
    out.within_var += variances[i];
  }
  const double kk = static_cast<double>(k);
  out.delta_bar /= kk;
  out.within_var /= kk;
  double ss = 0.0;
  for (double d : deltas) ss += (d - out.delta_bar) * (d - out.delta_bar);
  out.between_var = ss / (kk - 1.0);
  out.total_var = out.within_var + (1.0 + 1.0 / kk) * out.between_var;
  return out;
}

namespace {

struct LabelSlices {
  std::vector<std::vector<double>> y;
  std::vector<std::vector<int>> t;
  std::vector<Eigen::MatrixXd> z;
  bool has_z = false;
};

LabelSlices slice_by_label(const SubgroupDesign& design, int n_groups,
                           const TrialDataset& eval_data, const Eigen::MatrixXd* z) {
  LabelSlices s;
  s.y.resize(static_cast<size_t>(n_groups));
  s.t.resize(static_cast<size_t>(n_groups));
  s.has_z = z != nullptr;
  std::vector<std::vector<int>> rows(static_cast<size_t>(n_groups));
  for (size_t i = 0; i < design.label_ix.size(); ++i) {
    const size_t li = static_cast<size_t>(design.label_ix[i]);
    s.y[li].push_back(eval_data.y[i]);
    s.t[li].push_back(eval_data.t[i]);
    rows[li].push_back(static_cast<int>(i));
  }
  if (z) {
    s.z.resize(static_cast<size_t>(n_groups));
    for (int g = 0; g < n_groups; ++g) {
      const auto& r = rows[static_cast<size_t>(g)];
      Eigen::MatrixXd zg(static_cast<Eigen::Index>(r.size()), z->cols());
      for (size_t i = 0; i < r.size(); ++i) zg.row(static_cast<Eigen::Index>(i)) = z->row(r[i]);
      s.z[static_cast<size_t>(g)] = std::move(zg);
    }
  }
  return s;
}

}  // namespace

SubgroupEffects naive_estimate(const std::vector<double>& score_point,
                               const SubgroupingRule& rule, const TrialDataset& eval_data,
                               Link link, const Eigen::MatrixXd* z) {
  rule.validate();
  if (static_cast<int>(score_point.size()) != eval_data.n())
    throw std::invalid_argument("score length mismatch");
  const SubgroupDesign design = subgroup_from_scores(score_point, rule);
  const LabelSlices s = slice_by_label(design, rule.n_groups(), eval_data, z);

  SubgroupEffects out;
  for (int g = 0; g < rule.n_groups(); ++g) {
    const std::string& label = rule.labels[static_cast<size_t>(g)];
    const size_t gi = static_cast<size_t>(g);
    try {
      EffectEstimate est =
          fit_effect(link, s.y[gi], s.t[gi], s.has_z ? &s.z[gi] : nullptr);
      est.label = label;
      LabelEffect le;
      le.est = est;
      le.ci_low = est.delta - kCiMultiplier * est.se;
      le.ci_high = est.delta + kCiMultiplier * est.se;
      out.by_label[label] = le;
    } catch (const GlmError& e) {
      out.failures[label] = e.kind;
    }
  }
  return out;
}

CorrectedEffects corrected_estimate(const ScoreDrawMatrix& score_draws,
                                    const SubgroupingRule& rule, const TrialDataset& eval_data,
                                    Link link, const Eigen::MatrixXd* z) {
  rule.validate();
  if (score_draws.k < 2) throw std::invalid_argument("need at least two score draws");
  if (score_draws.n != eval_data.n()) throw std::invalid_argument("score columns mismatch");

  const int n_groups = rule.n_groups();
  std::vector<std::vector<double>> deltas(static_cast<size_t>(n_groups));
  std::vector<std::vector<double>> variances(static_cast<size_t>(n_groups));
  for (int d = 0; d < score_draws.k; ++d) {
    const SubgroupDesign design =
        subgroup_from_scores(score_draws.draw_row(d), rule, DesignSource::PosteriorDraw, d);
    const LabelSlices s = slice_by_label(design, n_groups, eval_data, z);
    for (int g = 0; g < n_groups; ++g) {
      const size_t gi = static_cast<size_t>(g);
      try {
        const EffectEstimate est =
            fit_effect(link, s.y[gi], s.t[gi], s.has_z ? &s.z[gi] : nullptr);
        deltas[gi].push_back(est.delta);
        variances[gi].push_back(est.se * est.se);
      } catch (const GlmError&) {
        // skipped draw; tallied through k_valid below
      }
    }
  }

  CorrectedEffects out;
  const double floor_valid = std::max(2.0, 0.5 * static_cast<double>(score_draws.k));
  for (int g = 0; g < n_groups; ++g) {
    const std::string& label = rule.labels[static_cast<size_t>(g)];
    const size_t gi = static_cast<size_t>(g);
    const int k_valid = static_cast<int>(deltas[gi].size());
    if (static_cast<double>(k_valid) < floor_valid) {
      out.failures[label] = "insufficient valid designs";
      continue;
    }
    const RubinPool pool = rubin_pool(deltas[gi], variances[gi]);
    PooledEstimate pe;
    pe.label = label;
    pe.delta_bar = pool.delta_bar;
    pe.within_var = pool.within_var;
    pe.between_var = pool.between_var;
    pe.total_var = pool.total_var;
    const double se = std::sqrt(pool.total_var);
    pe.ci_low = pool.delta_bar - kCiMultiplier * se;
    pe.ci_high = pool.delta_bar + kCiMultiplier * se;
    pe.k_valid = k_valid;
    pe.k_total = score_draws.k;
    out.by_label[label] = pe;
  }
  if (out.by_label.empty()) throw std::runtime_error("insufficient valid designs for every label");
  return out;
}

Classification classify_posterior_mean(const ScoreDrawMatrix& score_draws,
                                       const SubgroupingRule& rule) {
  rule.validate();
  if (score_draws.k < 1) throw std::invalid_argument("need at least one score draw");
  Classification out;
  const std::vector<double> mean = score_draws.posterior_mean();
  out.label_ix.resize(static_cast<size_t>(score_draws.n));
  out.confidence.resize(static_cast<size_t>(score_draws.n));
  for (int i = 0; i < score_draws.n; ++i) {
    out.label_ix[static_cast<size_t>(i)] = rule.label_index_of(mean[static_cast<size_t>(i)]);
    int front = 0;
    for (int d = 0; d < score_draws.k; ++d)
      if (rule.label_index_of(score_draws.at(d, i)) == 0) ++front;
    out.confidence[static_cast<size_t>(i)] =
        static_cast<double>(front) / static_cast<double>(score_draws.k);
  }
  return out;
}

}  // namespace twostage
