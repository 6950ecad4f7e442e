#include "twostage/mccv.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "twostage/parallel.hpp"
#include "twostage/rng.hpp"

namespace twostage {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) throw std::logic_error("median of empty vector");
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (static_cast<double>(v.size()) - 1.0));
}

struct RepEstimate {
  bool valid = false;
  double point = 0.0, se = 0.0, lo = 0.0, hi = 0.0;
};

struct RepRecord {
  std::vector<RepEstimate> cells;   // methods x labels
  std::vector<int> sizes;           // per label, from the point-score subgrouping
  bool sizes_valid = false;
};

}  // namespace

MccvResult run_mccv(const TrialDataset& data, const MccvConfig& config) {
  if (config.repetitions < 2) throw std::invalid_argument("need at least 2 repetitions");
  config.rule.validate();
  if (config.adjust_cols.size() != config.reference_levels.size())
    throw std::invalid_argument("adjustment columns and reference levels must align");
  for (int c : config.adjust_cols)
    if (c < 0 || c >= data.x.p) throw std::invalid_argument("adjustment column out of range");
  if (config.methods.empty()) throw std::invalid_argument("no methods requested");
  if (config.link == Link::Logit)
    for (double yi : data.y)
      if (yi != 0.0 && yi != 1.0)
        throw std::invalid_argument("logit link needs a binary outcome");
  {
    int n1 = 0;
    for (int ti : data.t) n1 += ti;
    if (n1 == 0 || n1 == data.n()) throw std::invalid_argument("both arms required");
  }

  const int n_methods = static_cast<int>(config.methods.size());
  const int n_labels = config.rule.n_groups();
  const int reps = config.repetitions;
  const bool needs_bart =
      std::any_of(config.methods.begin(), config.methods.end(), [](Method m) {
        return m == Method::NaiveBART || m == Method::CorrectedBART;
      });
  const Outcome outcome = config.link == Link::Logit ? Outcome::Binary : Outcome::Continuous;

  std::vector<RepRecord> records(static_cast<size_t>(reps));
  for (auto& r : records) {
    r.cells.resize(static_cast<size_t>(n_methods * n_labels));
    r.sizes.assign(static_cast<size_t>(n_labels), 0);
  }
  // Classification confidence summaries come from the first repetition's fit.
  std::vector<MccvLabelStats> confidence(static_cast<size_t>(n_labels));

  parallel_for(reps, config.threads, [&](int rep) {
    RepRecord& rec = records[static_cast<size_t>(rep)];
    const SplitResult split = split_design_eval(
        data, SplitSpec{config.design_fraction,
                        derive_seed(config.seed, "split", static_cast<uint64_t>(rep))});
    const TrialDataset design = data.rows(split.design_idx);
    const TrialDataset eval = data.rows(split.eval_idx);

    // Scores are computed with the adjustment covariates pinned at their
    // reference levels; the stage-2 GLMs see the real values.
    Mat x_std = eval.x;
    for (size_t a = 0; a < config.adjust_cols.size(); ++a)
      for (int i = 0; i < x_std.n; ++i)
        x_std(i, config.adjust_cols[a]) = config.reference_levels[a];
    Eigen::MatrixXd z(eval.n(), static_cast<Eigen::Index>(config.adjust_cols.size()));
    for (size_t a = 0; a < config.adjust_cols.size(); ++a)
      for (int i = 0; i < eval.n(); ++i)
        z(i, static_cast<Eigen::Index>(a)) = eval.x(i, config.adjust_cols[a]);
    const Eigen::MatrixXd* zp = config.adjust_cols.empty() ? nullptr : &z;

    ScoreDrawMatrix draws;
    std::vector<double> point;
    if (needs_bart) {
      const BartChain chain =
          fit_bart(design.x, design.y, outcome, config.bart,
                   derive_seed(config.seed, "bart", static_cast<uint64_t>(rep)));
      draws = predict_posterior(chain, x_std);
      point = draws.posterior_mean();
    }
    std::vector<double> gbm_scores;
    if (std::find(config.methods.begin(), config.methods.end(), Method::NaiveGBM) !=
        config.methods.end()) {
      GbmHyper hyper = config.gbm;
      hyper.loss =
          config.link == Link::Logit ? GbmLoss::Logistic : GbmLoss::SquaredError;
      if (config.gbm_tune)
        hyper = tune_cv(design.x, design.y, hyper.loss, 5,
                        derive_seed(config.seed, "gbmcv", static_cast<uint64_t>(rep)));
      const GbmModel model =
          fit_gbm(design.x, design.y, hyper,
                  derive_seed(config.seed, "gbm", static_cast<uint64_t>(rep)));
      gbm_scores = predict_gbm(model, x_std);
    }

    const std::vector<double>& size_scores = needs_bart ? point : gbm_scores;
    if (!size_scores.empty()) {
      const SubgroupDesign d = subgroup_from_scores(size_scores, config.rule);
      for (int ix : d.label_ix) rec.sizes[static_cast<size_t>(ix)] += 1;
      rec.sizes_valid = true;
    }

    if (rep == 0 && needs_bart) {
      const Classification cls = classify_posterior_mean(draws, config.rule);
      std::vector<double> sum(static_cast<size_t>(n_labels), 0.0);
      std::vector<int> count(static_cast<size_t>(n_labels), 0);
      for (size_t i = 0; i < cls.label_ix.size(); ++i) {
        sum[static_cast<size_t>(cls.label_ix[i])] += cls.confidence[i];
        count[static_cast<size_t>(cls.label_ix[i])] += 1;
      }
      for (int li = 0; li < n_labels; ++li) {
        confidence[static_cast<size_t>(li)].n_classified = count[static_cast<size_t>(li)];
        confidence[static_cast<size_t>(li)].mean_confidence =
            count[static_cast<size_t>(li)] > 0
                ? sum[static_cast<size_t>(li)] / count[static_cast<size_t>(li)]
                : 0.0;
      }
    }

    for (int mi = 0; mi < n_methods; ++mi) {
      const Method method = config.methods[static_cast<size_t>(mi)];
      auto cell = [&](int li) -> RepEstimate& {
        return rec.cells[static_cast<size_t>(mi * n_labels + li)];
      };
      try {
        if (method == Method::CorrectedBART) {
          const CorrectedEffects eff =
              corrected_estimate(draws, config.rule, eval, config.link, zp);
          for (int li = 0; li < n_labels; ++li) {
            const auto it =
                eff.by_label.find(config.rule.labels[static_cast<size_t>(li)]);
            if (it == eff.by_label.end()) continue;
            RepEstimate& c = cell(li);
            c.valid = true;
            c.point = it->second.delta_bar;
            c.se = std::sqrt(it->second.total_var);
            c.lo = it->second.ci_low;
            c.hi = it->second.ci_high;
          }
        } else {
          const std::vector<double>& scores =
              method == Method::NaiveBART ? point : gbm_scores;
          const SubgroupEffects eff =
              naive_estimate(scores, config.rule, eval, config.link, zp);
          for (int li = 0; li < n_labels; ++li) {
            const auto it =
                eff.by_label.find(config.rule.labels[static_cast<size_t>(li)]);
            if (it == eff.by_label.end()) continue;
            RepEstimate& c = cell(li);
            c.valid = true;
            c.point = it->second.est.delta;
            c.se = it->second.est.se;
            c.lo = it->second.ci_low;
            c.hi = it->second.ci_high;
          }
        }
      } catch (const std::exception&) {
        // repetition-level failure for this method; tallied via n_valid
      }
    }
  });

  MccvResult result;
  result.link = config.link;
  for (int mi = 0; mi < n_methods; ++mi) {
    for (int li = 0; li < n_labels; ++li) {
      const std::string& label = config.rule.labels[static_cast<size_t>(li)];
      std::vector<double> points, ses, los, his;
      for (int rep = 0; rep < reps; ++rep) {
        const RepEstimate& c =
            records[static_cast<size_t>(rep)].cells[static_cast<size_t>(mi * n_labels + li)];
        if (!c.valid) continue;
        points.push_back(c.point);
        ses.push_back(c.se);
        los.push_back(c.lo);
        his.push_back(c.hi);
      }
      const int n_valid = static_cast<int>(points.size());
      if (n_valid * 2 < reps)
        throw std::runtime_error(
            "run_mccv: over half of repetitions failed for " +
            method_name(config.methods[static_cast<size_t>(mi)]) + "/" + label);
      MccvCell cell;
      cell.n_valid = n_valid;
      cell.n_total = reps;
      cell.point_median = median(points);
      cell.se_median = median(ses);
      cell.lo_median = median(los);
      cell.hi_median = median(his);
      if (config.link == Link::Logit) {
        cell.or_point = std::exp(cell.point_median);
        cell.or_lo = std::exp(cell.lo_median);
        cell.or_hi = std::exp(cell.hi_median);
      }
      result.cells.emplace_back(config.methods[static_cast<size_t>(mi)], label, cell);
    }
  }
  for (int li = 0; li < n_labels; ++li) {
    const std::string& label = config.rule.labels[static_cast<size_t>(li)];
    std::vector<double> sizes;
    for (const RepRecord& rec : records)
      if (rec.sizes_valid) sizes.push_back(static_cast<double>(rec.sizes[static_cast<size_t>(li)]));
    MccvLabelStats stats = confidence[static_cast<size_t>(li)];
    if (!sizes.empty()) {
      stats.size_median = median(sizes);
      stats.size_sd = sample_sd(sizes);
    }
    result.label_stats[label] = stats;
  }
  return result;
}

std::string mccv_effects_csv(const MccvResult& result) {
  std::ostringstream out;
  const bool logit = result.link == Link::Logit;
  out << "method,label,estimate,se,ci_low,ci_high";
  if (logit) out << ",or,or_low,or_high";
  out << ",n_valid,n_total\n";
  for (const auto& [method, label, cell] : result.cells) {
    out << method_name(method) << ',' << label << ',' << format_double(cell.point_median)
        << ',' << format_double(cell.se_median) << ',' << format_double(cell.lo_median) << ','
        << format_double(cell.hi_median);
    if (logit)
      out << ',' << format_double(cell.or_point) << ',' << format_double(cell.or_lo) << ','
          << format_double(cell.or_hi);
    out << ',' << cell.n_valid << ',' << cell.n_total << '\n';
  }
  return out.str();
}

std::string mccv_subgroups_csv(const MccvResult& result) {
  std::ostringstream out;
  out << "label,size_median,size_sd,mean_confidence,n_classified\n";
  for (const auto& [label, stats] : result.label_stats)
    out << label << ',' << format_double(stats.size_median) << ','
        << format_double(stats.size_sd) << ',' << format_double(stats.mean_confidence) << ','
        << stats.n_classified << '\n';
  return out.str();
}

}  // namespace twostage
