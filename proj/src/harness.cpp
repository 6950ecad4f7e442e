#include "twostage/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "twostage/parallel.hpp"
#include "twostage/rng.hpp"

namespace twostage {

std::string method_name(Method m) {
  switch (m) {
    case Method::NaiveGBM:
      return "naive_gbm";
    case Method::NaiveBART:
      return "naive_bart";
    case Method::CorrectedBART:
      return "corrected_bart";
  }
  return "unknown";
}

Method method_from_name(const std::string& name) {
  if (name == "naive_gbm") return Method::NaiveGBM;
  if (name == "naive_bart") return Method::NaiveBART;
  if (name == "corrected_bart") return Method::CorrectedBART;
  throw std::invalid_argument("unknown method '" + name + "'");
}

double mcse_coverage(double p_hat, long r) {
  if (p_hat < 0.0 || p_hat > 1.0) throw std::invalid_argument("coverage outside [0,1]");
  if (r < 1) throw std::invalid_argument("needs r >= 1");
  return std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(r));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

struct RepCell {
  bool valid = false;
  double delta = 0.0;
  double se = 0.0;
  std::string error;
};

struct RepOutcome {
  // methods x labels, method-major
  std::vector<RepCell> cells;
};

Link link_for(Outcome outcome) {
  return outcome == Outcome::Binary ? Link::Logit : Link::Identity;
}

}  // namespace

SimResult run_simulation(const SimConfig& config) {
  if (config.replications < 2) throw std::invalid_argument("need at least 2 replications");
  if (config.n_total < 100) throw std::invalid_argument("need n_total >= 100");
  if (config.methods.empty()) throw std::invalid_argument("no methods requested");
  config.rule.validate();

  const int n_methods = static_cast<int>(config.methods.size());
  const int n_labels = config.rule.n_groups();
  const int r_total = config.replications;
  const Link link = link_for(config.scenario.outcome);

  SimResult result;
  result.oracle = oracle_estimand(config.scenario, config.rule, config.oracle_n_mc,
                                  derive_seed(config.seed, "oracle"));

  const bool needs_bart =
      std::any_of(config.methods.begin(), config.methods.end(), [](Method m) {
        return m == Method::NaiveBART || m == Method::CorrectedBART;
      });

  std::vector<RepOutcome> reps(static_cast<size_t>(r_total));
  for (auto& rep : reps) rep.cells.resize(static_cast<size_t>(n_methods * n_labels));

  parallel_for(r_total, config.threads, [&](int r) {
    RepOutcome& rep = reps[static_cast<size_t>(r)];
    const TrialDataset data =
        gen_trial(config.scenario, config.n_total, config.seed + static_cast<uint64_t>(r));
    const SplitResult split = split_design_eval(
        data, SplitSpec{config.design_fraction,
                        derive_seed(config.seed, "split", static_cast<uint64_t>(r))});
    const TrialDataset design = data.rows(split.design_idx);
    const TrialDataset eval = data.rows(split.eval_idx);

    ScoreDrawMatrix draws;
    std::vector<double> bart_point;
    if (needs_bart) {
      const BartChain chain =
          fit_bart(design.x, design.y, config.scenario.outcome, config.bart,
                   derive_seed(config.seed, "bart", static_cast<uint64_t>(r)));
      draws = predict_posterior(chain, eval.x);
      bart_point = draws.posterior_mean();
    }

    for (int mi = 0; mi < n_methods; ++mi) {
      const Method method = config.methods[static_cast<size_t>(mi)];
      auto cell = [&](int li) -> RepCell& {
        return rep.cells[static_cast<size_t>(mi * n_labels + li)];
      };
      try {
        if (method == Method::CorrectedBART) {
          const CorrectedEffects eff = corrected_estimate(draws, config.rule, eval, link);
          for (int li = 0; li < n_labels; ++li) {
            const std::string& label = config.rule.labels[static_cast<size_t>(li)];
            const auto it = eff.by_label.find(label);
            if (it == eff.by_label.end()) {
              cell(li).error = eff.failures.count(label) ? eff.failures.at(label) : "missing";
              continue;
            }
            cell(li).valid = true;
            cell(li).delta = it->second.delta_bar;
            cell(li).se = std::sqrt(it->second.total_var);
          }
        } else {
          std::vector<double> scores;
          if (method == Method::NaiveBART) {
            scores = bart_point;
          } else {
            GbmHyper hyper = config.gbm;
            hyper.loss = config.scenario.outcome == Outcome::Binary ? GbmLoss::Logistic
                                                                    : GbmLoss::SquaredError;
            if (config.gbm_tune)
              hyper = tune_cv(design.x, design.y, hyper.loss, 5,
                              derive_seed(config.seed, "gbmcv", static_cast<uint64_t>(r)));
            const GbmModel model =
                fit_gbm(design.x, design.y, hyper,
                        derive_seed(config.seed, "gbm", static_cast<uint64_t>(r)));
            scores = predict_gbm(model, eval.x);
          }
          const SubgroupEffects eff = naive_estimate(scores, config.rule, eval, link);
          for (int li = 0; li < n_labels; ++li) {
            const std::string& label = config.rule.labels[static_cast<size_t>(li)];
            const auto it = eff.by_label.find(label);
            if (it == eff.by_label.end()) {
              cell(li).error = eff.failures.count(label) ? eff.failures.at(label) : "missing";
              continue;
            }
            cell(li).valid = true;
            cell(li).delta = it->second.est.delta;
            cell(li).se = it->second.est.se;
          }
        }
      } catch (const std::exception& e) {
        for (int li = 0; li < n_labels; ++li)
          if (!cell(li).valid) cell(li).error = e.what();
      }
    }
  });

  for (int mi = 0; mi < n_methods; ++mi) {
    for (int li = 0; li < n_labels; ++li) {
      const std::string& label = config.rule.labels[static_cast<size_t>(li)];
      const double truth = result.oracle.per_label.at(label).delta;
      std::vector<double> deltas, ses;
      int covered = 0;
      for (int r = 0; r < r_total; ++r) {
        const RepCell& cell = reps[static_cast<size_t>(r)].cells[static_cast<size_t>(
            mi * n_labels + li)];
        if (!cell.valid) continue;
        deltas.push_back(cell.delta);
        ses.push_back(cell.se);
        if (cell.delta - kCiMultiplier * cell.se <= truth &&
            truth <= cell.delta + kCiMultiplier * cell.se)
          ++covered;
      }
      CellMetrics m;
      m.n_used = static_cast<int>(deltas.size());
      m.n_excluded = r_total - m.n_used;
      if (m.n_used > 0) {
        double mean_d = 0.0, mean_se = 0.0;
        for (size_t i = 0; i < deltas.size(); ++i) {
          mean_d += deltas[i];
          mean_se += ses[i];
        }
        mean_d /= m.n_used;
        mean_se /= m.n_used;
        double var = 0.0;
        for (double d : deltas) var += (d - mean_d) * (d - mean_d);
        var /= m.n_used;
        m.bias = mean_d - truth;
        m.var = var;
        m.mse = m.bias * m.bias + var;
        m.mean_se = mean_se;
        m.coverage = static_cast<double>(covered) / m.n_used;
        m.mcse_coverage = mcse_coverage(m.coverage, m.n_used);
        m.mcse_bias = m.n_used > 1
                          ? std::sqrt(var * m.n_used / (m.n_used - 1.0) / m.n_used)
                          : 0.0;
      }
      if (m.n_excluded > 0.2 * r_total) {
        result.flagged = true;
        result.notes.push_back(method_name(config.methods[static_cast<size_t>(mi)]) + "/" +
                               label + ": " + std::to_string(m.n_excluded) +
                               " replications excluded");
      }
      result.rows.push_back(
          SimRow{config.methods[static_cast<size_t>(mi)], label, m});
    }
  }
  return result;
}

std::string sim_metrics_csv(const SimResult& result) {
  std::ostringstream out;
  out << "method,label,bias,var,mse,mean_se,coverage,mcse_coverage,mcse_bias,n_used,"
         "n_excluded,oracle_delta,oracle_mc_se\n";
  for (const SimRow& row : result.rows) {
    const OracleLabel& truth = result.oracle.per_label.at(row.label);
    out << method_name(row.method) << ',' << row.label << ','
        << format_double(row.metrics.bias) << ',' << format_double(row.metrics.var) << ','
        << format_double(row.metrics.mse) << ',' << format_double(row.metrics.mean_se) << ','
        << format_double(row.metrics.coverage) << ','
        << format_double(row.metrics.mcse_coverage) << ','
        << format_double(row.metrics.mcse_bias) << ',' << row.metrics.n_used << ','
        << row.metrics.n_excluded << ',' << format_double(truth.delta) << ','
        << format_double(truth.mc_se) << '\n';
  }
  return out.str();
}

OverlapExport export_overlap_data(const std::vector<double>& scores,
                                  const std::vector<int>& t) {
  if (scores.size() != t.size()) throw std::invalid_argument("length mismatch");
  OverlapExport out;
  for (size_t i = 0; i < scores.size(); ++i)
    (t[i] == 1 ? out.treated_scores : out.control_scores).push_back(scores[i]);
  if (out.treated_scores.empty() || out.control_scores.empty())
    throw std::invalid_argument("both arms required");

  out.grid = scores;
  std::sort(out.grid.begin(), out.grid.end());
  out.grid.erase(std::unique(out.grid.begin(), out.grid.end()), out.grid.end());

  auto ecdf = [](const std::vector<double>& sample, const std::vector<double>& grid) {
    std::vector<double> sorted = sample;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> out_v(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) {
      const auto it = std::upper_bound(sorted.begin(), sorted.end(), grid[i]);
      out_v[i] = static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
    }
    return out_v;
  };
  out.ecdf_treated = ecdf(out.treated_scores, out.grid);
  out.ecdf_control = ecdf(out.control_scores, out.grid);
  return out;
}

double ks_statistic(const OverlapExport& overlap) {
  double ks = 0.0;
  for (size_t i = 0; i < overlap.grid.size(); ++i)
    ks = std::max(ks, std::abs(overlap.ecdf_treated[i] - overlap.ecdf_control[i]));
  return ks;
}

std::string overlap_samples_csv(const OverlapExport& overlap) {
  std::ostringstream out;
  out << "arm,score\n";
  for (double s : overlap.treated_scores) out << "1," << format_double(s) << '\n';
  for (double s : overlap.control_scores) out << "0," << format_double(s) << '\n';
  return out.str();
}

std::string overlap_ecdf_csv(const OverlapExport& overlap) {
  std::ostringstream out;
  out << "score,ecdf_treated,ecdf_control\n";
  for (size_t i = 0; i < overlap.grid.size(); ++i)
    out << format_double(overlap.grid[i]) << ',' << format_double(overlap.ecdf_treated[i])
        << ',' << format_double(overlap.ecdf_control[i]) << '\n';
  return out.str();
}

}  // namespace twostage
