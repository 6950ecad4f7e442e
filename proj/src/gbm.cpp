#include "twostage/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "twostage/rng.hpp"

namespace twostage {

namespace {

constexpr double kBaseProbClamp = 1e-6;

void validate_hyper(const GbmHyper& h) {
  if (h.eta <= 0.0 || h.eta > 1.0) throw std::invalid_argument("eta must be in (0,1]");
  if (h.max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
  if (h.colsample <= 0.0 || h.colsample > 1.0)
    throw std::invalid_argument("colsample must be in (0,1]");
  if (h.lambda < 0.0 || h.gamma < 0.0) throw std::invalid_argument("penalties must be >= 0");
  if (h.n_rounds < 0) throw std::invalid_argument("n_rounds must be >= 0");
}

double base_score_for(GbmLoss loss, const std::vector<double>& y) {
  double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  if (loss == GbmLoss::SquaredError) return mean;
  mean = std::min(1.0 - kBaseProbClamp, std::max(kBaseProbClamp, mean));
  return logit(mean);
}

struct BestSplit {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  bool found = false;
};

// Exact greedy search over the node's rows and the given feature subset.
BestSplit find_split(const Mat& x, const std::vector<int>& rows, const std::vector<int>& feats,
                     const std::vector<double>& grad, const std::vector<double>& hess,
                     double lambda, double gamma) {
  BestSplit best;
  double g_tot = 0.0, h_tot = 0.0;
  for (int i : rows) {
    g_tot += grad[static_cast<size_t>(i)];
    h_tot += hess[static_cast<size_t>(i)];
  }
  const double parent_term = g_tot * g_tot / (h_tot + lambda);

  std::vector<std::pair<double, int>> order(rows.size());
  for (int f : feats) {
    for (size_t r = 0; r < rows.size(); ++r) order[r] = {x(rows[r], f), rows[r]};
    std::sort(order.begin(), order.end());
    double gl = 0.0, hl = 0.0;
    for (size_t r = 0; r + 1 < order.size(); ++r) {
      gl += grad[static_cast<size_t>(order[r].second)];
      hl += hess[static_cast<size_t>(order[r].second)];
      if (order[r].first == order[r + 1].first) continue;  // no boundary between ties
      const double gr = g_tot - gl;
      const double hr = h_tot - hl;
      const double gain =
          0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent_term) - gamma;
      if (gain > best.gain || !best.found) {
        if (gain <= 0.0) continue;
        best.gain = gain;
        best.feature = f;
        best.threshold = 0.5 * (order[r].first + order[r + 1].first);
        best.found = true;
      }
    }
  }
  return best;
}

struct TreeBuilder {
  const Mat& x;
  const std::vector<double>& grad;
  const std::vector<double>& hess;
  const GbmHyper& hyper;
  const std::vector<int>& feats;
  GbmTree tree;

  int build(std::vector<int> rows, int depth) {
    const int ix = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double g = 0.0, h = 0.0;
    for (int i : rows) {
      g += grad[static_cast<size_t>(i)];
      h += hess[static_cast<size_t>(i)];
    }
    BestSplit split;
    if (depth < hyper.max_depth && rows.size() >= 2)
      split = find_split(x, rows, feats, grad, hess, hyper.lambda, hyper.gamma);
    if (!split.found) {
      tree.nodes[static_cast<size_t>(ix)].weight = -g / (h + hyper.lambda);
      return ix;
    }
    std::vector<int> left, right;
    for (int i : rows) (x(i, split.feature) <= split.threshold ? left : right).push_back(i);
    rows.clear();
    rows.shrink_to_fit();
    const int li = build(std::move(left), depth + 1);
    const int ri = build(std::move(right), depth + 1);
    GbmNode& nd = tree.nodes[static_cast<size_t>(ix)];
    nd.feature = split.feature;
    nd.threshold = split.threshold;
    nd.left = li;
    nd.right = ri;
    return ix;
  }
};

std::vector<int> sample_features(int p, double colsample, Rng& rng) {
  std::vector<int> feats(static_cast<size_t>(p));
  std::iota(feats.begin(), feats.end(), 0);
  const int keep = std::max(1, static_cast<int>(std::lround(colsample * p)));
  if (keep >= p) return feats;
  for (size_t i = feats.size() - 1; i > 0; --i) {
    const size_t j = rng.uniform_int(i + 1);
    std::swap(feats[i], feats[j]);
  }
  feats.resize(static_cast<size_t>(keep));
  std::sort(feats.begin(), feats.end());
  return feats;
}

void gradients(GbmLoss loss, const std::vector<double>& y, const std::vector<double>& margin,
               std::vector<double>& grad, std::vector<double>& hess) {
  const size_t n = y.size();
  for (size_t i = 0; i < n; ++i) {
    if (loss == GbmLoss::SquaredError) {
      grad[i] = margin[i] - y[i];
      hess[i] = 1.0;
    } else {
      const double p = expit(margin[i]);
      grad[i] = p - y[i];
      hess[i] = p * (1.0 - p);
    }
  }
}

double holdout_metric(GbmLoss loss, const std::vector<double>& y,
                      const std::vector<double>& margin) {
  const size_t n = y.size();
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (loss == GbmLoss::SquaredError) {
      const double e = margin[i] - y[i];
      acc += e * e;
    } else {
      const double p =
          std::min(1.0 - kBaseProbClamp, std::max(kBaseProbClamp, expit(margin[i])));
      acc += -(y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p));
    }
  }
  acc /= static_cast<double>(n);
  return loss == GbmLoss::SquaredError ? std::sqrt(acc) : 2.0 * acc;
}

// Boosts round by round; when xval is non-null, returns after early stopping
// with the best held-out metric and round count.
struct BoostRun {
  GbmModel model;
  double best_metric = std::numeric_limits<double>::infinity();
  int best_round = 0;
};

BoostRun boost(const Mat& x, const std::vector<double>& y, const GbmHyper& hyper, uint64_t seed,
               const Mat* xval, const std::vector<double>* yval, int max_rounds, int patience) {
  validate_hyper(hyper);
  const int n = x.n;
  if (n < 10) throw std::invalid_argument("fit_gbm needs n >= 10");
  if (static_cast<int>(y.size()) != n) throw std::invalid_argument("y length mismatch");
  if (hyper.loss == GbmLoss::Logistic)
    for (double yi : y)
      if (yi != 0.0 && yi != 1.0) throw std::invalid_argument("logistic loss needs y in {0,1}");

  BoostRun run;
  run.model.loss = hyper.loss;
  run.model.eta = hyper.eta;
  run.model.p = x.p;
  run.model.base_score = base_score_for(hyper.loss, y);

  Rng rng(seed);
  std::vector<double> margin(static_cast<size_t>(n), run.model.base_score);
  std::vector<double> grad(static_cast<size_t>(n)), hess(static_cast<size_t>(n));
  std::vector<double> val_margin;
  if (xval) val_margin.assign(static_cast<size_t>(xval->n), run.model.base_score);
  if (xval) {
    run.best_metric = holdout_metric(hyper.loss, *yval, val_margin);
    run.best_round = 0;
  }

  std::vector<int> all_rows(static_cast<size_t>(n));
  std::iota(all_rows.begin(), all_rows.end(), 0);

  int since_best = 0;
  for (int round = 0; round < max_rounds; ++round) {
    gradients(hyper.loss, y, margin, grad, hess);
    const std::vector<int> feats = sample_features(x.p, hyper.colsample, rng);
    TreeBuilder builder{x, grad, hess, hyper, feats, {}};
    builder.build(all_rows, 0);
    for (int i = 0; i < n; ++i)
      margin[static_cast<size_t>(i)] += hyper.eta * builder.tree.leaf_weight(x.row(i));
    run.model.trees.push_back(std::move(builder.tree));

    if (xval) {
      for (int i = 0; i < xval->n; ++i)
        val_margin[static_cast<size_t>(i)] +=
            hyper.eta * run.model.trees.back().leaf_weight(xval->row(i));
      const double m = holdout_metric(hyper.loss, *yval, val_margin);
      if (m < run.best_metric - 1e-12) {
        run.best_metric = m;
        run.best_round = round + 1;
        since_best = 0;
      } else if (++since_best >= patience) {
        break;
      }
    }
  }
  return run;
}

}  // namespace

GbmModel fit_gbm(const Mat& x, const std::vector<double>& y, const GbmHyper& hyper,
                 uint64_t seed) {
  return boost(x, y, hyper, seed, nullptr, nullptr, hyper.n_rounds, 0).model;
}

std::vector<double> predict_gbm_margin(const GbmModel& model, const Mat& xnew) {
  if (xnew.p != model.p) throw std::invalid_argument("column count mismatch");
  std::vector<double> out(static_cast<size_t>(xnew.n), model.base_score);
  for (const GbmTree& tree : model.trees)
    for (int i = 0; i < xnew.n; ++i)
      out[static_cast<size_t>(i)] += model.eta * tree.leaf_weight(xnew.row(i));
  return out;
}

std::vector<double> predict_gbm(const GbmModel& model, const Mat& xnew) {
  std::vector<double> out = predict_gbm_margin(model, xnew);
  if (model.loss == GbmLoss::Logistic)
    for (double& v : out) v = expit(v);
  return out;
}

GbmHyper tune_cv(const Mat& x, const std::vector<double>& y, GbmLoss loss, int folds,
                 uint64_t seed) {
  const int n = x.n;
  if (folds < 2) throw std::invalid_argument("tune_cv needs folds >= 2");
  if (n < folds) throw std::invalid_argument("tune_cv needs n >= folds");

  static const double kEtas[] = {0.02, 0.05, 0.1, 0.3};
  static const int kDepths[] = {3, 5, 7};
  static const double kColsamples[] = {0.8, 1.0};

  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng fold_rng(derive_seed(seed, "folds"));
  for (size_t i = perm.size() - 1; i > 0; --i) {
    const size_t j = fold_rng.uniform_int(i + 1);
    std::swap(perm[i], perm[j]);
  }

  struct Fold {
    std::vector<int> train, val;
    bool usable = true;
  };
  std::vector<Fold> fold_sets(static_cast<size_t>(folds));
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < folds; ++f)
      (i % folds == f ? fold_sets[static_cast<size_t>(f)].val
                      : fold_sets[static_cast<size_t>(f)].train)
          .push_back(perm[static_cast<size_t>(i)]);
  for (Fold& f : fold_sets) {
    if (f.train.empty() || f.val.empty()) {
      f.usable = false;
      continue;
    }
    if (loss == GbmLoss::Logistic) {
      double s = 0.0;
      for (int i : f.train) s += y[static_cast<size_t>(i)];
      if (s == 0.0 || s == static_cast<double>(f.train.size())) f.usable = false;
    }
  }

  GbmHyper best;
  best.loss = loss;
  double best_score = std::numeric_limits<double>::infinity();
  bool any = false;
  int cfg = 0;
  for (double eta : kEtas)
    for (int depth : kDepths)
      for (double colsample : kColsamples) {
        GbmHyper h;
        h.eta = eta;
        h.max_depth = depth;
        h.colsample = colsample;
        h.loss = loss;
        h.n_rounds = gbm_detail::kMaxRounds;
        double metric_sum = 0.0;
        double rounds_sum = 0.0;
        int used = 0;
        for (int f = 0; f < folds; ++f) {
          const Fold& fold = fold_sets[static_cast<size_t>(f)];
          if (!fold.usable) continue;
          const Mat xtr = x.rows(fold.train);
          const Mat xva = x.rows(fold.val);
          const std::vector<double> ytr = subset(y, fold.train);
          const std::vector<double> yva = subset(y, fold.val);
          const BoostRun run =
              boost(xtr, ytr, h, derive_seed(seed, "cvfold", static_cast<uint64_t>(f)), &xva,
                    &yva, gbm_detail::kMaxRounds, gbm_detail::kPatience);
          metric_sum += run.best_metric;
          rounds_sum += run.best_round;
          ++used;
        }
        if (used == 0) {
          ++cfg;
          continue;
        }
        const double score = metric_sum / used;
        if (!any || score < best_score) {
          any = true;
          best_score = score;
          best = h;
          best.n_rounds = std::max(1, static_cast<int>(std::lround(rounds_sum / used)));
        }
        ++cfg;
      }
  (void)cfg;
  if (!any) throw std::runtime_error("tune_cv: no usable folds");
  return best;
}

}  // namespace twostage
