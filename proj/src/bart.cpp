#include "twostage/bart.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace twostage {

namespace {

constexpr double kProbClamp = 1e-12;

struct Node {
  int feature = -1;
  double cut = 0.0;
  int left = -1;
  int right = -1;
  int parent = -1;
  int depth = 0;
  double mu = 0.0;
  bool alive = true;
  bool leaf = true;
};

struct Tree {
  std::vector<Node> nodes;
  std::vector<int> free_list;

  Tree() { nodes.push_back(Node{}); }

  int alloc() {
    if (!free_list.empty()) {
      const int ix = free_list.back();
      free_list.pop_back();
      nodes[static_cast<size_t>(ix)] = Node{};
      return ix;
    }
    nodes.push_back(Node{});
    return static_cast<int>(nodes.size()) - 1;
  }

  void release(int ix) {
    nodes[static_cast<size_t>(ix)].alive = false;
    free_list.push_back(ix);
  }

  bool root_only() const { return nodes[0].leaf; }

  void collect(std::vector<int>& leaves, std::vector<int>& nogs) const {
    leaves.clear();
    nogs.clear();
    for (size_t i = 0; i < nodes.size(); ++i) {
      const Node& nd = nodes[i];
      if (!nd.alive) continue;
      if (nd.leaf) {
        leaves.push_back(static_cast<int>(i));
      } else if (nodes[static_cast<size_t>(nd.left)].leaf &&
                 nodes[static_cast<size_t>(nd.right)].leaf) {
        nogs.push_back(static_cast<int>(i));
      }
    }
  }

  int traverse(const double* x) const {
    int ix = 0;
    while (!nodes[static_cast<size_t>(ix)].leaf) {
      const Node& nd = nodes[static_cast<size_t>(ix)];
      ix = x[nd.feature] <= nd.cut ? nd.left : nd.right;
    }
    return ix;
  }
};

double quantile_type7(const std::vector<double>& sorted, double prob) {
  const double h = prob * (static_cast<double>(sorted.size()) - 1.0);
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

std::vector<std::vector<double>> build_cutgrids(const Mat& x, int ncut) {
  std::vector<std::vector<double>> grids(static_cast<size_t>(x.p));
  for (int j = 0; j < x.p; ++j) {
    std::vector<double> vals = x.col(j);
    std::sort(vals.begin(), vals.end());
    std::vector<double> distinct;
    for (double v : vals)
      if (distinct.empty() || v != distinct.back()) distinct.push_back(v);
    std::vector<double>& grid = grids[static_cast<size_t>(j)];
    if (distinct.size() < 2) continue;  // constant feature, not splittable
    if (static_cast<int>(distinct.size()) - 1 <= ncut) {
      for (size_t i = 0; i + 1 < distinct.size(); ++i)
        grid.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    } else {
      for (int t = 1; t <= ncut; ++t) {
        const double c = quantile_type7(vals, static_cast<double>(t) / (ncut + 1));
        if (grid.empty() || c != grid.back()) grid.push_back(c);
      }
    }
  }
  return grids;
}

// Marginal likelihood of one leaf's residuals with the mean integrated out.
double leaf_lil(double n, double sy, double sy2, double sigma, double tau) {
  const double yb = sy / n;
  const double s_centered = sy2 - n * yb * yb;
  const double sig2 = sigma * sigma;
  const double d = n * tau * tau + sig2;
  return -0.5 * n * std::log(2.0 * M_PI) - (n - 1.0) * std::log(sigma) - 0.5 * std::log(d) -
         s_centered / (2.0 * sig2) - n * yb * yb / (2.0 * d);
}

class Sampler {
 public:
  Sampler(const Mat& x, std::vector<double> target, Outcome outcome, const BartHyper& hyper,
          double tau, double sigma_init, double lambda, uint64_t seed,
          const std::vector<double>* y01, double offset)
      : x_(x),
        yt_(std::move(target)),
        outcome_(outcome),
        hyper_(hyper),
        tau_(tau),
        sigma_(sigma_init),
        lambda_(lambda),
        rng_(seed),
        y01_(y01),
        offset_(offset) {
    trees_.assign(static_cast<size_t>(hyper_.m), Tree{});
    allfit_.assign(static_cast<size_t>(x_.n), 0.0);
    grids_ = build_cutgrids(x_, hyper_.n_cutpoints);
    for (int j = 0; j < x_.p; ++j)
      if (!grids_[static_cast<size_t>(j)].empty()) usable_.push_back(j);
    if (usable_.empty()) throw std::runtime_error("no splittable features");
    leaf_of_.resize(static_cast<size_t>(x_.n));
    fit_old_.resize(static_cast<size_t>(x_.n));
    resid_.resize(static_cast<size_t>(x_.n));
  }

  void sweep() {
    if (outcome_ == Outcome::Continuous) {
      draw_sigma();
    } else {
      draw_latents();
    }
    for (int j = 0; j < hyper_.m; ++j) update_tree(trees_[static_cast<size_t>(j)]);
  }

  double sigma() const { return sigma_; }
  double accept_rate() const {
    return proposals_ == 0 ? 0.0 : static_cast<double>(accepts_) / proposals_;
  }

  BartEnsemble snapshot(std::vector<int>& split_count) const {
    BartEnsemble ens;
    ens.sigma = sigma_;
    ens.trees.reserve(static_cast<size_t>(hyper_.m));
    std::fill(split_count.begin(), split_count.end(), 0);
    for (const Tree& t : trees_) {
      CompactTree ct;
      compact(t, 0, ct, split_count);
      ens.trees.push_back(std::move(ct));
    }
    return ens;
  }

 private:
  static int compact(const Tree& t, int ix, CompactTree& out, std::vector<int>& split_count) {
    const Node& nd = t.nodes[static_cast<size_t>(ix)];
    const int my = static_cast<int>(out.nodes.size());
    out.nodes.emplace_back();
    if (nd.leaf) {
      out.nodes[static_cast<size_t>(my)].mu = nd.mu;
      return my;
    }
    split_count[static_cast<size_t>(nd.feature)] += 1;
    const int li = compact(t, nd.left, out, split_count);
    const int ri = compact(t, nd.right, out, split_count);
    CompactNode& cn = out.nodes[static_cast<size_t>(my)];
    cn.feature = nd.feature;
    cn.cut = nd.cut;
    cn.left = li;
    cn.right = ri;
    return my;
  }

  void draw_sigma() {
    double ss = 0.0;
    for (int i = 0; i < x_.n; ++i) {
      const double r = yt_[static_cast<size_t>(i)] - allfit_[static_cast<size_t>(i)];
      ss += r * r;
    }
    const double shape_draw = rng_.chi_squared(hyper_.nu + static_cast<double>(x_.n));
    sigma_ = std::sqrt((hyper_.nu * lambda_ + ss) / shape_draw);
  }

  void draw_latents() {
    for (int i = 0; i < x_.n; ++i) {
      const double mean = offset_ + allfit_[static_cast<size_t>(i)];
      const double z = ((*y01_)[static_cast<size_t>(i)] == 1.0)
                           ? rng_.trunc_normal_lower(mean, 1.0, 0.0)
                           : rng_.trunc_normal_upper(mean, 1.0, 0.0);
      yt_[static_cast<size_t>(i)] = z - offset_;
    }
  }

  struct LeafStats {
    double n = 0.0, sy = 0.0, sy2 = 0.0;
  };

  void update_tree(Tree& t) {
    const int n = x_.n;
    for (int i = 0; i < n; ++i) {
      const int leaf = t.traverse(x_.row(i));
      leaf_of_[static_cast<size_t>(i)] = leaf;
      const double f = t.nodes[static_cast<size_t>(leaf)].mu;
      fit_old_[static_cast<size_t>(i)] = f;
      resid_[static_cast<size_t>(i)] =
          yt_[static_cast<size_t>(i)] - allfit_[static_cast<size_t>(i)] + f;
    }

    t.collect(leaves_, nogs_);
    const bool grow = t.root_only() || rng_.bernoulli(0.5);
    ++proposals_;
    if (grow)
      propose_grow(t);
    else
      propose_prune(t);

    draw_leaf_values(t);
  }

  void propose_grow(Tree& t) {
    const int n_leaves = static_cast<int>(leaves_.size());
    const int leaf = leaves_[rng_.uniform_int(static_cast<uint64_t>(n_leaves))];
    const int feat = usable_[rng_.uniform_int(usable_.size())];
    const std::vector<double>& grid = grids_[static_cast<size_t>(feat)];
    const double cut = grid[rng_.uniform_int(grid.size())];

    LeafStats left, right;
    for (int i = 0; i < x_.n; ++i) {
      if (leaf_of_[static_cast<size_t>(i)] != leaf) continue;
      LeafStats& s = x_(i, feat) <= cut ? left : right;
      s.n += 1.0;
      s.sy += resid_[static_cast<size_t>(i)];
      s.sy2 += resid_[static_cast<size_t>(i)] * resid_[static_cast<size_t>(i)];
    }
    if (left.n < 1.0 || right.n < 1.0) return;  // empty child: reject outright

    const Node& nx = t.nodes[static_cast<size_t>(leaf)];
    const double d = static_cast<double>(nx.depth);
    const double pg_node = hyper_.alpha * std::pow(1.0 + d, -hyper_.beta);
    const double pg_child = hyper_.alpha * std::pow(2.0 + d, -hyper_.beta);
    const double pb_x = t.root_only() ? 1.0 : 0.5;
    const double pd_y = 0.5;
    int nog_y = static_cast<int>(nogs_.size()) + 1;
    if (nx.parent >= 0 &&
        std::find(nogs_.begin(), nogs_.end(), nx.parent) != nogs_.end())
      nog_y -= 1;

    const double prior_move = pg_node * (1.0 - pg_child) * (1.0 - pg_child) * pd_y *
                              (1.0 / nog_y) /
                              ((1.0 - pg_node) * pb_x * (1.0 / n_leaves));
    const double lil_left = leaf_lil(left.n, left.sy, left.sy2, sigma_, tau_);
    const double lil_right = leaf_lil(right.n, right.sy, right.sy2, sigma_, tau_);
    const double lil_both =
        leaf_lil(left.n + right.n, left.sy + right.sy, left.sy2 + right.sy2, sigma_, tau_);
    const double ratio = prior_move * std::exp(lil_left + lil_right - lil_both);

    if (rng_.uniform01() >= ratio) return;
    ++accepts_;

    const int li = t.alloc();
    const int ri = t.alloc();
    Node& parent = t.nodes[static_cast<size_t>(leaf)];
    parent.leaf = false;
    parent.feature = feat;
    parent.cut = cut;
    parent.left = li;
    parent.right = ri;
    Node& ln = t.nodes[static_cast<size_t>(li)];
    Node& rn = t.nodes[static_cast<size_t>(ri)];
    ln.parent = rn.parent = leaf;
    ln.depth = rn.depth = parent.depth + 1;
    for (int i = 0; i < x_.n; ++i)
      if (leaf_of_[static_cast<size_t>(i)] == leaf)
        leaf_of_[static_cast<size_t>(i)] = x_(i, feat) <= cut ? li : ri;
  }

  void propose_prune(Tree& t) {
    if (nogs_.empty()) return;
    const int nog = nogs_[rng_.uniform_int(nogs_.size())];
    const Node& nn = t.nodes[static_cast<size_t>(nog)];
    const int li = nn.left;
    const int ri = nn.right;

    LeafStats left, right;
    for (int i = 0; i < x_.n; ++i) {
      const int l = leaf_of_[static_cast<size_t>(i)];
      if (l != li && l != ri) continue;
      LeafStats& s = l == li ? left : right;
      s.n += 1.0;
      s.sy += resid_[static_cast<size_t>(i)];
      s.sy2 += resid_[static_cast<size_t>(i)] * resid_[static_cast<size_t>(i)];
    }

    const double d = static_cast<double>(nn.depth);
    const double pg_node = hyper_.alpha * std::pow(1.0 + d, -hyper_.beta);
    const double pg_child = hyper_.alpha * std::pow(2.0 + d, -hyper_.beta);
    const double pd_x = 0.5;
    const double pb_y = nog == 0 ? 1.0 : 0.5;
    const int n_leaves = static_cast<int>(leaves_.size());

    const double prior_move =
        (1.0 - pg_node) * pb_y * (1.0 / (n_leaves - 1)) /
        (pg_node * (1.0 - pg_child) * (1.0 - pg_child) * pd_x * (1.0 / nogs_.size()));
    const double lil_left = leaf_lil(left.n, left.sy, left.sy2, sigma_, tau_);
    const double lil_right = leaf_lil(right.n, right.sy, right.sy2, sigma_, tau_);
    const double lil_both =
        leaf_lil(left.n + right.n, left.sy + right.sy, left.sy2 + right.sy2, sigma_, tau_);
    const double ratio = prior_move * std::exp(lil_both - lil_left - lil_right);

    if (rng_.uniform01() >= ratio) return;
    ++accepts_;

    Node& parent = t.nodes[static_cast<size_t>(nog)];
    parent.leaf = true;
    parent.feature = -1;
    parent.left = parent.right = -1;
    t.release(li);
    t.release(ri);
    for (int i = 0; i < x_.n; ++i) {
      const int l = leaf_of_[static_cast<size_t>(i)];
      if (l == li || l == ri) leaf_of_[static_cast<size_t>(i)] = nog;
    }
  }

  void draw_leaf_values(Tree& t) {
    stats_.assign(t.nodes.size(), LeafStats{});
    for (int i = 0; i < x_.n; ++i) {
      LeafStats& s = stats_[static_cast<size_t>(leaf_of_[static_cast<size_t>(i)])];
      s.n += 1.0;
      s.sy += resid_[static_cast<size_t>(i)];
    }
    const double sig2 = sigma_ * sigma_;
    const double tau2 = tau_ * tau_;
    for (size_t ix = 0; ix < t.nodes.size(); ++ix) {
      Node& nd = t.nodes[ix];
      if (!nd.alive || !nd.leaf) continue;
      const LeafStats& s = stats_[ix];
      const double v = 1.0 / (1.0 / tau2 + s.n / sig2);
      const double mean = v * s.sy / sig2;
      nd.mu = rng_.normal(mean, std::sqrt(v));
    }
    for (int i = 0; i < x_.n; ++i) {
      const double mu = t.nodes[static_cast<size_t>(leaf_of_[static_cast<size_t>(i)])].mu;
      allfit_[static_cast<size_t>(i)] += mu - fit_old_[static_cast<size_t>(i)];
    }
  }

  const Mat& x_;
  std::vector<double> yt_;
  Outcome outcome_;
  BartHyper hyper_;
  double tau_;
  double sigma_;
  double lambda_;
  Rng rng_;
  const std::vector<double>* y01_;
  double offset_;
  std::vector<Tree> trees_;
  std::vector<double> allfit_;
  std::vector<std::vector<double>> grids_;
  std::vector<int> usable_;
  std::vector<int> leaf_of_;
  std::vector<double> fit_old_;
  std::vector<double> resid_;
  std::vector<int> leaves_, nogs_;
  std::vector<LeafStats> stats_;
  long proposals_ = 0;
  long accepts_ = 0;
};

double ols_residual_sd(const Mat& x, const std::vector<double>& y) {
  const int n = x.n;
  const int p = x.p + 1;
  if (n <= p + 1) {
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / (n - 1));
  }
  Eigen::MatrixXd design(n, p);
  for (int i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (int j = 0; j < x.p; ++j) design(i, j + 1) = x(i, j);
  }
  Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::VectorXd beta = qr.solve(yv);
  const double rss = (yv - design * beta).squaredNorm();
  const int dof = n - static_cast<int>(qr.rank());
  if (dof <= 0) return 1e-6;
  return std::sqrt(rss / dof);
}

}  // namespace

int sample_prior_tree_leaves(double alpha, double beta, Rng& rng, int max_depth) {
  int leaves = 0;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int d = stack.back();
    stack.pop_back();
    const double p_split = alpha * std::pow(1.0 + static_cast<double>(d), -beta);
    if (d < max_depth && rng.bernoulli(p_split)) {
      stack.push_back(d + 1);
      stack.push_back(d + 1);
    } else {
      ++leaves;
    }
  }
  return leaves;
}

BartChain fit_bart(const Mat& x, const std::vector<double>& y, Outcome outcome,
                   const BartHyper& hyper, uint64_t seed) {
  const int n = x.n;
  if (n < 20) throw std::invalid_argument("fit_bart needs n >= 20");
  if (static_cast<int>(y.size()) != n) throw std::invalid_argument("y length mismatch");
  if (hyper.m < 1 || hyper.alpha <= 0.0 || hyper.alpha >= 1.0 || hyper.beta < 0.0 ||
      hyper.k <= 0.0 || hyper.nu <= 0.0 || hyper.q <= 0.0 || hyper.q >= 1.0)
    throw std::invalid_argument("invalid hyperparameters");
  for (double v : x.v)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite covariate");
  for (double yi : y)
    if (!std::isfinite(yi)) throw std::invalid_argument("non-finite response");

  const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  if (*ymin_it == *ymax_it) throw std::invalid_argument("degenerate response");

  BartChain chain;
  chain.outcome = outcome;
  chain.hyper = hyper;
  chain.train_x = x;
  chain.train_y = y;
  chain.nu = hyper.nu;
  chain.split_counts = Mat(hyper.n_keep, x.p);

  const double root_m = std::sqrt(static_cast<double>(hyper.m));
  std::vector<double> target;
  double tau, sigma_init, lambda = 0.0, offset = 0.0;
  const std::vector<double>* y01 = nullptr;

  if (outcome == Outcome::Continuous) {
    chain.y_center = 0.5 * (*ymin_it + *ymax_it);
    chain.y_scale = *ymax_it - *ymin_it;
    target.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      target[static_cast<size_t>(i)] =
          (y[static_cast<size_t>(i)] - chain.y_center) / chain.y_scale;
    tau = 0.5 / (hyper.k * root_m);
    const double sd_hat = ols_residual_sd(x, target);
    chain.sigma_hat_ols = sd_hat;
    const boost::math::chi_squared chi(hyper.nu);
    lambda = sd_hat * sd_hat * boost::math::quantile(chi, 1.0 - hyper.q) / hyper.nu;
    chain.lambda = lambda;
    sigma_init = sd_hat;
  } else {
    for (double yi : y)
      if (yi != 0.0 && yi != 1.0) throw std::invalid_argument("binary response must be 0/1");
    chain.y_center = 0.0;
    chain.y_scale = 1.0;
    double ybar = 0.0;
    for (double yi : y) ybar += yi;
    ybar /= n;
    ybar = std::min(1.0 - 1e-6, std::max(1e-6, ybar));
    const boost::math::normal gauss;
    offset = boost::math::quantile(gauss, ybar);
    chain.offset = offset;
    tau = 3.0 / (hyper.k * root_m);
    sigma_init = 1.0;
    target.assign(static_cast<size_t>(n), 0.0);
    y01 = &chain.train_y;
  }
  chain.sigma_mu = tau;

  Sampler sampler(chain.train_x, std::move(target), outcome, hyper, tau, sigma_init, lambda,
                  seed, y01, offset);

  for (int it = 0; it < hyper.n_burn; ++it) sampler.sweep();
  std::vector<int> split_count(static_cast<size_t>(x.p));
  for (int it = 0; it < hyper.n_keep; ++it) {
    sampler.sweep();
    chain.kept.push_back(sampler.snapshot(split_count));
    for (int j = 0; j < x.p; ++j)
      chain.split_counts(it, j) = static_cast<double>(split_count[static_cast<size_t>(j)]);
    if (outcome == Outcome::Continuous)
      chain.sigma_draws.push_back(sampler.sigma() * chain.y_scale);
  }
  chain.accept_rate = sampler.accept_rate();
  return chain;
}

ScoreDrawMatrix predict_posterior(const BartChain& chain, const Mat& xnew) {
  if (xnew.p != chain.p()) throw std::invalid_argument("column count mismatch");
  const int k = static_cast<int>(chain.kept.size());
  ScoreDrawMatrix out(k, xnew.n, chain.outcome == Outcome::Binary ? ScoreScale::Probability
                                                                  : ScoreScale::Outcome);
  for (int d = 0; d < k; ++d) {
    const BartEnsemble& ens = chain.kept[static_cast<size_t>(d)];
    for (int i = 0; i < xnew.n; ++i) {
      double s = 0.0;
      for (const CompactTree& t : ens.trees) s += t.value(xnew.row(i));
      if (chain.outcome == Outcome::Continuous) {
        out.at(d, i) = s * chain.y_scale + chain.y_center;
      } else {
        const double p = norm_cdf(chain.offset + s);
        out.at(d, i) = std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
      }
    }
  }
  return out;
}

VipSummary vip(const BartChain& chain) {
  const int k = static_cast<int>(chain.kept.size());
  if (k < 1) throw std::invalid_argument("vip needs at least one kept draw");
  const int p = chain.p();
  Mat props(k, p);
  for (int d = 0; d < k; ++d) {
    double total = 0.0;
    for (int j = 0; j < p; ++j) total += chain.split_counts(d, j);
    for (int j = 0; j < p; ++j)
      props(d, j) = total == 0.0 ? 1.0 / p : chain.split_counts(d, j) / total;
  }
  VipSummary out;
  out.mean.resize(static_cast<size_t>(p));
  out.lo.resize(static_cast<size_t>(p));
  out.hi.resize(static_cast<size_t>(p));
  for (int j = 0; j < p; ++j) {
    std::vector<double> col = props.col(j);
    double mean = 0.0;
    for (double v : col) mean += v;
    out.mean[static_cast<size_t>(j)] = mean / k;
    std::sort(col.begin(), col.end());
    out.lo[static_cast<size_t>(j)] = quantile_type7(col, 0.025);
    out.hi[static_cast<size_t>(j)] = quantile_type7(col, 0.975);
  }
  return out;
}

double posterior_predictive_pvalue(const BartChain& chain, const std::vector<double>& y,
                                   int n_rep, uint64_t seed) {
  if (chain.outcome != Outcome::Binary)
    throw std::invalid_argument("posterior predictive check needs a binary chain");
  if (n_rep < 1) throw std::invalid_argument("n_rep must be >= 1");
  const int n = static_cast<int>(y.size());
  if (n != chain.train_x.n) throw std::invalid_argument("y length mismatch");

  const ScoreDrawMatrix probs = predict_posterior(chain, chain.train_x);
  double observed = 0.0;
  for (double yi : y) observed += yi;
  observed /= n;

  Rng rng(seed);
  int at_least = 0;
  for (int r = 0; r < n_rep; ++r) {
    const int d = r % probs.k;
    double rate = 0.0;
    for (int i = 0; i < n; ++i) rate += rng.bernoulli(probs.at(d, i)) ? 1.0 : 0.0;
    rate /= n;
    if (rate >= observed) ++at_least;
  }
  return static_cast<double>(at_least) / n_rep;
}

}  // namespace twostage
