#pragma once

#include <stdexcept>
#include <vector>

namespace twostage {

enum class ScoreScale { Probability, Outcome };

// K x n matrix of posterior prognostic-score draws, row k = one retained draw.
struct ScoreDrawMatrix {
  int k = 0;
  int n = 0;
  std::vector<double> s;  // row-major, s[draw * n + subject]
  ScoreScale scale = ScoreScale::Outcome;

  ScoreDrawMatrix() = default;
  ScoreDrawMatrix(int k_, int n_, ScoreScale sc)
      : k(k_), n(n_), s(static_cast<size_t>(k_) * n_, 0.0), scale(sc) {}

  double& at(int draw, int i) { return s[static_cast<size_t>(draw) * n + i]; }
  double at(int draw, int i) const { return s[static_cast<size_t>(draw) * n + i]; }

  const double* row(int draw) const { return s.data() + static_cast<size_t>(draw) * n; }

  std::vector<double> draw_row(int draw) const {
    return std::vector<double>(row(draw), row(draw) + n);
  }

  std::vector<double> posterior_mean() const {
    if (k == 0) throw std::logic_error("empty score matrix");
    std::vector<double> m(static_cast<size_t>(n), 0.0);
    for (int d = 0; d < k; ++d) {
      const double* r = row(d);
      for (int i = 0; i < n; ++i) m[static_cast<size_t>(i)] += r[i];
    }
    for (double& mi : m) mi /= static_cast<double>(k);
    return m;
  }
};

}  // namespace twostage
