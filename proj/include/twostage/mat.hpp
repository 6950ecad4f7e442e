#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace twostage {

// Dense row-major matrix of doubles.
struct Mat {
  int n = 0;
  int p = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int n_, int p_, double fill = 0.0) : n(n_), p(p_), v(static_cast<size_t>(n_) * p_, fill) {}

  double& operator()(int i, int j) { return v[static_cast<size_t>(i) * p + j]; }
  double operator()(int i, int j) const { return v[static_cast<size_t>(i) * p + j]; }

  double* row(int i) { return v.data() + static_cast<size_t>(i) * p; }
  const double* row(int i) const { return v.data() + static_cast<size_t>(i) * p; }

  std::vector<double> col(int j) const {
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = (*this)(i, j);
    return out;
  }

  Mat rows(const std::vector<int>& idx) const {
    Mat out(static_cast<int>(idx.size()), p);
    for (size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] < 0 || idx[r] >= n) throw std::out_of_range("Mat::rows index");
      const double* src = row(idx[r]);
      double* dst = out.row(static_cast<int>(r));
      for (int j = 0; j < p; ++j) dst[j] = src[j];
    }
    return out;
  }
};

template <typename T>
std::vector<T> subset(const std::vector<T>& x, const std::vector<int>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(x.at(static_cast<size_t>(i)));
  return out;
}

}  // namespace twostage
