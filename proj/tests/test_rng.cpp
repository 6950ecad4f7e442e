#include <algorithm>
#include <atomic>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "twostage/parallel.hpp"
#include "twostage/rng.hpp"

using namespace twostage;

TEST_CASE("seed derivation is stable and decorrelated") {
  const uint64_t a = derive_seed(1, "bart", 0);
  CHECK(a == derive_seed(1, "bart", 0));
  CHECK(a != derive_seed(1, "bart", 1));
  CHECK(a != derive_seed(1, "split", 0));
  CHECK(a != derive_seed(2, "bart", 0));

  std::set<uint64_t> seen;
  for (uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, "rep", i));
  CHECK(seen.size() == 1000);
}

TEST_CASE("uniform01 stays inside the open interval") {
  Rng rng(123);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
}

TEST_CASE("uniform_int is unbiased over a small range") {
  Rng rng(7);
  std::vector<int> counts(5, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[rng.uniform_int(5)]++;
  for (int c : counts) CHECK(std::abs(c / static_cast<double>(n) - 0.2) < 0.01);
}

TEST_CASE("normal moments") {
  Rng rng(99);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("gamma and chi-squared moments") {
  Rng rng(17);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gamma(2.5);
    s += g;
    s2 += g * g;
  }
  const double mean = s / n;
  CHECK(std::abs(mean - 2.5) < 0.02);             // E = shape
  CHECK(std::abs(s2 / n - mean * mean - 2.5) < 0.06);  // Var = shape

  double c = 0.0;
  for (int i = 0; i < n; ++i) c += rng.chi_squared(3.0);
  CHECK(std::abs(c / n - 3.0) < 0.03);

  double sub = 0.0;  // shape < 1 branch
  for (int i = 0; i < n; ++i) sub += rng.gamma(0.4);
  CHECK(std::abs(sub / n - 0.4) < 0.01);
}

TEST_CASE("truncated normal respects its bound and matches tail moments") {
  Rng rng(31);
  const double lo = 2.0;
  double s = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.trunc_std_normal_lower(lo);
    REQUIRE(z >= lo);
    s += z;
  }
  // E[Z | Z > a] = phi(a) / (1 - Phi(a))
  const double phi = std::exp(-0.5 * lo * lo) / std::sqrt(2.0 * M_PI);
  const double expect = phi / (1.0 - norm_cdf(lo));
  CHECK(std::abs(s / n - expect) < 0.01);

  for (int i = 0; i < 1000; ++i) CHECK(rng.trunc_normal_upper(1.0, 2.0, 0.5) <= 0.5);
  for (int i = 0; i < 1000; ++i) CHECK(rng.trunc_normal_lower(-1.0, 0.5, -0.6) >= -0.6);
}

TEST_CASE("identical seeds replay identical streams") {
  Rng a(2024), b(2024);
  for (int i = 0; i < 1000; ++i) CHECK(a.raw() == b.raw());
}

TEST_CASE("expit and logit are inverses") {
  for (double x : {-5.0, -1.0, 0.0, 0.3, 4.0}) CHECK(logit(expit(x)) == doctest::Approx(x));
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5));
  CHECK(norm_cdf(1.959963984540054) == doctest::Approx(0.975));
}

TEST_CASE("parallel_for covers every index once for any worker count") {
  for (int threads : {1, 2, 5}) {
    std::vector<std::atomic<int>> hits(257);
    for (auto& h : hits) h = 0;
    parallel_for(257, threads, [&](int i) { hits[static_cast<size_t>(i)]++; });
    for (const auto& h : hits) CHECK(h == 1);
  }
}

TEST_CASE("parallel_for propagates worker exceptions") {
  CHECK_THROWS_AS(parallel_for(8, 3,
                               [](int i) {
                                 if (i == 5) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
