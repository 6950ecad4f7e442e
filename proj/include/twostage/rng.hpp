#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace twostage {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t hash_tag(std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Decorrelated child seed for a named stream; avoids reuse of the base engine
// across parallel work items.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index = 0) {
  return splitmix64(base ^ splitmix64(hash_tag(tag) + 0x632be59bd9b4e019ULL * (index + 1)));
}

// All distributions are implemented on top of raw 64-bit draws so that output
// is identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t raw() { return eng_(); }

  // Uniform on the open interval (0,1).
  double uniform01() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n).
  uint64_t uniform_int(uint64_t n) {
    if (n == 0) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t r = eng_();
    while (r >= limit) r = eng_();
    return r % n;
  }

  bool bernoulli(double prob) { return uniform01() < prob; }

  // Box-Muller without caching: two uniforms per variate, fully reproducible.
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential() { return -std::log(uniform01()); }

  // Marsaglia-Tsang; shape > 0, unit scale.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform01();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chi_squared(double df) { return 2.0 * gamma(0.5 * df); }

  // Standard normal truncated to [lo, +inf); Robert (1995) exponential
  // rejection for far-right tails.
  double trunc_std_normal_lower(double lo) {
    if (lo <= 0.0) {
      for (;;) {
        const double z = normal();
        if (z >= lo) return z;
      }
    }
    const double a = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
    for (;;) {
      const double z = lo + exponential() / a;
      const double rho = std::exp(-0.5 * (z - a) * (z - a));
      if (uniform01() < rho) return z;
    }
  }

  double trunc_normal_lower(double mean, double sd, double lo) {
    return mean + sd * trunc_std_normal_lower((lo - mean) / sd);
  }

  double trunc_normal_upper(double mean, double sd, double hi) {
    return -trunc_normal_lower(-mean, sd, -hi);
  }

 private:
  std::mt19937_64 eng_;
};

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

}  // namespace twostage
