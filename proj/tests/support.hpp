#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bbmx/rng.hpp"

namespace testing_support {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double se = 0.0;
};

inline Moments moments(const std::vector<double>& x) {
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= static_cast<double>(x.size() - 1);
  m.se = std::sqrt(m.var / static_cast<double>(x.size()));
  return m;
}

inline std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

// Two-sample KS critical value at level alpha for sizes n and m.
inline double ks_critical(double alpha, std::size_t n, std::size_t m) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) / static_cast<double>(n * m));
}

// Hand-rolled property runner: calls check(rng, case_index) `cases` times,
// each with its own stream so a failing case can be replayed by index.
template <class Check>
void for_all(std::size_t cases, std::uint64_t seed, Check&& check) {
  for (std::size_t i = 0; i < cases; ++i) {
    bbmx::Rng rng(bbmx::StreamKey{seed, i});
    check(rng, i);
  }
}

}  // namespace testing_support
