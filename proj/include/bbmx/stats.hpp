#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bbmx/rng.hpp"

namespace bbmx {

class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<double> samples);

  const std::vector<double>& samples() const { return samples_; }
  std::size_t n() const { return samples_.size(); }
  // Fraction of samples <= x.
  double cdf(double x) const;
  // Lower empirical quantile: smallest sample with cdf >= p.
  double quantile(double p) const;

 private:
  std::vector<double> samples_;
};

struct ComparisonReport {
  std::string criterion;
  std::string statistic;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  double std_error = 0.0;
  std::string detail;
};

double ks_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b);

struct LaplaceEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

LaplaceEstimate empirical_laplace(std::span<const double> samples, double lambda);

// Least-squares slope of -log(empirical survival) against u, evaluated at
// n_points equally spaced levels in [u_lo, u_hi].
double tail_slope(std::span<const double> samples, double u_lo, double u_hi, std::size_t n_points);

// Lower median for even n.
double lower_median(std::span<const double> samples);
std::vector<double> median_center(std::span<const double> samples);

using Statistic = std::function<double(std::span<const double>)>;

std::pair<double, double> bootstrap_ci(std::span<const double> samples, const Statistic& statistic,
                                       std::size_t n_boot, double level, StreamKey key);

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

MeanEstimate mean_with_error(std::span<const double> samples);
double pearson_correlation(std::span<const double> x, std::span<const double> y);
// Pearson correlation of the ranks; ties share their average rank.
double spearman_correlation(std::span<const double> x, std::span<const double> y);

}  // namespace bbmx
