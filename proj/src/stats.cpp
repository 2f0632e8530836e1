#include "bbmx/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bbmx {

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> samples)
    : samples_(std::move(samples)) {
  if (samples_.empty()) throw std::invalid_argument("EmpiricalDistribution: no samples");
  for (double x : samples_) {
    if (std::isnan(x)) throw std::invalid_argument("EmpiricalDistribution: NaN sample");
  }
  std::sort(samples_.begin(), samples_.end());
}

double EmpiricalDistribution::cdf(double x) const {
  const auto k = std::upper_bound(samples_.begin(), samples_.end(), x) - samples_.begin();
  return static_cast<double>(k) / static_cast<double>(samples_.size());
}

double EmpiricalDistribution::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p must lie in [0, 1]");
  const double n = static_cast<double>(samples_.size());
  auto k = static_cast<std::size_t>(std::ceil(p * n));
  k = std::clamp<std::size_t>(k, 1, samples_.size());
  return samples_[k - 1];
}

double ks_distance(const EmpiricalDistribution& a, const EmpiricalDistribution& b) {
  const auto& x = a.samples();
  const auto& y = b.samples();
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == t) ++i;
    while (j < y.size() && y[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

LaplaceEstimate empirical_laplace(std::span<const double> samples, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("empirical_laplace: lambda must be positive");
  if (samples.empty()) throw std::invalid_argument("empirical_laplace: no samples");
  const double floor = -700.0 / lambda;
  double sum = 0.0, sum_sq = 0.0;
  for (double x : samples) {
    if (x < floor) {
      throw std::range_error("empirical_laplace: sample " + std::to_string(x) +
                             " below -700/lambda would overflow");
    }
    const double e = std::exp(-lambda * x);
    sum += e;
    sum_sq += e * e;
  }
  const double n = static_cast<double>(samples.size());
  const double mean = sum / n;
  const double var = n > 1 ? std::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1) : 0.0;
  return {mean, std::sqrt(var / n)};
}

double tail_slope(std::span<const double> samples, double u_lo, double u_hi, std::size_t n_points) {
  if (!(u_hi > u_lo) || n_points < 2) {
    throw std::invalid_argument("tail_slope: need u_lo < u_hi and n_points >= 2");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto exceed = [&](double u) {
    return static_cast<std::size_t>(sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), u));
  };
  const std::size_t above = exceed(u_lo);
  if (above < 50) {
    throw std::invalid_argument("tail_slope: only " + std::to_string(above) +
                                " samples exceed u_lo (need 50)");
  }
  const double n = static_cast<double>(sorted.size());
  std::vector<double> us, ys;
  for (std::size_t k = 0; k < n_points; ++k) {
    const double u = u_lo + (u_hi - u_lo) * static_cast<double>(k) / static_cast<double>(n_points - 1);
    const std::size_t m = exceed(u);
    if (m == 0) break;
    us.push_back(u);
    ys.push_back(-std::log(static_cast<double>(m) / n));
  }
  if (us.size() < 2) throw std::invalid_argument("tail_slope: survival vanishes inside [u_lo, u_hi]");
  double mu = 0.0, my = 0.0;
  for (std::size_t k = 0; k < us.size(); ++k) {
    mu += us[k];
    my += ys[k];
  }
  mu /= static_cast<double>(us.size());
  my /= static_cast<double>(us.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < us.size(); ++k) {
    sxy += (us[k] - mu) * (ys[k] - my);
    sxx += (us[k] - mu) * (us[k] - mu);
  }
  if (sxy == 0.0) throw std::invalid_argument("tail_slope: no tail variation in [u_lo, u_hi]");
  return sxy / sxx;
}

double lower_median(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("lower_median: no samples");
  std::vector<double> v(samples.begin(), samples.end());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

std::vector<double> median_center(std::span<const double> samples) {
  const double m = lower_median(samples);
  std::vector<double> out(samples.begin(), samples.end());
  for (double& x : out) x -= m;
  return out;
}

std::pair<double, double> bootstrap_ci(std::span<const double> samples, const Statistic& statistic,
                                       std::size_t n_boot, double level, StreamKey key) {
  if (samples.empty()) throw std::invalid_argument("bootstrap_ci: no samples");
  if (n_boot < 200) throw std::invalid_argument("bootstrap_ci: n_boot must be >= 200");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_ci: level in (0, 1)");
  const std::size_t n = samples.size();
  std::vector<double> stats;
  stats.reserve(n_boot);
  std::vector<double> resample(n);
  for (std::size_t b = 0; b < n_boot; ++b) {
    Rng rng(derive(key, b));
    for (double& x : resample) {
      x = samples[std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)), n - 1)];
    }
    stats.push_back(statistic(resample));
  }
  const EmpiricalDistribution dist(std::move(stats));
  const double alpha = (1.0 - level) / 2.0;
  return {dist.quantile(alpha), dist.quantile(1.0 - alpha)};
}

MeanEstimate mean_with_error(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("mean_with_error: no samples");
  double sum = 0.0;
  for (double x : samples) sum += x;
  const double n = static_cast<double>(samples.size());
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double var = n > 1 ? ss / (n - 1) : 0.0;
  return {mean, std::sqrt(var / n)};
}

double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("pearson_correlation: need two equal-length samples of size >= 2");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman_correlation: need two equal-length samples of size >= 2");
  }
  return pearson_correlation(average_ranks(x), average_ranks(y));
}

}  // namespace bbmx
