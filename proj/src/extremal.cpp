#include "bbmx/extremal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace bbmx {

PointMeasure::PointMeasure(std::vector<double> atoms) : atoms_(std::move(atoms)) {
  for (double a : atoms_) {
    if (!std::isfinite(a)) throw std::invalid_argument("PointMeasure: non-finite atom");
  }
  std::sort(atoms_.begin(), atoms_.end(), std::greater<>());
}

std::size_t PointMeasure::count(double lo, double hi) const {
  // atoms_ is descending: [first atom <= hi, first atom < lo)
  const auto begin = std::lower_bound(atoms_.begin(), atoms_.end(), hi, std::greater<>());
  const auto end = std::lower_bound(atoms_.begin(), atoms_.end(), lo,
                                    [](double atom, double bound) { return atom >= bound; });
  return end > begin ? static_cast<std::size_t>(end - begin) : 0;
}

PointMeasure PointMeasure::shifted(double by) const {
  std::vector<double> out(atoms_);
  for (double& a : out) a += by;
  return PointMeasure(std::move(out));
}

DecoratedPointMeasure::DecoratedPointMeasure(std::vector<Decoration> pairs)
    : pairs_(std::move(pairs)) {
  for (const Decoration& d : pairs_) {
    if (!std::isfinite(d.tip)) throw std::invalid_argument("DecoratedPointMeasure: non-finite tip");
    if (d.cluster.empty() || d.cluster.top() != 0.0) {
      throw std::invalid_argument("DecoratedPointMeasure: cluster must have top atom 0");
    }
  }
  std::stable_sort(pairs_.begin(), pairs_.end(),
                   [](const Decoration& a, const Decoration& b) { return a.tip > b.tip; });
}

PointMeasure DecoratedPointMeasure::flatten() const {
  std::vector<double> atoms;
  for (const Decoration& d : pairs_) {
    for (double a : d.cluster.atoms()) atoms.push_back(d.tip + a);
  }
  return PointMeasure(std::move(atoms));
}

Window::Window(double lo, double hi) : lower(lo), upper(hi) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
    throw std::invalid_argument("Window: need lower <= upper");
  }
}

double exp_ppp_mass(double z, const Window& window) {
  if (!(z >= 0.0)) throw std::invalid_argument("exp_ppp_mass: Z must be >= 0");
  if (z == 0.0) return 0.0;
  if (window.lower == -kInf) return kInf;
  const double hi = window.upper == kInf ? 0.0 : std::exp(-kSqrt2 * window.upper);
  return z / kSqrt2 * (std::exp(-kSqrt2 * window.lower) - hi);
}

PointMeasure sample_exp_ppp(double z, const Window& window, StreamKey key) {
  const double mass = exp_ppp_mass(z, window);
  if (!std::isfinite(mass)) {
    throw std::invalid_argument("sample_exp_ppp: window has infinite intensity mass");
  }
  if (mass == 0.0) return {};
  Rng rng(key);
  const auto n = std::poisson_distribution<std::size_t>(mass)(rng);
  const double top = std::exp(-kSqrt2 * window.lower);
  const double bottom = window.upper == kInf ? 0.0 : std::exp(-kSqrt2 * window.upper);
  std::vector<double> atoms(n);
  for (double& a : atoms) {
    // e^{-sqrt2 x} is uniform on (bottom, top) under the normalized intensity.
    a = -std::log(bottom + rng.uniform() * (top - bottom)) / kSqrt2;
    a = std::clamp(a, window.lower, window.upper);
  }
  return PointMeasure(std::move(atoms));
}

PointMeasure recentered_tip_ppp(double u, const Window& window, StreamKey key) {
  if (!(u > 1.0)) throw std::invalid_argument("recentered_tip_ppp: u must exceed 1");
  if (window.lower == -kInf) {
    throw std::invalid_argument("recentered_tip_ppp: window lower end must be finite");
  }
  return sample_exp_ppp(u, window, key);
}

DecoratedPointMeasure assemble_limit_process(const PointMeasure& tips,
                                             const std::vector<PointMeasure>& clusters) {
  if (tips.mass() != clusters.size()) {
    throw std::invalid_argument("assemble_limit_process: " + std::to_string(tips.mass()) +
                                " tips but " + std::to_string(clusters.size()) + " clusters");
  }
  std::vector<Decoration> pairs;
  pairs.reserve(clusters.size());
  for (std::size_t k = 0; k < clusters.size(); ++k) pairs.push_back({tips.atoms()[k], clusters[k]});
  return DecoratedPointMeasure(std::move(pairs));
}

std::size_t restricted_mass(const DecoratedPointMeasure& process, double v, const Window& b) {
  std::size_t total = 0;
  for (const Decoration& d : process.pairs()) {
    if (b.contains(d.tip)) total += d.cluster.count(-v - d.tip, 0.0);
  }
  return total;
}

double stable1_laplace(double t, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("stable1_laplace: lambda must be positive");
  if (!(t > 0.0)) throw std::invalid_argument("stable1_laplace: t must be positive");
  return std::exp(t * lambda * std::log(lambda));
}

void StableSamplerConfig::validate() const {
  if (!(t > 0.0) || !(z_min > 0.0) || !(z_min < rho) || !(rho < z_max) || !std::isfinite(z_max)) {
    throw std::invalid_argument("StableSamplerConfig: need t > 0 and 0 < z_min < rho < z_max < inf");
  }
}

double stable1_compensated_sum(const StableSamplerConfig& config, StreamKey key) {
  config.validate();
  Rng rng(key);
  const double inv_lo = 1.0 / config.z_min;
  const double inv_hi = 1.0 / config.z_max;
  const double mass = config.t * (inv_lo - inv_hi);
  const auto n = std::poisson_distribution<std::size_t>(mass)(rng);
  double jumps = 0.0;
  for (std::size_t i = 0; i < n; ++i) jumps += 1.0 / (inv_hi + rng.uniform() * (inv_lo - inv_hi));
  return jumps - config.t * std::log(config.rho / config.z_min);
}

double stable1_sample(const StableSamplerConfig& config, StreamKey key) {
  return stable1_compensated_sum(config, key) +
         config.t * (std::log(config.rho) - 1.0 + kEulerGamma);
}

double stable1_truncation_bound(const StableSamplerConfig& config, double lambda) {
  config.validate();
  const double exponent_error =
      config.t * lambda * lambda * config.z_min / 2.0 + config.t / config.z_max;
  return stable1_laplace(config.t, lambda) * std::expm1(exponent_error);
}

double tip_level(double u, double x) { return u - std::log(u) / kSqrt2 + x; }

namespace {

void require_statistic_args(double u, double x_minus, double x_plus) {
  if (!(u > std::numbers::e)) throw std::invalid_argument("compensated mass: u must exceed e");
  if (!(x_minus < 0.0) || !(x_plus > 0.0) || !std::isfinite(x_minus) || !std::isfinite(x_plus)) {
    throw std::invalid_argument("compensated mass: need finite x_minus < 0 < x_plus");
  }
}

}  // namespace

CompensatorEstimate estimate_compensator(double u, double x_minus, double x_plus, double rho,
                                         const MassSampler& cluster_source, std::size_t n_comp,
                                         StreamKey key) {
  require_statistic_args(u, x_minus, x_plus);
  if (!(rho > 0.0)) throw std::invalid_argument("estimate_compensator: rho must be positive");
  if (n_comp == 0) throw std::invalid_argument("estimate_compensator: n_comp must be positive");
  const Window window(x_minus, x_plus);
  const double lambda = exp_ppp_mass(u, window);
  const double top = std::exp(-kSqrt2 * x_minus);
  const double bottom = std::exp(-kSqrt2 * x_plus);
  const double scale = std::exp(-kSqrt2 * u);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n_comp; ++i) {
    const StreamKey draw = derive(key, i);
    Rng rng(derive(draw, 0));
    const double x = -std::log(bottom + rng.uniform() * (top - bottom)) / kSqrt2;
    const double ty = scale * cluster_source(tip_level(u, x), derive(draw, 1));
    const double term = ty <= rho ? ty : 0.0;
    sum += term;
    sum_sq += term * term;
  }
  const double n = static_cast<double>(n_comp);
  const double mean = sum / n;
  const double var = n > 1 ? std::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1) : 0.0;
  return {lambda * mean, lambda * std::sqrt(var / n), n_comp};
}

CompensatedMass compensated_mass_statistic(double u, double x_minus, double x_plus,
                                           const CompensatorEstimate& compensator,
                                           const MassSampler& cluster_source, StreamKey key) {
  require_statistic_args(u, x_minus, x_plus);
  const PointMeasure tips = recentered_tip_ppp(u, Window(x_minus, x_plus), derive(key, 0));
  const double scale = std::exp(-kSqrt2 * u);
  CompensatedMass out;
  out.n_tips = tips.mass();
  double raw = 0.0;
  std::size_t k = 0;
  for (double x : tips.atoms()) raw += cluster_source(tip_level(u, x), derive(key, 1 + k++));
  out.raw = scale * raw;
  out.compensator = compensator.value;
  out.value = out.raw - out.compensator;
  if (compensator.n_draws < 1000) {
    out.diagnostics.push_back("warning: compensator estimated from only " +
                              std::to_string(compensator.n_draws) + " cluster draws (< 1000)");
  }
  return out;
}

CompensatedMass compensated_mass_statistic(double u, double x_minus, double x_plus, double rho,
                                           const MassSampler& cluster_source, std::size_t n_comp,
                                           StreamKey key) {
  const CompensatorEstimate comp =
      estimate_compensator(u, x_minus, x_plus, rho, cluster_source, n_comp, derive(key, 1u << 31));
  return compensated_mass_statistic(u, x_minus, x_plus, comp, cluster_source, derive(key, 0));
}

}  // namespace bbmx
