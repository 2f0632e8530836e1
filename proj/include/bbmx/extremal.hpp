#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bbmx/rng.hpp"

namespace bbmx {

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kEulerGamma = 0.57721566490153286;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Finite point measure on the real line; atoms kept in descending order.
class PointMeasure {
 public:
  PointMeasure() = default;
  explicit PointMeasure(std::vector<double> atoms);

  std::span<const double> atoms() const { return atoms_; }
  std::size_t mass() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  double top() const { return atoms_.front(); }
  // Number of atoms in [lo, hi].
  std::size_t count(double lo, double hi = kInf) const;
  PointMeasure shifted(double by) const;

 private:
  std::vector<double> atoms_;
};

struct Decoration {
  double tip = 0.0;
  PointMeasure cluster;  // relative heights: top atom 0, all atoms <= 0
};

class DecoratedPointMeasure {
 public:
  DecoratedPointMeasure() = default;
  // Sorts pairs by descending tip and validates every cluster.
  explicit DecoratedPointMeasure(std::vector<Decoration> pairs);

  const std::vector<Decoration>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  // Sum_k C^k(. - u^k) as a single point measure.
  PointMeasure flatten() const;

 private:
  std::vector<Decoration> pairs_;
};

// Closed interval [lower, upper]; either end may be infinite.
struct Window {
  double lower = -kInf;
  double upper = kInf;

  Window() = default;
  Window(double lo, double hi);
  bool contains(double x) const { return x >= lower && x <= upper; }
};

// Intensity mass of Z e^{-sqrt2 u} du over the window. Infinite if lower = -inf.
double exp_ppp_mass(double z, const Window& window);

// PPP(Z e^{-sqrt2 u} du) on the window: Poisson count with the exact mass,
// positions by inverse CDF. Rejects windows of infinite mass.
PointMeasure sample_exp_ppp(double z, const Window& window, StreamKey key);

// PPP(u e^{-sqrt2 x} dx): the tip process seen from u_* = -log(u)/sqrt2.
PointMeasure recentered_tip_ppp(double u, const Window& window, StreamKey key);

DecoratedPointMeasure assemble_limit_process(const PointMeasure& tips,
                                             const std::vector<PointMeasure>& clusters);

// Atoms of the flattened process in [-v, inf), counting only clusters whose
// tip lies in B.
std::size_t restricted_mass(const DecoratedPointMeasure& process, double v, const Window& b);

// E exp(-lambda R_t) = exp(t lambda log lambda).
double stable1_laplace(double t, double lambda);

struct StableSamplerConfig {
  double t = 1.0;
  double rho = 1.0;
  double z_min = 1e-2;
  double z_max = 1e6;

  void validate() const;
};

// Jumps of PPP(t z^{-2} dz) on [z_min, z_max] compensated below rho:
//   sum z_i - t log(rho / z_min).
// Its Laplace exponent is t (lambda log lambda + (log rho - 1 + gamma) lambda)
// up to truncation, so replacing rho by k rho shifts it by exactly -t log k.
double stable1_compensated_sum(const StableSamplerConfig& config, StreamKey key);

// Compensated sum shifted by t (log rho - 1 + gamma), which makes the law
// R_t with E exp(-lambda R_t) = exp(t lambda log lambda) independently of rho.
double stable1_sample(const StableSamplerConfig& config, StreamKey key);

// Bound on |E_sampler exp(-lambda R) - exp(t lambda log lambda)|: jumps below
// z_min shift the Laplace exponent by at most t lambda^2 z_min / 2 and jumps
// above z_max by at most t / z_max.
double stable1_truncation_bound(const StableSamplerConfig& config, double lambda);

// C([-w, 0]) for a cluster drawn from the cluster law at level w.
using MassSampler = std::function<double(double w, StreamKey key)>;

struct CompensatorEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_draws = 0;
};

// Plug-in estimate of E_u(rho): Lambda * E[t Y 1{t Y <= rho}] with the tip
// position x drawn from the normalized intensity on [x_minus, x_plus],
// t = e^{sqrt2 x} and Y = e^{-sqrt2 (u + x)} C([-w_u(x), 0]).
CompensatorEstimate estimate_compensator(double u, double x_minus, double x_plus, double rho,
                                         const MassSampler& cluster_source, std::size_t n_comp,
                                         StreamKey key);

struct CompensatedMass {
  double value = 0.0;        // raw - compensator
  double raw = 0.0;          // e^{-sqrt2 u} * sum of cluster masses over tips in the window
  double compensator = 0.0;
  std::size_t n_tips = 0;
  std::vector<std::string> diagnostics;
};

// w_u(x) = u - log(u)/sqrt2 + x
double tip_level(double u, double x);

// Compensated extremal-mass statistic for tips in u_* + [x_minus, x_plus].
CompensatedMass compensated_mass_statistic(double u, double x_minus, double x_plus,
                                           const CompensatorEstimate& compensator,
                                           const MassSampler& cluster_source, StreamKey key);

// Same, estimating the compensator from n_comp fresh cluster draws.
CompensatedMass compensated_mass_statistic(double u, double x_minus, double x_plus, double rho,
                                           const MassSampler& cluster_source, std::size_t n_comp,
                                           StreamKey key);

}  // namespace bbmx
