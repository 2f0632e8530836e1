#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "bbmx/rng.hpp"

namespace bbmx {

// 3 / (2 sqrt 2): coefficient of the logarithmic correction in m_t and in the
// cluster backbone curve.
inline constexpr double kLogCurve = 1.0606601717798212;

inline double log_plus(double t) { return t > 1.0 ? std::log(t) : 0.0; }

// Strictly increasing, finite, nonnegative model times.
class TimeGrid {
 public:
  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> times);

  static TimeGrid uniform(double t0, double t1, std::size_t points);
  // `points` log-spaced times in [t0, t1], t0 > 0.
  static TimeGrid log_spaced(double t0, double t1, std::size_t points);

  std::span<const double> times() const { return times_; }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }
  double operator[](std::size_t i) const { return times_[i]; }
  double front() const { return times_.front(); }
  double back() const { return times_.back(); }

 private:
  std::vector<double> times_;
};

struct SamplePath {
  TimeGrid grid;
  std::vector<double> values;

  double min() const;
};

// Brownian motion started from x0 at time 0, observed on `grid`.
SamplePath sample_brownian(const TimeGrid& grid, double x0, StreamKey key);

// Brownian bridge from (0, x0) to (t_end, x_end). Grid points equal to 0 or
// t_end carry the pinned values exactly.
SamplePath sample_bridge(const TimeGrid& grid, double t_end, double x0, double x_end,
                         StreamKey key);

// A Bessel-3 path kept together with its three Brownian components, so that
// it can be refined later with exact bridge interpolation.
class Bessel3Path {
 public:
  Bessel3Path(const TimeGrid& grid, double y0, StreamKey key);

  std::span<const double> times() const { return times_; }
  std::span<const double> values() const { return norm_; }
  std::size_t size() const { return times_.size(); }

  // Inserts `s` strictly between two existing neighbouring grid times and
  // returns its index. Each component is drawn from the Brownian bridge
  // between its neighbours, which is its exact conditional law.
  std::size_t insert(double s);

  // Underlying 3D Brownian position at grid index i.
  std::array<double, 3> position(std::size_t i) const {
    return {comp_[0][i], comp_[1][i], comp_[2][i]};
  }

  SamplePath to_sample_path() const;

 private:
  std::vector<double> times_;
  std::vector<double> comp_[3];
  std::vector<double> norm_;
  Rng rng_;
};

// Norm of a 3D Brownian motion started at (y0, 0, 0).
SamplePath sample_bessel3(const TimeGrid& grid, double y0, StreamKey key);

// Cluster backbone: -Y_s - kLogCurve * log+(s), Y a Bessel-3 path from y0.
SamplePath sample_backbone(const TimeGrid& grid, double y0, StreamKey key);
double backbone_curve(double s);

// P(min of the Brownian bridge x -> y over [0, t] stays >= 0) = 1 - exp(-2xy/t).
double bridge_stay_positive(double x, double y, double t);
// Large-t form 2xy/t, which also upper-bounds the closed form.
double bridge_stay_positive_asymptotic(double x, double y, double t);

struct StayPositiveEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  // Upper bound on the (positive) bias from monitoring the minimum on a grid.
  double bias_bound = 0.0;
  std::size_t n_rep = 0;
};

// Monte Carlo oracle for bridge_stay_positive: fraction of discretized bridges
// whose grid minimum is >= 0. Discrete monitoring misses excursions between
// grid points, so the estimate is biased upward by O(n_steps^{-1/2}).
// `bias_bound` is computed by shifting both endpoints up by sqrt(t / n_steps),
// which dominates the Broadie-Glasserman-Kou correction 0.5826 * sqrt(dt).
StayPositiveEstimate mc_stay_positive(double x, double y, double t, std::size_t n_steps,
                                      std::size_t n_rep, StreamKey key);

}  // namespace bbmx
