#include "bbmx/paths.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bbmx {

TimeGrid::TimeGrid(std::vector<double> times) : times_(std::move(times)) {
  if (times_.empty()) throw std::invalid_argument("TimeGrid: empty grid");
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i])) throw std::invalid_argument("TimeGrid: non-finite time");
    if (i == 0 && times_[i] < 0.0) throw std::invalid_argument("TimeGrid: negative start time");
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw std::invalid_argument("TimeGrid: times not strictly increasing at index " +
                                  std::to_string(i));
    }
  }
}

TimeGrid TimeGrid::uniform(double t0, double t1, std::size_t points) {
  if (points == 0) throw std::invalid_argument("TimeGrid::uniform: no points");
  if (points == 1) return TimeGrid({t0});
  std::vector<double> t(points);
  for (std::size_t i = 0; i < points; ++i) {
    t[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  t.back() = t1;
  return TimeGrid(std::move(t));
}

TimeGrid TimeGrid::log_spaced(double t0, double t1, std::size_t points) {
  if (!(t0 > 0.0) || !(t1 > t0) || points < 2) {
    throw std::invalid_argument("TimeGrid::log_spaced: need 0 < t0 < t1 and >= 2 points");
  }
  std::vector<double> t(points);
  const double a = std::log(t0), b = std::log(t1);
  for (std::size_t i = 0; i < points; ++i) {
    t[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
  }
  t.front() = t0;
  t.back() = t1;
  return TimeGrid(std::move(t));
}

double SamplePath::min() const { return *std::min_element(values.begin(), values.end()); }

namespace {

void require_grid(const TimeGrid& grid) {
  if (grid.empty()) throw std::invalid_argument("empty time grid");
}

}  // namespace

SamplePath sample_brownian(const TimeGrid& grid, double x0, StreamKey key) {
  require_grid(grid);
  Rng rng(key);
  SamplePath path{grid, std::vector<double>(grid.size())};
  double t = 0.0, x = x0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double dt = grid[i] - t;
    if (dt > 0.0) x += std::sqrt(dt) * rng.normal();
    path.values[i] = x;
    t = grid[i];
  }
  return path;
}

SamplePath sample_bridge(const TimeGrid& grid, double t_end, double x0, double x_end,
                         StreamKey key) {
  require_grid(grid);
  if (!(t_end > 0.0)) throw std::invalid_argument("sample_bridge: t_end must be positive");
  if (grid.back() > t_end) {
    throw std::invalid_argument("sample_bridge: grid point beyond t_end");
  }
  Rng rng(key);
  SamplePath path{grid, std::vector<double>(grid.size())};
  double t = 0.0, x = x0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double s = grid[i];
    if (s == 0.0) {
      x = x0;
    } else if (s == t_end) {
      x = x_end;
    } else {
      const double remaining = t_end - t;
      const double mean = x + (x_end - x) * (s - t) / remaining;
      const double var = (s - t) * (t_end - s) / remaining;
      x = mean + std::sqrt(var) * rng.normal();
    }
    path.values[i] = x;
    t = s;
  }
  return path;
}

Bessel3Path::Bessel3Path(const TimeGrid& grid, double y0, StreamKey key) : rng_(key) {
  require_grid(grid);
  if (!(y0 >= 0.0)) throw std::invalid_argument("Bessel3: y0 must be >= 0");
  const auto t = grid.times();
  times_.assign(t.begin(), t.end());
  for (auto& c : comp_) c.resize(times_.size());
  norm_.resize(times_.size());
  double prev = 0.0;
  double w[3] = {y0, 0.0, 0.0};
  for (std::size_t i = 0; i < times_.size(); ++i) {
    const double dt = times_[i] - prev;
    if (dt > 0.0) {
      const double sd = std::sqrt(dt);
      for (double& wk : w) wk += sd * rng_.normal();
    }
    for (int k = 0; k < 3; ++k) comp_[k][i] = w[k];
    norm_[i] = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
    prev = times_[i];
  }
}

std::size_t Bessel3Path::insert(double s) {
  const auto it = std::upper_bound(times_.begin(), times_.end(), s);
  if (it == times_.begin() || it == times_.end() || *(it - 1) == s) {
    throw std::invalid_argument("Bessel3Path::insert: time must lie strictly inside the grid");
  }
  const auto right = static_cast<std::size_t>(it - times_.begin());
  const std::size_t left = right - 1;
  const double a = times_[left], b = times_[right];
  const double frac = (s - a) / (b - a);
  const double sd = std::sqrt((s - a) * (b - s) / (b - a));
  double w[3];
  for (int k = 0; k < 3; ++k) {
    w[k] = comp_[k][left] + frac * (comp_[k][right] - comp_[k][left]) + sd * rng_.normal();
  }
  times_.insert(times_.begin() + static_cast<std::ptrdiff_t>(right), s);
  for (int k = 0; k < 3; ++k) {
    comp_[k].insert(comp_[k].begin() + static_cast<std::ptrdiff_t>(right), w[k]);
  }
  norm_.insert(norm_.begin() + static_cast<std::ptrdiff_t>(right),
               std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]));
  return right;
}

SamplePath Bessel3Path::to_sample_path() const { return {TimeGrid(times_), norm_}; }

SamplePath sample_bessel3(const TimeGrid& grid, double y0, StreamKey key) {
  return Bessel3Path(grid, y0, key).to_sample_path();
}

double backbone_curve(double s) { return -kLogCurve * log_plus(s); }

SamplePath sample_backbone(const TimeGrid& grid, double y0, StreamKey key) {
  SamplePath path = sample_bessel3(grid, y0, key);
  for (std::size_t i = 0; i < path.values.size(); ++i) {
    path.values[i] = -path.values[i] + backbone_curve(grid[i]);
  }
  return path;
}

namespace {

void require_ballot_args(double x, double y, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("bridge_stay_positive: t must be positive");
  if (!(x >= 0.0) || !(y >= 0.0)) {
    throw std::invalid_argument("bridge_stay_positive: endpoints must be >= 0");
  }
}

}  // namespace

double bridge_stay_positive(double x, double y, double t) {
  require_ballot_args(x, y, t);
  return -std::expm1(-2.0 * x * y / t);
}

double bridge_stay_positive_asymptotic(double x, double y, double t) {
  require_ballot_args(x, y, t);
  return 2.0 * x * y / t;
}

StayPositiveEstimate mc_stay_positive(double x, double y, double t, std::size_t n_steps,
                                      std::size_t n_rep, StreamKey key) {
  require_ballot_args(x, y, t);
  if (n_steps < 2) throw std::invalid_argument("mc_stay_positive: n_steps must be >= 2");
  if (n_rep < 1) throw std::invalid_argument("mc_stay_positive: n_rep must be >= 1");

  const double dt = t / static_cast<double>(n_steps);
  std::size_t survived = 0;
  for (std::size_t r = 0; r < n_rep; ++r) {
    Rng rng(derive(key, r));
    double w = x;
    bool alive = w >= 0.0;
    // Sequential bridge construction; stop at the first negative grid value.
    for (std::size_t k = 1; alive && k < n_steps; ++k) {
      const double remaining = t - static_cast<double>(k - 1) * dt;
      const double mean = w + (y - w) * dt / remaining;
      const double sd = std::sqrt(dt * (remaining - dt) / remaining);
      w = mean + sd * rng.normal();
      alive = w >= 0.0;
    }
    if (alive) ++survived;
  }
  StayPositiveEstimate out;
  out.n_rep = n_rep;
  out.estimate = static_cast<double>(survived) / static_cast<double>(n_rep);
  out.std_error = std::sqrt(std::max(out.estimate * (1.0 - out.estimate), 0.0) /
                          static_cast<double>(n_rep));
  const double shift = std::sqrt(dt);
  out.bias_bound = bridge_stay_positive(x + shift, y + shift, t) - bridge_stay_positive(x, y, t);
  return out;
}

}  // namespace bbmx
