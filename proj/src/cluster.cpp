#include "bbmx/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace bbmx {

TimestampProcess sample_timestamps(double horizon, StreamKey key) {
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw std::invalid_argument("sample_timestamps: horizon must be finite and >= 0");
  }
  Rng rng(key);
  TimestampProcess out;
  out.horizon = horizon;
  for (double s = rng.exponential(2.0); s <= horizon; s += rng.exponential(2.0)) {
    out.events.push_back(s);
  }
  return out;
}

ZBank::ZBank(const std::vector<double>& raw, Provenance provenance) : provenance_(provenance) {
  for (double z : raw) {
    if (z > 0.0 && std::isfinite(z)) values_.push_back(z);
  }
  if (values_.empty()) throw std::invalid_argument("ZBank: no positive values");
  double mean = 0.0;
  for (double z : values_) mean += z;
  mean /= static_cast<double>(values_.size());
  for (double& z : values_) z /= mean;
  provenance_.scale = mean * provenance.scale;
}

double ZBank::draw(Rng& rng) const {
  const auto n = static_cast<double>(values_.size());
  const auto i = std::min(static_cast<std::size_t>(rng.uniform() * n), values_.size() - 1);
  return values_[i];
}

ZSource ZBank::source() const {
  return [values = values_](Rng& rng) {
    const auto n = static_cast<double>(values.size());
    return values[std::min(static_cast<std::size_t>(rng.uniform() * n), values.size() - 1)];
  };
}

void ZBank::write_csv(std::ostream& out) const {
  out.precision(17);
  out << "# bbmx zbank t=" << provenance_.t << " seed=" << provenance_.seed
      << " c_diamond=" << provenance_.c_diamond << " scale=" << provenance_.scale << "\n";
  out << "z\n";
  for (double z : values_) out << z << '\n';
}

ZBank ZBank::read_csv(std::istream& in) {
  std::string line;
  Provenance p;
  std::vector<double> values;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream fields(line.substr(1));
      std::string token;
      while (fields >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) continue;
        const std::string k = token.substr(0, eq);
        const std::string val = token.substr(eq + 1);
        if (k == "t") p.t = std::stod(val);
        if (k == "seed") p.seed = std::stoull(val);
        if (k == "c_diamond") p.c_diamond = std::stod(val);
        if (k == "scale") p.scale = std::stod(val);
      }
      continue;
    }
    if (!header_seen) {
      if (line != "z") throw std::invalid_argument("ZBank::read_csv: expected header 'z'");
      header_seen = true;
      continue;
    }
    values.push_back(std::stod(line));
  }
  // Values on disk are already normalized; the constructor's rescaling is then
  // a no-op up to rounding, and `scale` is restored from the header.
  const double scale = p.scale;
  p.scale = 1.0;
  ZBank bank(values, p);
  bank.provenance_.scale = scale;
  return bank;
}

BankRun bank_run(double t, double v, const PruneConfig& prune, StreamKey key, double c_diamond) {
  SimulateOptions options;
  options.record_genealogy = false;
  ParticleSystem system = simulate(t, prune, key, options);
  if (v > certified_level_depth(system)) system = simulate(t, PruneConfig{}, key, options);
  return {derivative_martingale(system, c_diamond), level_set_count(system, v), centered_max(system)};
}

BankBuild simulate_bank_runs(double t, double v, std::size_t n, const PruneConfig& prune,
                             StreamKey key, double c_diamond) {
  BankBuild out;
  out.t = t;
  out.v = v;
  out.runs.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.runs.push_back(bank_run(t, v, prune, derive(key, k), c_diamond));
  return out;
}

C0Calibration calibrate_c0(const BankBuild& build, double scale) {
  const double v = build.v, t = build.t;
  const double profile = v * std::exp(kSqrt2 * v - v * v / (2.0 * t));
  double sxy = 0.0, sxx = 0.0;
  std::vector<std::pair<double, double>> pts;
  for (const BankRun& r : build.runs) {
    if (!(r.z > 0.0)) continue;
    const double x = r.z / scale * profile;
    const double y = static_cast<double>(r.level_count);
    pts.emplace_back(x, y);
    sxy += x * y;
    sxx += x * x;
  }
  if (pts.size() < 2 || sxx == 0.0) throw std::invalid_argument("calibrate_c0: too few runs with Z > 0");
  C0Calibration out;
  out.c0 = sxy / sxx;
  out.n_used = pts.size();
  double rss = 0.0;
  for (auto [x, y] : pts) rss += (y - out.c0 * x) * (y - out.c0 * x);
  out.std_error = std::sqrt(rss / static_cast<double>(pts.size() - 1) / sxx);
  return out;
}

std::string to_string(ClusterMode mode) {
  switch (mode) {
    case ClusterMode::exact: return "exact";
    case ClusterMode::surrogate: return "surrogate";
    case ClusterMode::hybrid: return "hybrid";
  }
  return "?";
}

ClusterMode parse_cluster_mode(const std::string& name) {
  if (name == "exact") return ClusterMode::exact;
  if (name == "surrogate") return ClusterMode::surrogate;
  if (name == "hybrid") return ClusterMode::hybrid;
  throw std::invalid_argument("unknown cluster mode '" + name + "'");
}

double default_horizon(double v) { return std::max(4.0 * std::pow(v, 4.0 / 3.0), 100.0); }

namespace {

struct ClusterRun {
  double mass = 0.0;
  ClusterDiagnostics diagnostics;
};

double surrogate_profile(double a, double s) {
  return a * std::exp(kSqrt2 * a - a * a / (2.0 * s));
}

// One draw of the strong representation. Both sample_cluster and cluster_mass
// go through here so they consume the random streams identically:
//   derive(key, 0) timestamps, derive(key, 1) backbone components,
//   derive(key, 2) Z draws, derive(derive(key, 3), i) exact decoration i,
//   derive(key, 4) backbone continuation for the truncation bound.
ClusterRun run_cluster(double v, const ClusterConfig& config, StreamKey key, ClusterSample* detail) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("sample_cluster: v must be positive");
  if (!(config.y0 >= 0.0)) throw std::invalid_argument("sample_cluster: y0 must be >= 0");
  const bool exact_only = config.mode == ClusterMode::exact;
  double horizon = config.horizon;
  if (exact_only) {
    if (v > 12.0) throw std::invalid_argument("sample_cluster: exact mode requires v <= 12");
    if (horizon == 0.0) horizon = config.exact.s_max_exact;
    if (horizon > config.exact.s_max_exact) {
      throw std::invalid_argument("sample_cluster: exact mode horizon exceeds s_max_exact");
    }
  } else {
    if (horizon == 0.0) horizon = default_horizon(v);
    if (horizon < default_horizon(v)) {
      throw std::invalid_argument("sample_cluster: horizon " + std::to_string(horizon) +
                                  " below max(4 v^{4/3}, 100) = " +
                                  std::to_string(default_horizon(v)));
    }
    if (!config.z_source) throw std::invalid_argument("sample_cluster: z_source required");
  }
  if (!(horizon >= 0.0)) throw std::invalid_argument("sample_cluster: horizon must be >= 0");

  ClusterRun out;
  out.diagnostics.horizon = horizon;
  out.diagnostics.s_cut = exact_only ? horizon
                          : config.mode == ClusterMode::hybrid ? config.s_cut
                                                               : 0.0;

  Rng gaps(derive(key, 0));
  Rng bessel(derive(key, 1));
  Rng zrng(derive(key, 2));
  const StreamKey exact_key = derive(key, 3);

  std::vector<double> times, backbone;
  if (detail) {
    times.push_back(0.0);
    backbone.push_back(-config.y0);
  }

  double w[3] = {config.y0, 0.0, 0.0};
  double s_prev = 0.0;
  std::size_t index = 0;
  for (double s = gaps.exponential(2.0); s <= horizon; s += gaps.exponential(2.0), ++index) {
    const double sd = std::sqrt(s - s_prev);
    for (double& wk : w) wk += sd * bessel.normal();
    s_prev = s;
    const double y = std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]);
    const double backbone_value = -y + backbone_curve(s);

    double contribution = 0.0;
    if (s <= out.diagnostics.s_cut) {
      const double ceiling = -backbone_value;
      try {
        const ConditionedSystem cond =
            conditioned_bbm(s, ceiling, derive(exact_key, index), config.exact);
        const double level = centering(s) - v - backbone_value;
        for (double h : cond.system.heights()) {
          if (h >= level) contribution += 1.0;
        }
        out.diagnostics.exact_attempts += cond.attempts;
      } catch (const RejectionError& e) {
        throw RejectionError("sample_cluster: exact decoration at event time s=" +
                                 std::to_string(s) + " failed: " + e.what(),
                             e.attempts(), e.acceptance_upper());
      }
      ++out.diagnostics.exact_events;
    } else {
      const double a = v + backbone_value;
      if (a > 0.0) {
        if (a > 0.9 * kSqrt2 * s) ++out.diagnostics.regime_warnings;
        contribution = config.c0 * config.z_source(zrng) * surrogate_profile(a, s);
      }
    }
    out.mass += contribution;
    if (detail) {
      times.push_back(s);
      backbone.push_back(backbone_value);
      detail->contributions.push_back(contribution);
      detail->timestamps.events.push_back(s);
    }
  }

  // Continue the backbone past the horizon on a geometric grid and add up the
  // surrogate means it would have contributed.
  {
    Rng ext(derive(key, 4));
    double prev = s_prev;
    double bound = 0.0;
    const std::size_t steps = 64;
    double grid_prev = horizon;
    for (std::size_t j = 0; j <= steps; ++j) {
      const double s = horizon * std::pow(16.0, static_cast<double>(j) / steps);
      const double dt = s - prev;
      if (dt > 0.0) {
        const double sd = std::sqrt(dt);
        for (double& wk : w) wk += sd * ext.normal();
      }
      prev = s;
      if (j == 0 || s <= 0.0) {
        grid_prev = s;
        continue;
      }
      const double a = v - std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) + backbone_curve(s);
      if (a > 0.0) bound += 2.0 * config.c0 * config.z_mean * surrogate_profile(a, s) * (s - grid_prev);
      grid_prev = s;
    }
    out.diagnostics.truncation_bound = bound;
  }

  if (detail) {
    detail->v = v;
    detail->mode = config.mode;
    detail->mass = out.mass;
    detail->timestamps.horizon = horizon;
    detail->backbone = SamplePath{TimeGrid(std::move(times)), std::move(backbone)};
    detail->diagnostics = out.diagnostics;
  }
  return out;
}

}  // namespace

ClusterSample sample_cluster(double v, const ClusterConfig& config, StreamKey key) {
  ClusterSample sample;
  run_cluster(v, config, key, &sample);
  return sample;
}

double cluster_mass(double v, const ClusterConfig& config, StreamKey key) {
  return run_cluster(v, config, key, nullptr).mass;
}

double x_statistic(double mass, double w) {
  if (!(w > 0.0)) throw std::invalid_argument("x_statistic: w must be positive");
  return mass / (w * std::exp(kSqrt2 * w));
}

double x_statistic(const ClusterSample& sample) { return x_statistic(sample.mass, sample.v); }

void ZetaGrid::validate() const {
  if (!(s_min > 0.0) || !(s_max > s_min) || points < 16) {
    throw std::invalid_argument("ZetaGrid: need 0 < s_min < s_max and points >= 16");
  }
}

ZetaSample zeta_sample(const ZetaGrid& grid, StreamKey key) {
  grid.validate();
  Bessel3Path path(TimeGrid::log_spaced(grid.s_min, grid.s_max, grid.points), 0.0, key);
  return minimize_zeta(path, grid);
}

namespace {

struct FunctionPath {
  std::vector<double> t, y;
  const std::function<double(double)>* f;

  std::span<const double> times() const { return t; }
  std::span<const double> values() const { return y; }
  std::size_t insert(double s) {
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    const auto i = it - t.begin();
    t.insert(it, s);
    y.insert(y.begin() + i, (*f)(s));
    return static_cast<std::size_t>(i);
  }
};

}  // namespace

ZetaSample zeta_of_function(const std::function<double(double)>& path, const ZetaGrid& grid) {
  grid.validate();
  const TimeGrid g = TimeGrid::log_spaced(grid.s_min, grid.s_max, grid.points);
  FunctionPath fp{{g.times().begin(), g.times().end()}, {}, &path};
  for (double s : fp.t) fp.y.push_back(path(s));
  return minimize_zeta(fp, grid);
}

double GammaEstimate::truncated_first_moment(double y) const {
  double sum = 0.0;
  for (double x : x_samples) {
    if (x > y) break;
    sum += x;
  }
  return w * sum / static_cast<double>(n_samples);
}

GammaEstimate gamma_from_samples(double w, std::vector<double> x_samples,
                                 const std::vector<double>& y_grid) {
  if (x_samples.empty()) throw std::invalid_argument("gamma_tail: no samples");
  for (std::size_t i = 0; i < y_grid.size(); ++i) {
    if (!(y_grid[i] > 0.0) || (i > 0 && !(y_grid[i] > y_grid[i - 1]))) {
      throw std::invalid_argument("gamma_tail: y_grid must be positive and ascending");
    }
  }
  std::sort(x_samples.begin(), x_samples.end());
  GammaEstimate out;
  out.w = w;
  out.y_grid = y_grid;
  out.n_samples = x_samples.size();
  const double n = static_cast<double>(x_samples.size());
  for (double y : y_grid) {
    const auto above = x_samples.end() - std::upper_bound(x_samples.begin(), x_samples.end(), y);
    const double p = static_cast<double>(above) / n;
    out.tail.push_back(w * p);
    out.std_error.push_back(w * std::sqrt(p * (1.0 - p) / n));
  }
  double sum = 0.0, sum_sq = 0.0;
  for (double x : x_samples) {
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = n > 1 ? std::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1) : 0.0;
  out.c_star = w * mean;
  out.c_star_std_error = w * std::sqrt(var / n);
  out.x_samples = std::move(x_samples);
  return out;
}

GammaEstimate gamma_tail(double w, std::size_t n, const std::vector<double>& y_grid,
                         const ClusterConfig& config, StreamKey key) {
  if (n < 1000) throw std::invalid_argument("gamma_tail: n must be >= 1000");
  std::vector<double> xs;
  xs.reserve(n);
  ClusterDiagnostics worst;
  for (std::size_t i = 0; i < n; ++i) {
    const ClusterRun run = run_cluster(w, config, derive(key, i), nullptr);
    xs.push_back(x_statistic(run.mass, w));
    if (run.diagnostics.truncation_bound >= worst.truncation_bound) worst = run.diagnostics;
    worst.regime_warnings = std::max(worst.regime_warnings, run.diagnostics.regime_warnings);
  }
  GammaEstimate out = gamma_from_samples(w, std::move(xs), y_grid);
  out.worst = worst;
  return out;
}

}  // namespace bbmx
