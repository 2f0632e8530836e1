#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "bbmx/bbm.hpp"
#include "bbmx/paths.hpp"
#include "bbmx/rng.hpp"

namespace bbmx {

struct TimestampProcess {
  std::vector<double> events;  // ascending, within [0, horizon]
  double horizon = 0.0;
};

// Homogeneous Poisson process of rate 2 on [0, horizon].
TimestampProcess sample_timestamps(double horizon, StreamKey key);

// Draws one (positive) derivative-martingale limit value.
using ZSource = std::function<double(Rng&)>;

// Empirical law of Z built from simulated BBM, rescaled so that the mean of
// the positive values is 1. Only positive values are kept.
class ZBank {
 public:
  struct Provenance {
    double t = 0.0;
    std::uint64_t seed = 0;
    double c_diamond = 1.0;
    double scale = 1.0;  // raw positive mean that was divided out
  };

  ZBank() = default;
  // Keeps the positive entries of `raw` and divides by their mean.
  ZBank(const std::vector<double>& raw, Provenance provenance);

  const std::vector<double>& values() const { return values_; }
  const Provenance& provenance() const { return provenance_; }
  std::size_t size() const { return values_.size(); }
  double draw(Rng& rng) const;
  ZSource source() const;

  void write_csv(std::ostream& out) const;
  static ZBank read_csv(std::istream& in);

 private:
  std::vector<double> values_;
  Provenance provenance_;
};

// One BBM run summarized for Z-bank construction and c0 calibration.
struct BankRun {
  double z = 0.0;             // derivative martingale Z_t (C_diamond applied)
  std::size_t level_count = 0;  // E_t([-v, inf))
  double centered_max = 0.0;
};

struct BankBuild {
  std::vector<BankRun> runs;
  double t = 0.0;
  double v = 0.0;  // level used for the counts
};

// One bank run. When the pruned system does not certify depth v, the run is
// repeated unpruned with the same key, which reproduces every kept particle.
BankRun bank_run(double t, double v, const PruneConfig& prune, StreamKey key, double c_diamond = 1.0);

// Runs `n` independent simulations at horizon t (run k uses derive(key, k)).
BankBuild simulate_bank_runs(double t, double v, std::size_t n, const PruneConfig& prune,
                             StreamKey key, double c_diamond = 1.0);

struct C0Calibration {
  double c0 = 0.0;
  double std_error = 0.0;
  std::size_t n_used = 0;
};

// Least squares through the origin of level_count against
// (Z / scale) * v * e^{sqrt2 v - v^2 / 2t} over runs with Z > 0.
C0Calibration calibrate_c0(const BankBuild& build, double scale);

enum class ClusterMode { exact, surrogate, hybrid };

std::string to_string(ClusterMode mode);
ClusterMode parse_cluster_mode(const std::string& name);

struct ClusterConfig {
  ClusterMode mode = ClusterMode::hybrid;
  double horizon = 0.0;  // 0 selects default_horizon(v)
  double s_cut = 10.0;   // hybrid: exact decorations at events s <= s_cut
  double y0 = 0.0;       // Bessel-3 start of the backbone
  double c0 = 1.0;       // surrogate prefactor
  double z_mean = 1.0;   // E Z under z_source, used in the truncation bound
  ZSource z_source;      // required in surrogate/hybrid modes
  ConditionedOptions exact{};
};

// max(4 v^{4/3}, 100)
double default_horizon(double v);

struct ClusterDiagnostics {
  double s_cut = 0.0;
  double horizon = 0.0;
  // Sum of surrogate means along the backbone continued past the horizon.
  double truncation_bound = 0.0;
  std::size_t regime_warnings = 0;  // surrogate events with v + W > 0.9 sqrt2 s
  std::size_t exact_events = 0;
  std::size_t exact_attempts = 0;
};

struct ClusterSample {
  ClusterMode mode = ClusterMode::hybrid;
  double v = 0.0;
  double mass = 0.0;  // C([-v, 0])
  SamplePath backbone;  // at time 0 and at every timestamp
  TimestampProcess timestamps;
  std::vector<double> contributions;  // one per timestamp
  ClusterDiagnostics diagnostics;
};

// C([-v, 0]) from the strong representation: backbone W = -Y - c log+ s,
// rate-2 timestamps, and per-timestamp decorations (exact conditioned BBM or
// the surrogate c0 Z a e^{sqrt2 a - a^2 / 2s} with a = v + W_s).
ClusterSample sample_cluster(double v, const ClusterConfig& config, StreamKey key);

// Same draw as sample_cluster(v, config, key).mass without keeping the path.
double cluster_mass(double v, const ClusterConfig& config, StreamKey key);

// X(w) = C([-w, 0]) / (w e^{sqrt2 w})
double x_statistic(const ClusterSample& sample);
double x_statistic(double mass, double w);

struct ZetaGrid {
  double s_min = 1e-4;
  double s_max = 1e4;
  std::size_t points = 256;
  std::size_t rounds = 6;
  std::size_t refine_points = 8;  // inserted on each side of the argmin per round

  void validate() const;
};

struct ZetaSample {
  double value = 0.0;
  double argmin_s = 0.0;
  ZetaGrid grid_spec;
  std::vector<double> round_values;  // estimate after the initial grid and each round
};

// Minimizes sqrt2 * path(s) + 1 / (2s) over a log grid, then zooms into the
// argmin. `insert(s)` must add a path value at a new time and return it.
template <class Path>
ZetaSample minimize_zeta(Path& path, const ZetaGrid& grid);

// zeta = inf_s sqrt2 Y_s + 1/(2s) for a Bessel-3 Y from 0; returns the grid
// infimum, an upper bound for zeta on the sampled path.
ZetaSample zeta_sample(const ZetaGrid& grid, StreamKey key);

// Zeta functional of a deterministic path given as a function of s.
ZetaSample zeta_of_function(const std::function<double(double)>& path, const ZetaGrid& grid);

struct GammaEstimate {
  double w = 0.0;
  std::vector<double> y_grid;
  std::vector<double> tail;  // w * P(X(w) > y)
  std::vector<double> std_error;
  std::size_t n_samples = 0;
  double c_star = 0.0;  // w * mean X(w)
  double c_star_std_error = 0.0;
  std::vector<double> x_samples;  // ascending
  ClusterDiagnostics worst;       // largest truncation bound observed

  // w * E(X; X <= y) from the stored samples.
  double truncated_first_moment(double y) const;
};

GammaEstimate gamma_tail(double w, std::size_t n, const std::vector<double>& y_grid,
                         const ClusterConfig& config, StreamKey key);

// Tail estimate from precomputed X(w) samples.
GammaEstimate gamma_from_samples(double w, std::vector<double> x_samples,
                                 const std::vector<double>& y_grid);

}  // namespace bbmx

#include "bbmx/cluster_zeta.ipp"
