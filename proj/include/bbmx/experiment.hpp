#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bbmx/cluster.hpp"
#include "bbmx/stats.hpp"
#include "bbmx/table.hpp"

namespace bbmx {

inline constexpr const char* kToolVersion = "0.1.0";

const std::vector<std::string>& experiment_names();

struct ExperimentConfig {
  std::string experiment;
  std::map<std::string, std::string> params;
  std::uint64_t seed = 0;
  std::size_t replicas = 1;
  std::string out_dir = "out";
  std::size_t workers = 0;  // 0: BBMX_WORKERS, else 1

  bool has(const std::string& key) const { return params.count(key) != 0; }
  double real(const std::string& key, std::optional<double> fallback = std::nullopt) const;
  std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) const;
  bool flag(const std::string& key, bool fallback) const;
  std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt) const;
  std::vector<double> reals(const std::string& key, std::vector<double> fallback) const;

  // Throws on unknown experiment, replicas = 0, unknown or missing parameters.
  void validate() const;
  // Sorted "key=value" lines over experiment, seed, replicas and parameters.
  // The output directory and the worker budget are excluded.
  std::string canonical() const;
  // FNV-1a 64 of canonical(), as 16 hex digits.
  std::string hash() const;
};

// Flat key=value lines; '#' starts a comment; blank lines ignored. The keys
// experiment, seed, replicas, out and workers fill the dedicated fields.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

struct RunRecord {
  std::string experiment;
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::string started;
  std::string finished;
  std::uint64_t seed = 0;
  std::size_t replicas = 0;
  std::vector<DataTable> tables;  // tables[0] holds the per-replica summary rows
  std::string primary_column;     // column used by histogram / ecdf / tail plots
  std::string scatter_x;
  std::string scatter_y;
  std::vector<std::string> diagnostics;
  std::vector<ComparisonReport> reports;
  bool pass = true;
  std::vector<std::string> files;

  FileHeader header() const { return {tool_version, config_hash, seed, experiment}; }
};

// Computes the record without touching the filesystem.
RunRecord execute(const ExperimentConfig& config);
// Writes one CSV per table plus <experiment>_record.jsonl into config.out_dir.
void write_record(RunRecord& record, const std::string& out_dir);
RunRecord run(const ExperimentConfig& config);

enum class PlotKind { histogram, ecdf, tail, scatter };
PlotKind parse_plot_kind(const std::string& name);
std::string to_string(PlotKind kind);

// Histogram: Sturges rule, ceil(log2 n) + 1 equal-width bins on [min, max];
// y is the fraction of samples in the bin. A constant sample gives one bin.
DataTable histogram_table(std::vector<double> data);
// One row per distinct value: (x, fraction of samples <= x).
DataTable ecdf_table(std::vector<double> data);
// One row per order statistic: (x_(i), log of the fraction of samples >= x_(i)).
DataTable tail_table(std::vector<double> data);
DataTable scatter_table(const std::vector<double>& x, const std::vector<double>& y);

// Writes <experiment>_plot_<kind>.csv into `dir` and returns its path.
std::string emit_plot_data(const RunRecord& record, PlotKind kind, const std::string& dir);

// Z bank and cluster configuration shared by the cluster experiments.
struct BankSpec {
  std::string path;        // load from CSV when non-empty
  double t = 12.0;         // otherwise simulate `runs` pruned BBMs at time t
  std::size_t runs = 1000;
  std::optional<double> c0;  // calibrated from the simulated runs when absent
};

struct ClusterSetup {
  ZBank bank;
  ClusterConfig config;
  bool c0_calibrated = false;
  double c0_std_error = 0.0;
  std::vector<std::string> diagnostics;
};

ClusterSetup make_cluster_setup(const BankSpec& spec, ClusterMode mode, StreamKey key,
                                std::size_t workers);
// Bank and calibrated c0 from already simulated runs.
ClusterSetup cluster_setup_from_build(const BankBuild& build, std::uint64_t seed, ClusterMode mode);
// Runs `n` pruned simulations at time t (run k uses derive(key, k)) with level
// counts at v = 0.7 sqrt(t); the parallel counterpart of simulate_bank_runs.
BankBuild parallel_bank_runs(double t, std::size_t n, StreamKey key, std::size_t workers);

}  // namespace bbmx
