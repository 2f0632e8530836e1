#include "bbmx/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bbmx/bbm.hpp"
#include "bbmx/extremal.hpp"
#include "bbmx/parallel.hpp"
#include "bbmx/verify.hpp"
#include "json.hpp"

namespace bbmx {

namespace fs = std::filesystem;

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "simulate-bbm", "sample-cluster", "sample-stable", "sample-zeta",
      "estimate-gamma", "compensated-mass", "verify-suite"};
  return names;
}

namespace {

// Aux streams live far above any replica index.
constexpr std::uint64_t kBankStream = 0xB000000000000001ull;
constexpr std::uint64_t kCompensatorStream = 0xB000000000000002ull;

const std::vector<std::string> kClusterKeys = {"mode", "horizon", "s_cut", "y0", "z_bank",
                                               "bank_t", "bank_runs", "c0"};

struct ParamSpec {
  std::vector<std::string> required;
  std::vector<std::string> optional;
};

const ParamSpec& param_spec(const std::string& experiment) {
  static const std::map<std::string, ParamSpec> specs = [] {
    std::map<std::string, ParamSpec> m;
    m["simulate-bbm"] = {{"t"}, {"prune", "v", "c_diamond", "genealogy", "population_cap"}};
    m["sample-cluster"] = {{"v"}, kClusterKeys};
    m["sample-stable"] = {{}, {"t", "rho", "z_min", "z_max"}};
    m["sample-zeta"] = {{}, {"s_min", "s_max", "points", "rounds", "refine_points"}};
    m["estimate-gamma"] = {{"w"}, kClusterKeys};
    m["estimate-gamma"].optional.push_back("y_grid");
    m["compensated-mass"] = {{"u"}, kClusterKeys};
    for (const char* k : {"x_minus", "x_plus", "rho", "n_comp"}) {
      m["compensated-mass"].optional.push_back(k);
    }
    m["verify-suite"] = {{}, {"criteria", "scratch_dir"}};
    return m;
  }();
  const auto it = specs.find(experiment);
  if (it == specs.end()) throw std::invalid_argument("unknown experiment '" + experiment + "'");
  return it->second;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& text) {
  double x = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("parameter " + key + ": '" + text + "' is not a number");
  }
  return x;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t x = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument(key + ": '" + text + "' is not a non-negative integer");
  }
  return x;
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

double ExperimentConfig::real(const std::string& key, std::optional<double> fallback) const {
  const auto it = params.find(key);
  if (it == params.end()) {
    if (!fallback) throw std::invalid_argument("missing parameter " + key);
    return *fallback;
  }
  return parse_real(key, it->second);
}

std::int64_t ExperimentConfig::integer(const std::string& key,
                                       std::optional<std::int64_t> fallback) const {
  const auto it = params.find(key);
  if (it == params.end()) {
    if (!fallback) throw std::invalid_argument("missing parameter " + key);
    return *fallback;
  }
  std::int64_t x = 0;
  const std::string& text = it->second;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("parameter " + key + ": '" + text + "' is not an integer");
  }
  return x;
}

bool ExperimentConfig::flag(const std::string& key, bool fallback) const {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("parameter " + key + ": '" + v + "' is not a flag");
}

std::string ExperimentConfig::text(const std::string& key, std::optional<std::string> fallback) const {
  const auto it = params.find(key);
  if (it == params.end()) {
    if (!fallback) throw std::invalid_argument("missing parameter " + key);
    return *fallback;
  }
  return it->second;
}

std::vector<double> ExperimentConfig::reals(const std::string& key, std::vector<double> fallback) const {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty()) throw std::invalid_argument("parameter " + key + " is an empty list");
  return out;
}

void ExperimentConfig::validate() const {
  const ParamSpec& spec = param_spec(experiment);
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
  for (const auto& key : spec.required) {
    if (!has(key)) throw std::invalid_argument(experiment + ": missing required parameter " + key);
  }
  for (const auto& [key, value] : params) {
    const bool known =
        std::find(spec.required.begin(), spec.required.end(), key) != spec.required.end() ||
        std::find(spec.optional.begin(), spec.optional.end(), key) != spec.optional.end();
    if (!known) throw std::invalid_argument(experiment + ": unknown parameter " + key);
  }
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> all(params);
  all["experiment"] = experiment;
  all["seed"] = std::to_string(seed);
  all["replicas"] = std::to_string(replicas);
  std::string out;
  for (const auto& [k, v] : all) out += k + "=" + v + "\n";
  return out;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    if (key == "experiment") {
      config.experiment = value;
    } else if (key == "seed") {
      config.seed = parse_unsigned("seed", value);
    } else if (key == "replicas") {
      config.replicas = parse_unsigned("replicas", value);
    } else if (key == "out") {
      config.out_dir = value;
    } else if (key == "workers") {
      config.workers = parse_unsigned("workers", value);
    } else {
      if (config.params.count(key)) {
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": duplicate key " + key);
      }
      config.params[key] = value;
    }
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  return parse_config(in);
}

BankBuild parallel_bank_runs(double t, std::size_t n, StreamKey key, std::size_t workers) {
  if (n < 2) throw std::invalid_argument("bank_runs must be >= 2");
  PruneConfig prune;
  prune.enabled = true;
  BankBuild build;
  build.t = t;
  build.v = 0.7 * std::sqrt(t);
  build.runs = parallel_map(n, workers, [&](std::size_t k) { return bank_run(t, build.v, prune, derive(key, k)); });
  return build;
}

ClusterSetup cluster_setup_from_build(const BankBuild& build, std::uint64_t seed, ClusterMode mode) {
  ClusterSetup setup;
  std::vector<double> z;
  for (const BankRun& r : build.runs) z.push_back(r.z);
  setup.bank = ZBank(z, {build.t, seed, 1.0, 1.0});
  setup.diagnostics.push_back("z_bank simulated: t=" + format_number(build.t) + " runs=" +
                              std::to_string(build.runs.size()) + " kept=" + std::to_string(setup.bank.size()));
  const C0Calibration cal = calibrate_c0(build, setup.bank.provenance().scale);
  setup.config.c0 = cal.c0;
  setup.c0_std_error = cal.std_error;
  setup.c0_calibrated = true;
  setup.diagnostics.push_back("c0 calibrated: " + format_number(cal.c0) + " +- " + format_number(cal.std_error) +
                              " from " + std::to_string(cal.n_used) + " runs at v=" + format_number(build.v));
  setup.config.mode = mode;
  setup.config.z_source = setup.bank.source();
  setup.config.z_mean = 1.0;
  return setup;
}

ClusterSetup make_cluster_setup(const BankSpec& spec, ClusterMode mode, StreamKey key,
                                std::size_t workers) {
  if (spec.path.empty()) {
    ClusterSetup setup = cluster_setup_from_build(parallel_bank_runs(spec.t, spec.runs, key, workers), key.seed, mode);
    if (spec.c0) {
      setup.config.c0 = *spec.c0;
      setup.c0_calibrated = false;
      setup.diagnostics.push_back("c0 overridden: " + format_number(*spec.c0));
    }
    return setup;
  }
  ClusterSetup setup;
  std::ifstream in(spec.path);
  if (!in) throw std::runtime_error("cannot read Z bank " + spec.path);
  setup.bank = ZBank::read_csv(in);
  setup.diagnostics.push_back("z_bank loaded from " + spec.path);
  setup.config.c0 = spec.c0.value_or(1.0);
  setup.config.mode = mode;
  setup.config.z_source = setup.bank.source();
  setup.config.z_mean = 1.0;
  return setup;
}

namespace {

ClusterSetup cluster_setup_from(const ExperimentConfig& config, std::size_t workers) {
  BankSpec spec;
  spec.path = config.text("z_bank", "");
  spec.t = config.real("bank_t", 12.0);
  spec.runs = static_cast<std::size_t>(config.integer("bank_runs", 1000));
  if (config.has("c0")) spec.c0 = config.real("c0");
  const ClusterMode mode = parse_cluster_mode(config.text("mode", "surrogate"));
  ClusterSetup setup = make_cluster_setup(spec, mode, StreamKey{config.seed, kBankStream}, workers);
  setup.config.horizon = config.real("horizon", 0.0);
  setup.config.s_cut = config.real("s_cut", 10.0);
  setup.config.y0 = config.real("y0", 0.0);
  return setup;
}

void run_simulate_bbm(const ExperimentConfig& config, std::size_t workers, RunRecord& record) {
  const double t = config.real("t");
  const double v = config.real("v", 1.0);
  const double c_diamond = config.real("c_diamond", 1.0);
  const bool genealogy = config.flag("genealogy", false);
  PruneConfig prune;
  prune.enabled = config.flag("prune", false);
  SimulateOptions options;
  options.record_genealogy = genealogy;
  options.population_cap = static_cast<std::size_t>(config.integer("population_cap", 50'000'000));

  struct Out {
    std::vector<double> row;
    std::vector<std::vector<double>> nodes;
  };
  auto results = parallel_map(config.replicas, workers, [&](std::size_t r) {
    const ParticleSystem sys = simulate(t, prune, StreamKey{config.seed, r}, options);
    Out out;
    const bool certified = v <= certified_level_depth(sys);
    out.row = {static_cast<double>(r),
               static_cast<double>(sys.population()),
               sys.max_height(),
               centered_max(sys),
               derivative_martingale(sys, c_diamond),
               certified ? static_cast<double>(level_set_count(sys, v)) : std::nan(""),
               static_cast<double>(sys.prune_log().pruned_count),
               sys.prune_log().prune_bias_bound};
    if (genealogy) {
      for (const GenealogyNode& n : sys.nodes()) {
        out.nodes.push_back({static_cast<double>(r), static_cast<double>(n.id),
                             static_cast<double>(n.parent), n.birth_time, n.end_time,
                             n.height_at_end});
      }
    }
    return out;
  });
  DataTable summary{"summary",
                    {"replica", "population", "max_height", "centered_max", "z", "level_count",
                     "pruned", "prune_bias_bound"},
                    {}};
  DataTable nodes{"genealogy", {"replica", "id", "parent", "birth_time", "end_time", "height_at_end"}, {}};
  double worst_bound = 0.0;
  for (auto& out : results) {
    worst_bound = std::max(worst_bound, out.row.back());
    summary.add_row(std::move(out.row));
    for (auto& n : out.nodes) nodes.add_row(std::move(n));
  }
  record.tables.push_back(std::move(summary));
  if (genealogy) record.tables.push_back(std::move(nodes));
  record.primary_column = "centered_max";
  record.scatter_x = "z";
  record.scatter_y = "level_count";
  if (prune.enabled) record.diagnostics.push_back("max prune_bias_bound " + format_number(worst_bound));
}

void run_sample_cluster(const ExperimentConfig& config, std::size_t workers, RunRecord& record) {
  const double v = config.real("v");
  const ClusterSetup setup = cluster_setup_from(config, workers);
  record.diagnostics.insert(record.diagnostics.end(), setup.diagnostics.begin(), setup.diagnostics.end());
  auto samples = parallel_map(config.replicas, workers, [&](std::size_t r) {
    return sample_cluster(v, setup.config, StreamKey{config.seed, r});
  });
  DataTable table{"summary",
                  {"replica", "mass", "x", "log_scaled", "events", "truncation_bound",
                   "regime_warnings", "exact_events"},
                  {}};
  double worst = 0.0;
  std::size_t warnings = 0;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const ClusterSample& s = samples[r];
    const double log_scaled =
        s.mass > 0.0 ? (std::log(s.mass) - kSqrt2 * v) / std::pow(v, 2.0 / 3.0) : -kInf;
    table.add_row({static_cast<double>(r), s.mass, x_statistic(s), log_scaled,
                   static_cast<double>(s.timestamps.events.size()), s.diagnostics.truncation_bound,
                   static_cast<double>(s.diagnostics.regime_warnings),
                   static_cast<double>(s.diagnostics.exact_events)});
    worst = std::max(worst, s.diagnostics.truncation_bound);
    warnings += s.diagnostics.regime_warnings;
  }
  record.tables.push_back(std::move(table));
  record.primary_column = "log_scaled";
  record.scatter_x = "events";
  record.scatter_y = "log_scaled";
  record.diagnostics.push_back("horizon " + format_number(samples.front().diagnostics.horizon) +
                               " mode " + to_string(setup.config.mode));
  record.diagnostics.push_back("max truncation_bound " + format_number(worst));
  record.diagnostics.push_back("regime_warnings " + std::to_string(warnings));
}

void run_sample_stable(const ExperimentConfig& config, std::size_t workers, RunRecord& record) {
  StableSamplerConfig sc;
  sc.t = config.real("t", sc.t);
  sc.rho = config.real("rho", sc.rho);
  sc.z_min = config.real("z_min", sc.z_min);
  sc.z_max = config.real("z_max", sc.z_max);
  sc.validate();
  auto values = parallel_map(config.replicas, workers, [&](std::size_t r) {
    return stable1_sample(sc, StreamKey{config.seed, r});
  });
  DataTable table{"summary", {"replica", "sample"}, {}};
  for (std::size_t r = 0; r < values.size(); ++r) table.add_row({static_cast<double>(r), values[r]});
  record.tables.push_back(std::move(table));
  record.primary_column = "sample";
  record.scatter_x = "replica";
  record.scatter_y = "sample";
  for (double lambda : {0.5, 1.0, 2.0}) {
    record.diagnostics.push_back("truncation_bound lambda=" + format_number(lambda) + " " +
                                 format_number(stable1_truncation_bound(sc, lambda)));
  }
}

void run_sample_zeta(const ExperimentConfig& config, std::size_t workers, RunRecord& record) {
  ZetaGrid grid;
  grid.s_min = config.real("s_min", grid.s_min);
  grid.s_max = config.real("s_max", grid.s_max);
  grid.points = static_cast<std::size_t>(config.integer("points", static_cast<std::int64_t>(grid.points)));
  grid.rounds = static_cast<std::size_t>(config.integer("rounds", static_cast<std::int64_t>(grid.rounds)));
  grid.refine_points = static_cast<std::size_t>(
      config.integer("refine_points", static_cast<std::int64_t>(grid.refine_points)));
  grid.validate();
  auto samples = parallel_map(config.replicas, workers, [&](std::size_t r) {
    return zeta_sample(grid, StreamKey{config.seed, r});
  });
  DataTable table{"summary", {"replica", "zeta", "argmin_s", "zeta_previous_round"}, {}};
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const auto& rv = samples[r].round_values;
    const double prev = rv.size() >= 2 ? rv[rv.size() - 2] : rv.back();
    table.add_row({static_cast<double>(r), samples[r].value, samples[r].argmin_s, prev});
  }
  record.tables.push_back(std::move(table));
  record.primary_column = "zeta";
  record.scatter_x = "argmin_s";
  record.scatter_y = "zeta";
}

void run_estimate_gamma(const ExperimentConfig& config, std::size_t workers, RunRecord& record) {
  const double w = config.real("w");
  const std::vector<double> y_grid = config.reals("y_grid", {0.5, 1.0, 2.0, 4.0});
  const ClusterSetup setup = cluster_setup_from(config, workers);
  record.diagnostics.insert(record.diagnostics.end(), setup.diagnostics.begin(), setup.diagnostics.end());
  auto samples = parallel_map(config.replicas, workers, [&](std::size_t r) {
    const ClusterSample s = sample_cluster(w, setup.config, StreamKey{config.seed, r});
    return std::pair{x_statistic(s), s.diagnostics.truncation_bound};
  });
  DataTable table{"summary", {"replica", "x", "truncation_bound"}, {}};
  std::vector<double> xs;
  double worst = 0.0;
  for (std::size_t r = 0; r < samples.size(); ++r) {
    table.add_row({static_cast<double>(r), samples[r].first, samples[r].second});
    xs.push_back(samples[r].first);
    worst = std::max(worst, samples[r].second);
  }
  const GammaEstimate est = gamma_from_samples(w, std::move(xs), y_grid);
  DataTable tail{"tail", {"y", "w_tail", "std_error"}, {}};
  for (std::size_t k = 0; k < y_grid.size(); ++k) tail.add_row({y_grid[k], est.tail[k], est.std_error[k]});
  DataTable cstar{"c_star", {"w", "c_star", "std_error", "n"}, {}};
  cstar.add_row({w, est.c_star, est.c_star_std_error, static_cast<double>(est.n_samples)});
  record.tables.push_back(std::move(table));
  record.tables.push_back(std::move(tail));
  record.tables.push_back(std::move(cstar));
  record.primary_column = "x";
  record.scatter_x = "x";
  record.scatter_y = "truncation_bound";
  record.diagnostics.push_back("max truncation_bound " + format_number(worst));
}

void run_compensated_mass(const ExperimentConfig& config, std::size_t workers, RunRecord& record) {
  const double u = config.real("u");
  const double x_minus = config.real("x_minus", -2.0);
  const double x_plus = config.real("x_plus", 2.0);
  const double rho = config.real("rho", 1.0);
  const auto n_comp = static_cast<std::size_t>(config.integer("n_comp", 100000));
  const ClusterSetup setup = cluster_setup_from(config, workers);
  record.diagnostics.insert(record.diagnostics.end(), setup.diagnostics.begin(), setup.diagnostics.end());
  const ClusterConfig cc = setup.config;
  const MassSampler source = [cc](double w, StreamKey key) { return cluster_mass(w, cc, key); };
  const CompensatorEstimate comp = estimate_compensator(u, x_minus, x_plus, rho, source, n_comp,
                                                        StreamKey{config.seed, kCompensatorStream});
  auto values = parallel_map(config.replicas, workers, [&](std::size_t r) {
    return compensated_mass_statistic(u, x_minus, x_plus, comp, source, StreamKey{config.seed, r});
  });
  DataTable table{"summary", {"replica", "value", "raw", "n_tips"}, {}};
  for (std::size_t r = 0; r < values.size(); ++r) {
    table.add_row({static_cast<double>(r), values[r].value, values[r].raw,
                   static_cast<double>(values[r].n_tips)});
  }
  record.tables.push_back(std::move(table));
  record.primary_column = "value";
  record.scatter_x = "n_tips";
  record.scatter_y = "value";
  record.diagnostics.push_back("compensator " + format_number(comp.value) + " +- " +
                               format_number(comp.std_error) + " from " + std::to_string(n_comp) +
                               " draws");
  if (!values.empty()) {
    for (const auto& d : values.front().diagnostics) record.diagnostics.push_back(d);
  }
}

void run_verify_suite(const ExperimentConfig& config, std::size_t workers, RunRecord& record) {
  std::vector<double> ids;
  for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
  ids = config.reals("criteria", ids);
  VerifyOptions options;
  options.seed = config.seed;
  options.workers = workers;
  options.scratch_dir = config.text("scratch_dir", "");
  DataTable summary{"summary", {"criterion", "pass", "checks"}, {}};
  for (double idd : ids) {
    const int id = static_cast<int>(idd);
    if (id < 1 || id > kCriterionCount || id != idd) {
      throw std::invalid_argument("criteria: no criterion " + format_number(idd));
    }
    CriterionResult res = run_criterion(id, options);
    summary.add_row({static_cast<double>(id), res.pass ? 1.0 : 0.0,
                     static_cast<double>(res.reports.size())});
    for (auto& t : res.tables) {
      t.name = "c" + std::to_string(id) + "_" + t.name;
      record.tables.push_back(std::move(t));
    }
    for (auto& rep : res.reports) record.reports.push_back(std::move(rep));
    for (auto& n : res.notes) record.diagnostics.push_back("criterion " + std::to_string(id) + ": " + n);
    record.diagnostics.push_back("criterion " + std::to_string(id) + " " + (res.pass ? "PASS" : "FAIL") +
                                 " in " + format_number(std::round(res.seconds * 10) / 10) + " s");
    record.pass = record.pass && res.pass;
  }
  record.tables.insert(record.tables.begin(), std::move(summary));
  record.primary_column = "pass";
  record.scatter_x = "criterion";
  record.scatter_y = "pass";
}

}  // namespace

RunRecord execute(const ExperimentConfig& config) {
  config.validate();
  const std::size_t workers = resolve_workers(config.workers);
  RunRecord record;
  record.experiment = config.experiment;
  record.config_hash = config.hash();
  record.seed = config.seed;
  record.replicas = config.replicas;
  record.started = utc_now();
  const std::string& e = config.experiment;
  if (e == "simulate-bbm") run_simulate_bbm(config, workers, record);
  if (e == "sample-cluster") run_sample_cluster(config, workers, record);
  if (e == "sample-stable") run_sample_stable(config, workers, record);
  if (e == "sample-zeta") run_sample_zeta(config, workers, record);
  if (e == "estimate-gamma") run_estimate_gamma(config, workers, record);
  if (e == "compensated-mass") run_compensated_mass(config, workers, record);
  if (e == "verify-suite") run_verify_suite(config, workers, record);
  record.finished = utc_now();
  return record;
}

namespace {

nlohmann::json report_json(const ComparisonReport& r) {
  return {{"kind", "report"},   {"criterion", r.criterion}, {"statistic", r.statistic},
          {"value", r.value},   {"threshold", r.threshold}, {"pass", r.pass},
          {"n_a", r.n_a},       {"n_b", r.n_b},             {"std_error", r.std_error},
          {"detail", r.detail}};
}

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_record(RunRecord& record, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out_dir + ": " + ec.message());
  const FileHeader header = record.header();
  for (const DataTable& table : record.tables) {
    const fs::path path = fs::path(out_dir) / (record.experiment + "_" + table.name + ".csv");
    std::ofstream out = open_for_write(path);
    write_csv(table, header, out);
    if (!out) throw std::runtime_error("write failed for " + path.string());
    record.files.push_back(path.string());
  }
  const fs::path path = fs::path(out_dir) / (record.experiment + "_record.jsonl");
  std::ofstream out = open_for_write(path);
  const nlohmann::json head = {{"kind", "header"},
                               {"tool", "bbmx"},
                               {"tool_version", record.tool_version},
                               {"config_hash", record.config_hash},
                               {"seed", record.seed},
                               {"experiment", record.experiment}};
  out << head.dump() << '\n';
  const nlohmann::json body = {{"kind", "run"},
                               {"replicas", record.replicas},
                               {"started", record.started},
                               {"finished", record.finished},
                               {"pass", record.pass},
                               {"files", record.files},
                               {"diagnostics", record.diagnostics}};
  out << body.dump() << '\n';
  for (const auto& r : record.reports) out << report_json(r).dump() << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
  record.files.push_back(path.string());
}

RunRecord run(const ExperimentConfig& config) {
  RunRecord record = execute(config);
  write_record(record, config.out_dir);
  return record;
}

PlotKind parse_plot_kind(const std::string& name) {
  if (name == "histogram") return PlotKind::histogram;
  if (name == "ecdf") return PlotKind::ecdf;
  if (name == "tail") return PlotKind::tail;
  if (name == "scatter") return PlotKind::scatter;
  throw std::invalid_argument("unknown plot kind '" + name + "'");
}

std::string to_string(PlotKind kind) {
  switch (kind) {
    case PlotKind::histogram: return "histogram";
    case PlotKind::ecdf: return "ecdf";
    case PlotKind::tail: return "tail";
    case PlotKind::scatter: return "scatter";
  }
  return "?";
}

namespace {

std::vector<double> finite_sorted(std::vector<double> data) {
  std::erase_if(data, [](double x) { return !std::isfinite(x); });
  if (data.empty()) throw std::invalid_argument("plot data: no finite values");
  std::sort(data.begin(), data.end());
  return data;
}

}  // namespace

DataTable histogram_table(std::vector<double> data) {
  data = finite_sorted(std::move(data));
  const double n = static_cast<double>(data.size());
  DataTable table{"histogram", {"x", "y", "stderr"}, {}};
  const double lo = data.front(), hi = data.back();
  if (lo == hi) {
    table.add_row({lo, 1.0, 0.0});
    return table;
  }
  const auto bins = static_cast<std::size_t>(std::ceil(std::log2(n))) + 1;
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<std::size_t> counts(bins, 0);
  for (double x : data) {
    const auto k = std::min(static_cast<std::size_t>((x - lo) / width), bins - 1);
    ++counts[k];
  }
  for (std::size_t k = 0; k < bins; ++k) {
    const double p = static_cast<double>(counts[k]) / n;
    table.add_row({lo + (static_cast<double>(k) + 0.5) * width, p, std::sqrt(p * (1.0 - p) / n)});
  }
  return table;
}

DataTable ecdf_table(std::vector<double> data) {
  data = finite_sorted(std::move(data));
  const double n = static_cast<double>(data.size());
  DataTable table{"ecdf", {"x", "y"}, {}};
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (i + 1 < data.size() && data[i + 1] == data[i]) continue;
    table.add_row({data[i], static_cast<double>(i + 1) / n});
  }
  return table;
}

DataTable tail_table(std::vector<double> data) {
  data = finite_sorted(std::move(data));
  const double n = static_cast<double>(data.size());
  DataTable table{"tail", {"x", "y", "stderr"}, {}};
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (i > 0 && data[i - 1] == data[i]) continue;
    const double s = static_cast<double>(data.size() - i) / n;
    table.add_row({data[i], std::log(s), std::sqrt((1.0 - s) / (n * s))});
  }
  return table;
}

DataTable scatter_table(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("scatter: column lengths differ");
  DataTable table{"scatter", {"x", "y"}, {}};
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(x[i]) && std::isfinite(y[i])) table.add_row({x[i], y[i]});
  }
  if (table.rows.empty()) throw std::invalid_argument("plot data: no finite pairs");
  return table;
}

std::string emit_plot_data(const RunRecord& record, PlotKind kind, const std::string& dir) {
  if (record.tables.empty() || record.tables.front().rows.empty()) {
    throw std::invalid_argument("emit_plot_data: empty record");
  }
  const DataTable& data = record.tables.front();
  DataTable table;
  switch (kind) {
    case PlotKind::histogram: table = histogram_table(data.column(record.primary_column)); break;
    case PlotKind::ecdf: table = ecdf_table(data.column(record.primary_column)); break;
    case PlotKind::tail: table = tail_table(data.column(record.primary_column)); break;
    case PlotKind::scatter:
      table = scatter_table(data.column(record.scatter_x), data.column(record.scatter_y));
      break;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
  const fs::path path = fs::path(dir) / (record.experiment + "_plot_" + to_string(kind) + ".csv");
  std::ofstream out = open_for_write(path);
  write_csv(table, record.header(), out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
  return path.string();
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BBMX_WORKERS")) {
    std::size_t n = 0;
    const std::string s = env;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), n);
    if (res.ec == std::errc() && res.ptr == s.data() + s.size() && n > 0) return n;
    throw std::invalid_argument("BBMX_WORKERS: '" + s + "' is not a positive integer");
  }
  return 1;
}

}  // namespace bbmx
