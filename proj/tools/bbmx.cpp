#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bbmx/experiment.hpp"
#include "bbmx/verify.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<std::string> out;
  std::optional<std::size_t> workers;
  std::vector<std::string> set;
  std::vector<std::string> plots;
};

bbmx::ExperimentConfig build_config(const std::string& experiment, const Flags& flags) {
  bbmx::ExperimentConfig config;
  if (!flags.config_path.empty()) config = bbmx::load_config(flags.config_path);
  if (!config.experiment.empty() && config.experiment != experiment) {
    throw std::invalid_argument("config file names experiment '" + config.experiment + "' but subcommand is '" +
                                experiment + "'");
  }
  config.experiment = experiment;
  if (flags.seed) config.seed = *flags.seed;
  if (flags.replicas) config.replicas = *flags.replicas;
  if (flags.out) config.out_dir = *flags.out;
  if (flags.workers) config.workers = *flags.workers;
  for (const std::string& kv : flags.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
    config.params[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return config;
}

int execute(const std::string& experiment, const Flags& flags) {
  const bbmx::ExperimentConfig config = build_config(experiment, flags);
  bbmx::RunRecord record = bbmx::run(config);
  for (const std::string& kind : flags.plots) {
    record.files.push_back(bbmx::emit_plot_data(record, bbmx::parse_plot_kind(kind), config.out_dir));
  }
  std::cout << experiment << " config_hash=" << record.config_hash << " seed=" << record.seed
            << " replicas=" << record.replicas << "\n";
  for (const std::string& d : record.diagnostics) std::cout << "  " << d << "\n";
  if (!record.reports.empty()) {
    for (const auto& r : record.reports) {
      std::cout << "  [" << (r.pass ? "PASS" : "FAIL") << "] " << r.criterion << " " << r.statistic << " = "
                << bbmx::format_number(r.value) << " (threshold " << bbmx::format_number(r.threshold) << ")\n";
    }
  }
  for (const std::string& f : record.files) std::cout << "  wrote " << f << "\n";
  return record.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo toolkit for the extremal process of branching Brownian motion"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("bbmx ") + bbmx::kToolVersion);

  Flags flags;
  std::string chosen;
  for (const std::string& name : bbmx::experiment_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", flags.config_path, "flat key=value configuration file");
    sub->add_option("--seed", flags.seed, "64-bit seed");
    sub->add_option("--replicas", flags.replicas, "number of replicas")->check(CLI::PositiveNumber);
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--workers", flags.workers, "worker threads (overrides BBMX_WORKERS)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--set", flags.set, "extra parameter key=value (repeatable)");
    sub->add_option("--plot", flags.plots, "emit plot data: histogram, ecdf, tail, scatter (repeatable)")
        ->check(CLI::IsMember({"histogram", "ecdf", "tail", "scatter"}));
    sub->callback([&chosen, name] { chosen = name; });
  }
  CLI11_PARSE(app, argc, argv);
  try {
    return execute(chosen, flags);
  } catch (const std::exception& e) {
    std::cerr << "bbmx " << chosen << ": error: " << e.what() << "\n";
    return 2;
  }
}
