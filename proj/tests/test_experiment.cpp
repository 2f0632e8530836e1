#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbmx/experiment.hpp"
#include "bbmx/parallel.hpp"
#include "doctest.h"

using namespace bbmx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bbmx_test_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig bbm_config(double t, std::size_t replicas) {
  ExperimentConfig c;
  c.experiment = "simulate-bbm";
  c.seed = 7;
  c.replicas = replicas;
  c.params["t"] = std::to_string(t);
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream in(
      "# comment\n"
      "experiment = sample-stable\n"
      "seed=12\n"
      "replicas=3   # trailing\n"
      "out=/tmp/x\n"
      "workers=2\n"
      "\n"
      "rho=2.5\n");
  const ExperimentConfig c = parse_config(in);
  CHECK(c.experiment == "sample-stable");
  CHECK(c.seed == 12);
  CHECK(c.replicas == 3);
  CHECK(c.out_dir == "/tmp/x");
  CHECK(c.workers == 2);
  CHECK(c.real("rho") == 2.5);
  CHECK(c.real("t", 1.0) == 1.0);
  CHECK_NOTHROW(c.validate());

  std::istringstream dup("a=1\na=2\n");
  CHECK_THROWS_AS(parse_config(dup), std::invalid_argument);
  std::istringstream no_eq("oops\n");
  CHECK_THROWS_AS(parse_config(no_eq), std::invalid_argument);
  std::istringstream bad_seed("seed=-1\n");
  CHECK_THROWS_AS(parse_config(bad_seed), std::invalid_argument);
  CHECK_THROWS(load_config("/nonexistent/bbmx.conf"));
}

TEST_CASE("config accessors") {
  ExperimentConfig c;
  c.params = {{"x", "abc"}, {"n", "4"}, {"f", "true"}, {"g", "0"}, {"list", "0.5, 1,2"}};
  CHECK_THROWS_AS(c.real("x"), std::invalid_argument);
  CHECK_THROWS_AS(c.real("missing"), std::invalid_argument);
  CHECK(c.integer("n") == 4);
  CHECK(c.flag("f", false));
  CHECK_FALSE(c.flag("g", true));
  CHECK_THROWS_AS(c.flag("x", true), std::invalid_argument);
  CHECK(c.reals("list", {}) == std::vector<double>{0.5, 1.0, 2.0});
  CHECK(c.reals("none", {3.0}) == std::vector<double>{3.0});
  CHECK(c.text("x") == "abc");
}

TEST_CASE("config validation") {
  ExperimentConfig c = bbm_config(1.0, 1);
  CHECK_NOTHROW(c.validate());
  c.params["bogus"] = "1";
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = bbm_config(1.0, 0);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = bbm_config(1.0, 1);
  c.params.erase("t");
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.experiment = "no-such";
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(experiment_names().size() == 7);
}

TEST_CASE("config hash ignores output directory and workers only") {
  ExperimentConfig a = bbm_config(2.0, 3);
  ExperimentConfig b = a;
  b.out_dir = "elsewhere";
  b.workers = 8;
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.seed = 8;
  CHECK(a.hash() != b.hash());
  b = a;
  b.params["v"] = "2";
  CHECK(a.hash() != b.hash());
  std::istringstream one("t=1\nv=2\nexperiment=simulate-bbm\n");
  std::istringstream two("v=2\nexperiment=simulate-bbm\nt=1\n");
  CHECK(parse_config(one).hash() == parse_config(two).hash());
}

TEST_CASE("simulate-bbm at t = 0") {
  const RunRecord r = execute(bbm_config(0.0, 1));
  REQUIRE(r.tables.size() == 1);
  const DataTable& s = r.tables[0];
  REQUIRE(s.rows.size() == 1);
  CHECK(s.column("population")[0] == 1.0);
  CHECK(s.column("max_height")[0] == 0.0);
}

TEST_CASE("runs are deterministic and independent of the worker count") {
  ExperimentConfig c = bbm_config(3.0, 6);
  c.params["genealogy"] = "true";
  const fs::path d1 = scratch("det1"), d2 = scratch("det2"), d3 = scratch("det3");
  c.out_dir = d1.string();
  c.workers = 1;
  run(c);
  c.out_dir = d2.string();
  run(c);
  c.out_dir = d3.string();
  c.workers = 3;
  run(c);
  for (const char* f : {"simulate-bbm_summary.csv", "simulate-bbm_genealogy.csv"}) {
    const std::string a = slurp((d1 / f).string());
    CHECK(!a.empty());
    CHECK(a == slurp((d2 / f).string()));
    CHECK(a == slurp((d3 / f).string()));
  }
}

TEST_CASE("CSV layout") {
  const fs::path dir = scratch("csv");
  ExperimentConfig c = bbm_config(1.0, 2);
  c.out_dir = dir.string();
  const RunRecord r = run(c);
  const std::string text = slurp((dir / "simulate-bbm_summary.csv").string());
  CHECK(text.find('\r') == std::string::npos);
  CHECK(text.back() == '\n');
  const std::string expected_head = "# tool=bbmx version=" + std::string(kToolVersion) +
                                    " experiment=simulate-bbm config_hash=" + c.hash() +
                                    " seed=7 table=summary\n"
                                    "replica,population,max_height,centered_max,z,level_count,pruned,prune_bias_bound\n";
  CHECK(text.rfind(expected_head, 0) == 0);
  const std::string record = slurp((dir / "simulate-bbm_record.jsonl").string());
  CHECK(record.find("\"config_hash\":\"" + c.hash() + "\"") != std::string::npos);
  CHECK(record.find("\"tool_version\":\"" + std::string(kToolVersion) + "\"") != std::string::npos);
  CHECK(r.files.size() == 2);
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-2.5e-300) == "-2.5e-300");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(-INFINITY) == "-inf");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("unwritable output directory") {
  const fs::path file = scratch("blocker");
  std::ofstream(file.string()) << "x";
  ExperimentConfig c = bbm_config(0.0, 1);
  c.out_dir = (file / "sub").string();
  CHECK_THROWS_AS(run(c), std::runtime_error);
}

TEST_CASE("plot tables") {
  SUBCASE("ecdf") {
    const DataTable t = ecdf_table({3.0, 1.0, 2.0});
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0] == std::vector<double>{1.0, 1.0 / 3.0});
    CHECK(t.rows[2] == std::vector<double>{3.0, 1.0});
    CHECK(ecdf_table({1.0, 1.0, 2.0}).rows.size() == 2);
  }
  SUBCASE("histogram") {
    const DataTable c = histogram_table({2.0, 2.0, 2.0});
    REQUIRE(c.rows.size() == 1);
    CHECK(c.rows[0] == std::vector<double>{2.0, 1.0, 0.0});
    std::vector<double> data;
    for (int i = 0; i < 100; ++i) data.push_back(i);
    const DataTable h = histogram_table(data);
    CHECK(h.rows.size() == 8);  // ceil(log2 100) + 1
    double total = 0.0;
    for (double y : h.column("y")) total += y;
    CHECK(total == doctest::Approx(1.0));
    CHECK_THROWS_AS(histogram_table({std::nan("")}), std::invalid_argument);
  }
  SUBCASE("tail slope of exponential data") {
    Rng rng(StreamKey{1, 0});
    std::vector<double> data(100000);
    for (double& x : data) x = rng.exponential(kSqrt2);
    const DataTable t = tail_table(data);
    CHECK(t.rows[0][1] == 0.0);
    // log survival at the order statistic nearest x = 2 is close to -2 sqrt2.
    const auto xs = t.column("x");
    const auto ys = t.column("y");
    const auto k = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), 2.0) - xs.begin());
    CHECK(ys[k] == doctest::Approx(-2.0 * kSqrt2).epsilon(0.03));
  }
  SUBCASE("scatter drops non-finite pairs") {
    const DataTable s = scatter_table({1.0, 2.0, 3.0}, {1.0, std::nan(""), 3.0});
    CHECK(s.rows.size() == 2);
    CHECK_THROWS_AS(scatter_table({1.0}, {}), std::invalid_argument);
  }
  SUBCASE("plot kinds") {
    for (const char* k : {"histogram", "ecdf", "tail", "scatter"}) CHECK(to_string(parse_plot_kind(k)) == k);
    CHECK_THROWS_AS(parse_plot_kind("pie"), std::invalid_argument);
  }
}

TEST_CASE("emit_plot_data") {
  RunRecord empty;
  empty.experiment = "simulate-bbm";
  CHECK_THROWS_AS(emit_plot_data(empty, PlotKind::ecdf, "/tmp"), std::invalid_argument);
  ExperimentConfig c = bbm_config(2.0, 5);
  const RunRecord r = execute(c);
  const fs::path dir = scratch("plots");
  for (PlotKind k : {PlotKind::histogram, PlotKind::ecdf, PlotKind::tail, PlotKind::scatter}) {
    const std::string path = emit_plot_data(r, k, dir.string());
    CHECK(path == (dir / ("simulate-bbm_plot_" + to_string(k) + ".csv")).string());
    CHECK(slurp(path).rfind("# tool=bbmx", 0) == 0);
  }
}

TEST_CASE("worker resolution") {
  ::unsetenv("BBMX_WORKERS");
  CHECK(resolve_workers(0) == 1);
  ::setenv("BBMX_WORKERS", "3", 1);
  CHECK(resolve_workers(0) == 3);
  CHECK(resolve_workers(2) == 2);
  ::setenv("BBMX_WORKERS", "zero", 1);
  CHECK_THROWS_AS(resolve_workers(0), std::invalid_argument);
  ::unsetenv("BBMX_WORKERS");
}

TEST_CASE("parallel_map") {
  const auto squares = parallel_map(100, 4, [](std::size_t i) { return i * i; });
  for (std::size_t i = 0; i < 100; ++i) REQUIRE(squares[i] == i * i);
  CHECK(parallel_map(0, 4, [](std::size_t i) { return i; }).empty());
  try {
    parallel_map(50, 3, [](std::size_t i) -> int {
      if (i == 7 || i == 30) throw std::runtime_error("boom " + std::to_string(i));
      return 0;
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "boom 7");
  }
}
