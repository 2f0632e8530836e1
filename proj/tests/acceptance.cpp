#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "bbmx/parallel.hpp"
#include "bbmx/table.hpp"
#include "bbmx/verify.hpp"

int main(int argc, char** argv) {
  bbmx::VerifyOptions options;
  options.workers = bbmx::resolve_workers(0);
  options.scratch_dir = (std::filesystem::temp_directory_path() / "bbmx_acceptance").string();
  int first = 1, last = bbmx::kCriterionCount;
  if (argc == 2) first = last = std::atoi(argv[1]);
  int failed = 0;
  for (int id = first; id <= last; ++id) {
    try {
      const bbmx::CriterionResult r = bbmx::run_criterion(id, options);
      std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << "C" << id << " " << r.title << " ("
                << bbmx::format_number(r.seconds) << " s)\n";
      for (const auto& rep : r.reports) {
        std::cout << "    " << (rep.pass ? "ok   " : "fail ") << rep.statistic << " = "
                  << bbmx::format_number(rep.value) << " threshold " << bbmx::format_number(rep.threshold);
        if (!rep.detail.empty()) std::cout << " (" << rep.detail << ")";
        std::cout << '\n';
      }
      for (const auto& note : r.notes) std::cout << "    note: " << note << '\n';
      if (!r.pass) ++failed;
    } catch (const std::exception& e) {
      std::cout << "[FAIL] C" << id << " " << bbmx::criterion_title(id) << " (error: " << e.what() << ")\n";
      ++failed;
    }
    std::cout.flush();
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << '\n';
  return failed == 0 ? 0 : 1;
}
