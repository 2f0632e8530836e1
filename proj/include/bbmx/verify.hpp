#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bbmx/stats.hpp"
#include "bbmx/table.hpp"

namespace bbmx {

inline constexpr int kCriterionCount = 12;

struct VerifyOptions {
  std::uint64_t seed = 20261016;
  std::size_t workers = 1;
  std::string scratch_dir;  // determinism reruns; a temp directory when empty
};

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  double seconds = 0.0;
  std::vector<ComparisonReport> reports;
  std::vector<DataTable> tables;
  std::vector<std::string> notes;
};

const std::string& criterion_title(int id);

// Runs acceptance criterion `id` (1..12) at its stated sample sizes.
CriterionResult run_criterion(int id, const VerifyOptions& options);

}  // namespace bbmx
