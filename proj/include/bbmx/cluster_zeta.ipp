#pragma once

#include <algorithm>
#include <cmath>
#include <tuple>
#include <utility>

namespace bbmx {

template <class Path>
ZetaSample minimize_zeta(Path& path, const ZetaGrid& grid) {
  grid.validate();
  auto objective = [](double s, double y) { return kSqrt2 * y + 0.5 / s; };
  auto argmin = [&]() {
    const auto t = path.times();
    const auto y = path.values();
    std::size_t best = 0;
    double best_value = objective(t[0], y[0]);
    for (std::size_t i = 1; i < t.size(); ++i) {
      const double f = objective(t[i], y[i]);
      if (f < best_value) {
        best_value = f;
        best = i;
      }
    }
    return std::pair{best, best_value};
  };

  ZetaSample out;
  out.grid_spec = grid;
  auto [index, value] = argmin();
  out.round_values.push_back(value);
  for (std::size_t round = 0; round < grid.rounds; ++round) {
    const auto t = path.times();
    const double centre = t[index];
    const double left = index > 0 ? t[index - 1] : centre;
    const double right = index + 1 < t.size() ? t[index + 1] : centre;
    const double k = static_cast<double>(grid.refine_points + 1);
    for (std::size_t j = 1; j <= grid.refine_points; ++j) {
      const double f = static_cast<double>(j) / k;
      if (left < centre) path.insert(left + f * (centre - left));
      if (right > centre) path.insert(centre + f * (right - centre));
    }
    std::tie(index, value) = argmin();
    out.round_values.push_back(value);
  }
  out.value = value;
  out.argmin_s = path.times()[index];
  return out;
}

}  // namespace bbmx
