#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bbmx/bbm.hpp"
#include "bbmx/extremal.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bbmx;
using testing_support::moments;

namespace {

// Root 0 on [0, 1] splits into 1 and 2; node 2 splits at 2 into 3 and 4.
// Alive at t = 3: 1, 3, 4.
ParticleSystem small_tree(double h1, double h3, double h4) {
  std::vector<GenealogyNode> nodes = {
      {0, kNoParent, 0.0, 1.0, 0.2},
      {1, 0, 1.0, 3.0, h1},
      {2, 0, 1.0, 2.0, 0.1},
      {3, 2, 2.0, 3.0, h3},
      {4, 2, 2.0, 3.0, h4},
  };
  return ParticleSystem(3.0, PruneConfig{}, nodes, {1, 3, 4}, {h1, h3, h4}, PruneLog{});
}

SimulateOptions no_genealogy() {
  SimulateOptions o;
  o.record_genealogy = false;
  return o;
}

}  // namespace

TEST_CASE("simulate at t = 0 is one particle at the origin") {
  const ParticleSystem sys = simulate(0.0, PruneConfig{}, StreamKey{1, 0});
  CHECK(sys.population() == 1);
  CHECK(sys.heights()[0] == 0.0);
  CHECK(centered_max(sys) == 0.0);
  CHECK_THROWS_AS(simulate(-1.0, PruneConfig{}, StreamKey{1, 0}), std::invalid_argument);
}

TEST_CASE("many-to-one moments at t = 2") {
  const std::size_t n = 10000;
  std::vector<double> pop, sum_h;
  for (std::size_t i = 0; i < n; ++i) {
    const ParticleSystem sys = simulate(2.0, PruneConfig{}, StreamKey{2, i}, no_genealogy());
    pop.push_back(static_cast<double>(sys.population()));
    double s = 0.0;
    for (double h : sys.heights()) s += h;
    sum_h.push_back(s);
  }
  const auto mp = moments(pop);
  CHECK(std::abs(mp.mean - std::exp(2.0)) <= 3.0 * mp.se);
  const auto mh = moments(sum_h);
  CHECK(std::abs(mh.mean) <= 3.0 * mh.se);
}

TEST_CASE("derivative martingale") {
  SUBCASE("single particle at sqrt2 t contributes zero") {
    const double t = 2.0;
    const ParticleSystem sys(t, PruneConfig{}, {}, {0}, {kSqrt2 * t}, PruneLog{});
    CHECK(derivative_martingale(sys) == 0.0);
  }
  SUBCASE("empty alive set gives zero") {
    const ParticleSystem sys(1.0, PruneConfig{}, {}, {}, {}, PruneLog{});
    CHECK(derivative_martingale(sys) == 0.0);
  }
  SUBCASE("formula on a hand-built system") {
    const ParticleSystem sys = small_tree(1.0, 2.0, -1.0);
    const double t = 3.0;
    double expected = 0.0;
    for (double h : {1.0, 2.0, -1.0}) expected += (kSqrt2 * t - h) * std::exp(kSqrt2 * (h - kSqrt2 * t));
    CHECK(derivative_martingale(sys, 2.5) == doctest::Approx(2.5 * expected));
  }
  SUBCASE("mean zero at t = 3") {
    // E Z_t = e^t E[(sqrt2 t - B_t) e^{sqrt2 B_t - 2t}] = e^{-t} (sqrt2 t - sqrt2 t) e^{t} = 0
    const std::size_t n = 10000;
    std::vector<double> z;
    for (std::size_t i = 0; i < n; ++i) {
      z.push_back(derivative_martingale(simulate(3.0, PruneConfig{}, StreamKey{3, i}, no_genealogy())));
    }
    const auto m = moments(z);
    CHECK(std::abs(m.mean) <= 3.0 * m.se);
  }
}

TEST_CASE("centering and centered maximum") {
  CHECK(centering(0.0) == 0.0);
  CHECK(centering(1.0) == doctest::Approx(kSqrt2));
  CHECK(centering(std::exp(1.0)) == doctest::Approx(kSqrt2 * std::exp(1.0) - 1.0606601717798212));
  const ParticleSystem one(1.0, PruneConfig{}, {}, {0}, {0.0}, PruneLog{});
  CHECK(centered_max(one) == doctest::Approx(-1.41421).epsilon(1e-5));
  const ParticleSystem a = small_tree(0.3, 1.7, -0.4);
  const ParticleSystem b = small_tree(0.3 + 2.0, 1.7 + 2.0, -0.4 + 2.0);
  CHECK(centered_max(b) == doctest::Approx(centered_max(a) + 2.0));
  const ParticleSystem empty(1.0, PruneConfig{}, {}, {}, {}, PruneLog{});
  CHECK_THROWS_AS(centered_max(empty), std::invalid_argument);
}

TEST_CASE("level_set_count") {
  const ParticleSystem sys = simulate(4.0, PruneConfig{}, StreamKey{4, 0});
  CHECK(level_set_count(sys, std::numeric_limits<double>::infinity()) == sys.population());
  const double lowest = *std::min_element(sys.heights().begin(), sys.heights().end());
  CHECK(level_set_count(sys, centering(4.0) - lowest - 1e-9) == sys.population() - 1);
  const double highest = sys.max_height();
  CHECK(level_set_count(sys, centering(4.0) - highest - 0.1) == 0);
  PruneConfig prune;
  prune.enabled = true;
  const ParticleSystem pruned = simulate(4.0, prune, StreamKey{4, 0});
  const double depth = certified_level_depth(pruned);
  CHECK_THROWS_AS(level_set_count(pruned, depth + 0.1), std::invalid_argument);
  CHECK_NOTHROW(level_set_count(pruned, depth));
}

TEST_CASE("property: pruning keeps level sets within the certified depth") {
  // Pruned descendants above max_t - (window - margin) are possible but their
  // expected number is at most prune_bias_bound; compare the total deficit.
  PruneConfig prune;
  prune.enabled = true;
  double deficit = 0.0, bound = 0.0;
  testing_support::for_all(30, 17, [&](Rng&, std::size_t i) {
    const double t = 6.0 + static_cast<double>(i % 3);
    const ParticleSystem full = simulate(t, PruneConfig{}, StreamKey{5, i}, no_genealogy());
    const ParticleSystem cut = simulate(t, prune, StreamKey{5, i}, no_genealogy());
    REQUIRE(cut.population() <= full.population());
    REQUIRE(centered_max(cut) == centered_max(full));
    const double depth = certified_level_depth(cut);
    REQUIRE(depth == doctest::Approx(prune.window - prune.margin - centered_max(cut)));
    for (double v : {1.0, 3.0, depth}) {
      if (v > depth) continue;
      REQUIRE(level_set_count(cut, v) <= level_set_count(full, v));
    }
    deficit += static_cast<double>(level_set_count(full, depth) - level_set_count(cut, depth));
    bound += cut.prune_log().prune_bias_bound;
    REQUIRE_THROWS_AS(level_set_count(cut, depth + 0.5), std::invalid_argument);
  });
  CHECK(deficit <= bound);
  CHECK(certified_level_depth(simulate(2.0, PruneConfig{}, StreamKey{5, 0})) == kInf);
}

TEST_CASE("population cap raises a resource error") {
  SimulateOptions o;
  o.population_cap = 1000;
  CHECK_THROWS_AS(simulate(12.0, PruneConfig{}, StreamKey{6, 0}, o), ResourceError);
}

TEST_CASE("property: genealogy is consistent") {
  testing_support::for_all(10, 23, [](Rng&, std::size_t i) {
    const double t = 3.0;
    const ParticleSystem sys = simulate(t, PruneConfig{}, StreamKey{7, i});
    const auto& nodes = sys.nodes();
    REQUIRE(nodes[0].parent == kNoParent);
    for (const GenealogyNode& n : nodes) {
      REQUIRE(n.birth_time < n.end_time);
      if (n.parent != kNoParent) {
        REQUIRE(nodes[static_cast<std::size_t>(n.parent)].end_time == n.birth_time);
      }
    }
    for (NodeId id : sys.alive()) {
      REQUIRE(nodes[id].end_time == t);
      REQUIRE(nodes[id].height_at_end == sys.height_of(id));
      std::int64_t cur = id;
      double last = nodes[id].birth_time;
      while (nodes[static_cast<std::size_t>(cur)].parent != kNoParent) {
        cur = nodes[static_cast<std::size_t>(cur)].parent;
        REQUIRE(nodes[static_cast<std::size_t>(cur)].birth_time < last);
        last = nodes[static_cast<std::size_t>(cur)].birth_time;
      }
      REQUIRE(cur == 0);
    }
  });
}

TEST_CASE("genealogical distance") {
  const ParticleSystem sys = small_tree(0.0, 1.0, 2.0);
  CHECK(genealogical_distance(sys, 3, 3) == 0.0);
  CHECK(genealogical_distance(sys, 3, 4) == doctest::Approx(1.0));  // siblings born at 2, t = 3
  CHECK(genealogical_distance(sys, 1, 4) == doctest::Approx(2.0));
  CHECK(genealogical_distance(sys, 4, 1) == genealogical_distance(sys, 1, 4));
  CHECK_THROWS(genealogical_distance(sys, 0, 1));
  CHECK_THROWS(genealogical_distance(sys, 1, 99));
}

TEST_CASE("local maxima and clusters on a hand-built tree") {
  const ParticleSystem sys = small_tree(0.5, 1.0, 2.0);
  CHECK(local_maxima(sys, 5.0) == std::vector<NodeId>{4});
  CHECK(local_maxima(sys, 0.5) == std::vector<NodeId>{1, 3, 4});
  CHECK(local_maxima(sys, 1.5) == std::vector<NodeId>{1, 4});
  const DecoratedPointMeasure c = extract_clusters(sys, 1.5);
  REQUIRE(c.pairs().size() == 2);
  CHECK(c.pairs()[0].tip == doctest::Approx(2.0 - centering(3.0)));
  CHECK(testing_support::to_vector(c.pairs()[0].cluster.atoms()) == std::vector<double>{0.0, -1.0});
  CHECK(testing_support::to_vector(c.pairs()[1].cluster.atoms()) == std::vector<double>{0.0});
}

TEST_CASE("height ties keep the smallest id") {
  const ParticleSystem sys = small_tree(0.0, 1.0, 1.0);
  CHECK(local_maxima(sys, 1.5) == std::vector<NodeId>{1, 3});
}

TEST_CASE("property: local maxima and clusters on simulated systems") {
  testing_support::for_all(8, 31, [](Rng& rng, std::size_t i) {
    const double t = 4.0;
    const ParticleSystem sys = simulate(t, PruneConfig{}, StreamKey{8, i});
    const double r = 0.2 + 3.5 * rng.uniform();
    const auto maxima = local_maxima(sys, r);
    REQUIRE(std::is_sorted(maxima.begin(), maxima.end()));
    for (NodeId x : maxima) {
      for (NodeId y : sys.alive()) {
        if (genealogical_distance(sys, x, y) < r) REQUIRE(sys.height_of(x) >= sys.height_of(y));
      }
    }
    const DecoratedPointMeasure clusters = extract_clusters(sys, r);
    std::size_t total = 0;
    for (const auto& d : clusters.pairs()) {
      REQUIRE(d.cluster.top() == 0.0);
      REQUIRE(d.cluster.atoms().back() <= 0.0);
      total += d.cluster.mass();
    }
    REQUIRE(total == sys.population());
    REQUIRE(local_maxima(sys, t + 1.0).size() == 1);
    REQUIRE(local_maxima(sys, 1e-9).size() == sys.population());
  });
}

TEST_CASE("single-particle system has one cluster") {
  const ParticleSystem sys = simulate(0.0, PruneConfig{}, StreamKey{9, 0});
  const DecoratedPointMeasure c = extract_clusters(sys, 1.0);
  REQUIRE(c.pairs().size() == 1);
  CHECK(c.pairs()[0].tip == centered_max(sys));
  CHECK(testing_support::to_vector(c.pairs()[0].cluster.atoms()) == std::vector<double>{0.0});
}

TEST_CASE("conditioned_bbm") {
  SUBCASE("infinite ceiling accepts the first draw") {
    const auto c = conditioned_bbm(3.0, std::numeric_limits<double>::infinity(), StreamKey{10, 0});
    CHECK(c.attempts == 1);
  }
  SUBCASE("accepted systems respect the ceiling") {
    for (std::uint64_t k = 0; k < 20; ++k) {
      const auto c = conditioned_bbm(3.0, -0.5, StreamKey{11, k});
      REQUIRE(centered_max(c.system) <= -0.5);
    }
  }
  SUBCASE("acceptance rate matches the unconditioned probability") {
    const double s = 2.0, ceiling = -0.5;
    const std::size_t n = 20000;
    std::size_t below = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (centered_max(simulate(s, PruneConfig{}, StreamKey{12, i}, no_genealogy())) <= ceiling) ++below;
    }
    const double p = static_cast<double>(below) / n;
    std::size_t attempts = 0;
    const std::size_t accepted = 2000;
    for (std::size_t k = 0; k < accepted; ++k) attempts += conditioned_bbm(s, ceiling, StreamKey{13, k}).attempts;
    const double rate = static_cast<double>(accepted) / static_cast<double>(attempts);
    const double se = std::hypot(std::sqrt(p * (1 - p) / n), std::sqrt(rate * rate * (1 - rate) / accepted));
    CHECK(std::abs(rate - p) <= 4.0 * se);
  }
  SUBCASE("exhausted budget reports the acceptance estimate") {
    ConditionedOptions o;
    o.max_attempts = 10;
    try {
      conditioned_bbm(2.0, -40.0, StreamKey{14, 0}, o);
      FAIL("expected RejectionError");
    } catch (const RejectionError& e) {
      CHECK(e.attempts() == 10);
      CHECK(e.acceptance_upper() == doctest::Approx(0.3));
    }
  }
  SUBCASE("age beyond s_max_exact is rejected") {
    CHECK_THROWS_AS(conditioned_bbm(15.0, 0.0, StreamKey{15, 0}), std::invalid_argument);
  }
}

TEST_CASE("genealogy CSV export") {
  const ParticleSystem sys = small_tree(0.0, 1.0, 2.0);
  std::ostringstream out;
  write_genealogy_csv(sys, out);
  const std::string text = out.str();
  CHECK(text.rfind("id,parent,birth_time,end_time,height_at_end\n0,,0,1,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 6);
}
