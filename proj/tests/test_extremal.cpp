#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "bbmx/extremal.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bbmx;
using testing_support::moments;

TEST_CASE("PointMeasure keeps atoms descending") {
  const PointMeasure p({1.0, 3.0, -2.0, 3.0});
  CHECK(std::vector<double>(p.atoms().begin(), p.atoms().end()) == std::vector<double>{3.0, 3.0, 1.0, -2.0});
  CHECK(p.top() == 3.0);
  CHECK(p.count(1.0) == 3);
  CHECK(p.count(-2.0, 1.0) == 2);
  CHECK(p.shifted(1.5).top() == 4.5);
  CHECK(PointMeasure().empty());
  CHECK_THROWS_AS(PointMeasure({std::nan("")}), std::invalid_argument);
}

TEST_CASE("DecoratedPointMeasure validation and flatten") {
  CHECK_THROWS_AS(DecoratedPointMeasure({{0.0, PointMeasure({0.5, 0.0})}}), std::invalid_argument);
  CHECK_THROWS_AS(DecoratedPointMeasure({{0.0, PointMeasure({-0.5})}}), std::invalid_argument);
  const DecoratedPointMeasure d({{-1.0, PointMeasure({0.0, -0.5})}, {2.0, PointMeasure({0.0})}});
  CHECK(d.pairs()[0].tip == 2.0);
  const PointMeasure flat = d.flatten();
  CHECK(std::vector<double>(flat.atoms().begin(), flat.atoms().end()) == std::vector<double>{2.0, -1.0, -1.5});
}

TEST_CASE("Window and exponential intensity mass") {
  CHECK_THROWS_AS(Window(1.0, 0.0), std::invalid_argument);
  CHECK(exp_ppp_mass(2.0, Window(0.0, kInf)) == doctest::Approx(2.0 / kSqrt2));
  CHECK(exp_ppp_mass(1.0, Window(-1.0, 1.0)) ==
        doctest::Approx((std::exp(kSqrt2) - std::exp(-kSqrt2)) / kSqrt2));
  CHECK(exp_ppp_mass(0.0, Window()) == 0.0);
  CHECK(exp_ppp_mass(1.0, Window()) == kInf);
  CHECK_THROWS_AS(exp_ppp_mass(-1.0, Window(0.0, 1.0)), std::invalid_argument);
  CHECK_THROWS_AS(sample_exp_ppp(1.0, Window(), StreamKey{1, 0}), std::invalid_argument);
  CHECK(sample_exp_ppp(0.0, Window(), StreamKey{1, 0}).empty());
}

TEST_CASE("exponential PPP counts and positions") {
  const double z = 3.0;
  const Window w(-0.5, 2.0);
  const double mass = exp_ppp_mass(z, w);
  const std::size_t n = 20000;
  std::vector<double> counts, above;
  for (std::size_t i = 0; i < n; ++i) {
    const PointMeasure p = sample_exp_ppp(z, w, StreamKey{2, i});
    for (double a : p.atoms()) REQUIRE(w.contains(a));
    counts.push_back(static_cast<double>(p.mass()));
    above.push_back(static_cast<double>(p.count(0.5)));
  }
  const auto mc = moments(counts);
  CHECK(std::abs(mc.mean - mass) <= 4.0 * mc.se);
  CHECK(std::abs(mc.var / mass - 1.0) < 0.05);
  const auto ma = moments(above);
  CHECK(std::abs(ma.mean - exp_ppp_mass(z, Window(0.5, 2.0))) <= 4.0 * ma.se);
}

TEST_CASE("property: superposition of exponential PPPs") {
  // PPP(Z1) + PPP(Z2) has the count law of PPP(Z1 + Z2).
  testing_support::for_all(5, 41, [](Rng& rng, std::size_t i) {
    const double z1 = 0.5 + 2.0 * rng.uniform();
    const double z2 = 0.5 + 2.0 * rng.uniform();
    const Window w(0.0, kInf);
    const std::size_t n = 5000;
    std::vector<double> sum, joint;
    for (std::size_t k = 0; k < n; ++k) {
      sum.push_back(static_cast<double>(sample_exp_ppp(z1, w, StreamKey{100 + i, 2 * k}).mass() +
                                        sample_exp_ppp(z2, w, StreamKey{100 + i, 2 * k + 1}).mass()));
      joint.push_back(static_cast<double>(sample_exp_ppp(z1 + z2, w, StreamKey{200 + i, k}).mass()));
    }
    const auto a = moments(sum), b = moments(joint);
    REQUIRE(std::abs(a.mean - b.mean) <= 4.0 * std::hypot(a.se, b.se));
  });
}

TEST_CASE("property: the top atom is stable under shifts") {
  // Shifting PPP(Z) by x gives PPP(Z e^{sqrt2 x}); compare P(top <= c).
  testing_support::for_all(4, 43, [](Rng& rng, std::size_t i) {
    const double z = 1.0, x = rng.uniform() * 2.0 - 1.0, c = 0.3;
    const std::size_t n = 20000;
    double shifted = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const PointMeasure p = sample_exp_ppp(z, Window(c - x, kInf), StreamKey{300 + i, k});
      if (p.empty()) shifted += 1.0;
    }
    shifted /= n;
    const double exact = std::exp(-exp_ppp_mass(z * std::exp(kSqrt2 * x), Window(c, kInf)));
    REQUIRE(std::abs(shifted - exact) <= 4.0 * std::sqrt(exact * (1 - exact) / n));
  });
}

TEST_CASE("recentered tip process shift identity") {
  const double a = -0.7;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const PointMeasure p = recentered_tip_ppp(std::exp(kSqrt2), Window(a, kInf), StreamKey{4, k});
    const PointMeasure q = sample_exp_ppp(1.0, Window(a - 1.0, kInf), StreamKey{4, k});
    REQUIRE(p.mass() == q.mass());
    for (std::size_t j = 0; j < p.mass(); ++j) REQUIRE(p.atoms()[j] == doctest::Approx(q.atoms()[j] + 1.0));
  }
  CHECK_THROWS_AS(recentered_tip_ppp(1.0, Window(0.0, 1.0), StreamKey{}), std::invalid_argument);
  CHECK_THROWS_AS(recentered_tip_ppp(2.0, Window(), StreamKey{}), std::invalid_argument);
}

TEST_CASE("assemble and restricted mass") {
  const PointMeasure tips({0.5, -1.0});
  CHECK_THROWS_AS(assemble_limit_process(tips, {PointMeasure({0.0})}), std::invalid_argument);
  const DecoratedPointMeasure d =
      assemble_limit_process(tips, {PointMeasure({0.0, -0.2, -3.0}), PointMeasure({0.0, -0.4})});
  CHECK(d.size() == 2);
  // Flattened atoms: 0.5, 0.3, -2.5, -1.0, -1.4.
  CHECK(restricted_mass(d, 1.0, Window()) == 3);
  CHECK(restricted_mass(d, 1.2, Window()) == 3);
  CHECK(restricted_mass(d, 1.5, Window()) == 4);
  CHECK(restricted_mass(d, 10.0, Window(0.0, 1.0)) == 3);
  CHECK(restricted_mass(d, 10.0, Window(2.0, 3.0)) == 0);
}

TEST_CASE("stable Laplace transform") {
  CHECK(stable1_laplace(1.0, 1.0) == 1.0);
  CHECK(stable1_laplace(2.0, 0.5) == doctest::Approx(std::pow(0.5, 1.0)));
  CHECK(stable1_laplace(1.0, 2.0) == doctest::Approx(4.0));
  CHECK_THROWS_AS(stable1_laplace(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(stable1_laplace(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("stable sampler") {
  StableSamplerConfig bad;
  bad.rho = 1e7;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = {};
  bad.z_min = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  SUBCASE("right tail is t / y") {
    StableSamplerConfig c;
    const std::size_t n = 200000;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = stable1_sample(c, StreamKey{5, i});
    for (double y : {20.0, 50.0}) {
      const double frac = static_cast<double>(std::count_if(x.begin(), x.end(), [&](double v) { return v > y; })) / n;
      CHECK(frac * y > 1.0 / 1.3);
      CHECK(frac * y < 1.3);
    }
  }
  SUBCASE("Laplace transform within error") {
    StableSamplerConfig c;
    c.t = 0.5;
    const std::size_t n = 100000;
    const double lambda = 1.5;
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) e[i] = std::exp(-lambda * stable1_sample(c, StreamKey{6, i}));
    const auto m = moments(e);
    CHECK(std::abs(m.mean - stable1_laplace(c.t, lambda)) <= 4.0 * m.se + stable1_truncation_bound(c, lambda));
  }
  SUBCASE("property: changing rho shifts the compensated sum exactly") {
    testing_support::for_all(20, 47, [](Rng& rng, std::size_t i) {
      StableSamplerConfig c;
      c.t = 0.2 + rng.uniform();
      c.rho = 0.5 + rng.uniform();
      const double k = 1.0 + 10.0 * rng.uniform();
      StableSamplerConfig d = c;
      d.rho = k * c.rho;
      const StreamKey key{7, i};
      REQUIRE(std::abs(stable1_compensated_sum(d, key) - stable1_compensated_sum(c, key) + c.t * std::log(k)) < 1e-9);
      REQUIRE(std::abs(stable1_sample(d, key) - stable1_sample(c, key)) < 1e-9);
    });
  }
}

TEST_CASE("compensated mass statistic") {
  const MassSampler unit = [](double, StreamKey) { return 1.0; };
  SUBCASE("tip level") {
    CHECK(tip_level(std::exp(1.0), 0.5) == doctest::Approx(std::exp(1.0) - 1.0 / kSqrt2 + 0.5));
  }
  SUBCASE("argument checks") {
    CHECK_THROWS_AS(compensated_mass_statistic(std::numbers::e, -1, 1, 1.0, unit, 10, StreamKey{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(compensated_mass_statistic(5.0, 0.5, 1, 1.0, unit, 10, StreamKey{}), std::invalid_argument);
    CHECK_THROWS_AS(compensated_mass_statistic(5.0, -1, 1, 0.0, unit, 10, StreamKey{}), std::invalid_argument);
    CHECK_THROWS_AS(compensated_mass_statistic(5.0, -1, 1, 1.0, unit, 0, StreamKey{}), std::invalid_argument);
  }
  SUBCASE("few compensator draws give a warning") {
    const CompensatedMass m = compensated_mass_statistic(5.0, -1, 1, 1.0, unit, 10, StreamKey{8, 0});
    REQUIRE(m.diagnostics.size() == 1);
    CHECK(m.diagnostics[0].find("warning") == 0);
  }
  SUBCASE("no tips leaves minus the compensator") {
    const CompensatorEstimate comp{0.25, 0.0, 5000};
    bool seen = false;
    for (std::uint64_t k = 0; k < 200 && !seen; ++k) {
      const CompensatedMass m = compensated_mass_statistic(3.0, -0.1, 0.1, comp, unit, StreamKey{9, k});
      if (m.n_tips == 0) {
        CHECK(m.value == -0.25);
        CHECK(m.raw == 0.0);
        seen = true;
      }
    }
    CHECK(seen);
  }
  SUBCASE("unit clusters have a closed-form compensator") {
    // With C = 1 the compensator is Lambda * E[e^{-sqrt2 u}; e^{-sqrt2 u} <= rho].
    const double u = 4.0;
    const CompensatorEstimate c = estimate_compensator(u, -2, 2, 1.0, unit, 2000, StreamKey{10, 0});
    CHECK(c.value == doctest::Approx(exp_ppp_mass(u, Window(-2, 2)) * std::exp(-kSqrt2 * u)));
    CHECK(estimate_compensator(u, -2, 2, 1e-4, unit, 2000, StreamKey{10, 0}).value == 0.0);
  }
  SUBCASE("mean of the statistic is near zero for unit clusters") {
    const double u = 4.0;
    const CompensatorEstimate comp = estimate_compensator(u, -2, 2, 1.0, unit, 1000, StreamKey{11, 0});
    std::vector<double> v;
    for (std::uint64_t k = 0; k < 5000; ++k) v.push_back(compensated_mass_statistic(u, -2, 2, comp, unit, StreamKey{12, k}).value);
    const auto m = moments(v);
    CHECK(std::abs(m.mean) <= 4.0 * m.se);
  }
}
