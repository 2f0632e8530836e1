#include <set>
#include <vector>

#include "bbmx/rng.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bbmx;
using testing_support::moments;

TEST_CASE("same key gives the same stream") {
  Rng a(StreamKey{7, 3}), b(StreamKey{7, 3});
  for (int i = 0; i < 1000; ++i) CHECK(a() == b());
}

TEST_CASE("neighbouring keys and derived keys give different streams") {
  std::set<std::uint64_t> first;
  for (std::uint64_t s = 0; s < 64; ++s) {
    first.insert(Rng(StreamKey{1, s})());
    first.insert(Rng(StreamKey{s + 2, 0})());
    first.insert(Rng(derive(StreamKey{1, 0}, s))());
  }
  CHECK(first.size() == 64 * 3);
}

TEST_CASE("uniform stays inside the open unit interval") {
  Rng rng(StreamKey{11, 0});
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal and exponential moments") {
  Rng rng(StreamKey{5, 9});
  std::vector<double> z, e;
  for (int i = 0; i < 200000; ++i) {
    z.push_back(rng.normal());
    e.push_back(rng.exponential(2.0));
  }
  const auto mz = moments(z);
  CHECK(std::abs(mz.mean) <= 3 * mz.se);
  CHECK(std::abs(mz.var - 1.0) <= 3 * std::sqrt(2.0 / 200000.0));
  const auto me = moments(e);
  CHECK(std::abs(me.mean - 0.5) <= 3 * me.se);
}

TEST_CASE("draw counter advances") {
  Rng rng(StreamKey{1, 1});
  const auto before = rng.draws();
  rng.uniform();
  CHECK(rng.draws() > before);
}
