#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace bbmx {

// Identifies one independent random stream. The pair maps injectively onto a
// Philox2x64-10 generator: `seed` is the Philox key and `stream` is the high
// word of the 128-bit counter; the low word counts draws within the stream.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Sub-stream of `key` with index `child`. Used for per-replica, per-event and
// per-particle streams; derivation is a 64-bit hash so collisions are
// possible in principle but have probability ~2^-64 per pair.
inline constexpr StreamKey derive(StreamKey key, std::uint64_t child) {
  return {key.seed, mix64(key.stream ^ mix64(child + 0x632BE59BD9B4E019ULL))};
}

// Counter-based generator (Philox2x64-10, Salmon et al. 2011). Satisfies
// UniformRandomBitGenerator so it can drive <random> distributions.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng() = default;
  explicit Rng(StreamKey key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (have_word_) {
      have_word_ = false;
      return word_;
    }
    auto [a, b] = block(key_.seed, counter_++, key_.stream);
    word_ = b;
    have_word_ = true;
    return a;
  }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

  // Box-Muller; the second variate of each pair is cached in the generator.
  double normal() {
    if (have_normal_) {
      have_normal_ = false;
      return normal_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    normal_ = r * std::sin(theta);
    have_normal_ = true;
    return r * std::cos(theta);
  }

  StreamKey key() const { return key_; }
  std::uint64_t draws() const { return counter_; }

 private:
  struct Pair {
    std::uint64_t a, b;
  };

  static Pair block(std::uint64_t key, std::uint64_t lo, std::uint64_t hi) {
    constexpr std::uint64_t kMul = 0xD2B74407B1CE6E93ULL;
    constexpr std::uint64_t kWeyl = 0x9E3779B97F4A7C15ULL;
    std::uint64_t c0 = lo, c1 = hi;
    for (int round = 0; round < 10; ++round) {
      const unsigned __int128 p = static_cast<unsigned __int128>(kMul) * c0;
      const auto phi = static_cast<std::uint64_t>(p >> 64);
      const auto plo = static_cast<std::uint64_t>(p);
      c0 = phi ^ key ^ c1;
      c1 = plo;
      key += kWeyl;
    }
    return {c0, c1};
  }

  StreamKey key_{};
  std::uint64_t counter_ = 0;
  std::uint64_t word_ = 0;
  double normal_ = 0.0;
  bool have_word_ = false;
  bool have_normal_ = false;
};

}  // namespace bbmx
