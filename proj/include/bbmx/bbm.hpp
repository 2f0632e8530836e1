#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbmx/extremal.hpp"
#include "bbmx/rng.hpp"

namespace bbmx {

using NodeId = std::uint32_t;
inline constexpr std::int64_t kNoParent = -1;

// Raised when a configured resource cap (population, rejection budget) is hit.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenealogyNode {
  NodeId id = 0;
  std::int64_t parent = kNoParent;
  double birth_time = 0.0;
  double end_time = 0.0;  // branch time, prune time, or the horizon
  double height_at_end = 0.0;
};

struct PruneConfig {
  bool enabled = false;
  double window = 10.0;          // height units below the running maximum
  double check_interval = 0.25;  // model time between motion/prune checkpoints
  double margin = 3.0;           // level sets are certified down to max_t - (window - margin)
};

struct PruneLog {
  double barrier_used = -std::numeric_limits<double>::infinity();  // lowest barrier applied
  std::size_t pruned_count = 0;
  // First-moment (union) bound on the expected number of descendants of pruned
  // particles that would sit above max_t - (window - margin) at the horizon.
  double prune_bias_bound = 0.0;
  double certified_depth = std::numeric_limits<double>::infinity();
};

struct SimulateOptions {
  std::size_t population_cap = 50'000'000;  // genealogy nodes
  bool record_genealogy = true;
};

// BBM state at the horizon. Immutable once built by simulate().
class ParticleSystem {
 public:
  ParticleSystem(double horizon, PruneConfig prune, std::vector<GenealogyNode> nodes,
                 std::vector<NodeId> alive, std::vector<double> heights, PruneLog log);

  double horizon() const { return horizon_; }
  const PruneConfig& prune_config() const { return prune_; }
  const PruneLog& prune_log() const { return log_; }
  const std::vector<GenealogyNode>& nodes() const { return nodes_; }
  // Alive ids and their heights h_t(x), index-aligned.
  const std::vector<NodeId>& alive() const { return alive_; }
  const std::vector<double>& heights() const { return heights_; }
  std::size_t population() const { return alive_.size(); }
  bool has_genealogy() const { return !nodes_.empty(); }

  double height_of(NodeId id) const;
  double max_height() const;

 private:
  double horizon_;
  PruneConfig prune_;
  std::vector<GenealogyNode> nodes_;
  std::vector<NodeId> alive_;
  std::vector<double> heights_;
  std::vector<std::int64_t> alive_index_;  // node id -> position in alive_, or -1
  PruneLog log_;
};

// m_t = sqrt(2) t - 3/(2 sqrt 2) log+ t
double centering(double t);

// Binary branching at rate 1 with exact exponential clocks. Each particle
// owns a random stream derived from its parent's, so a pruned and an unpruned
// run with the same key agree on every particle the pruned run keeps.
ParticleSystem simulate(double t, const PruneConfig& prune, StreamKey key,
                        const SimulateOptions& options = {});

double centered_max(const ParticleSystem& system);

double derivative_martingale(const ParticleSystem& system, double c_diamond = 1.0);

// Pruned systems certify level sets down to max_t - (window - margin), that
// is to depth (window - margin) - centered_max below m_t; +inf when unpruned.
double certified_level_depth(const ParticleSystem& system);

// Number of alive particles with h_t(x) >= m_t - v. Throws on a pruned system
// when v exceeds certified_level_depth.
std::size_t level_set_count(const ParticleSystem& system, double v);

double genealogical_distance(const ParticleSystem& system, NodeId x, NodeId y);

// Particles that are maximal within their genealogical ball of radius r.
// Balls partition the population by the ancestor alive at time t - r.
// Exact height ties keep the smallest id. Returned in increasing id order.
std::vector<NodeId> local_maxima(const ParticleSystem& system, double r);

// (centered tip height, cluster of relative heights) per local maximum, in
// descending tip order.
DecoratedPointMeasure extract_clusters(const ParticleSystem& system, double r);

struct ConditionedOptions {
  double s_max_exact = 14.0;
  std::size_t max_attempts = 100'000;
  PruneConfig prune{};
};

struct ConditionedSystem {
  ParticleSystem system;
  std::size_t attempts = 0;
  double acceptance_rate() const { return 1.0 / static_cast<double>(attempts); }
};

class RejectionError : public ResourceError {
 public:
  RejectionError(const std::string& what, std::size_t attempts, double acceptance_upper)
      : ResourceError(what), attempts_(attempts), acceptance_upper_(acceptance_upper) {}
  std::size_t attempts() const { return attempts_; }
  // No draw was accepted; 3/attempts is the 95% upper bound on the rate.
  double acceptance_upper() const { return acceptance_upper_; }

 private:
  std::size_t attempts_;
  double acceptance_upper_;
};

// BBM of age s conditioned on centered_max <= ceiling, by rejection.
// Attempt k uses derive(key, k).
ConditionedSystem conditioned_bbm(double s, double ceiling, StreamKey key,
                                  const ConditionedOptions& options = {},
                                  bool record_genealogy = false);

// id,parent,birth_time,end_time,height_at_end
void write_genealogy_csv(const ParticleSystem& system, std::ostream& out);

}  // namespace bbmx
