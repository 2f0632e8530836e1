#include "bbmx/bbm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "bbmx/paths.hpp"

namespace bbmx {

ParticleSystem::ParticleSystem(double horizon, PruneConfig prune, std::vector<GenealogyNode> nodes,
                               std::vector<NodeId> alive, std::vector<double> heights,
                               PruneLog log)
    : horizon_(horizon),
      prune_(prune),
      nodes_(std::move(nodes)),
      alive_(std::move(alive)),
      heights_(std::move(heights)),
      log_(log) {
  if (alive_.size() != heights_.size()) {
    throw std::invalid_argument("ParticleSystem: alive ids and heights differ in length");
  }
  if (!nodes_.empty()) {
    alive_index_.assign(nodes_.size(), -1);
    for (std::size_t i = 0; i < alive_.size(); ++i) {
      if (alive_[i] >= nodes_.size()) throw std::invalid_argument("ParticleSystem: bad alive id");
      alive_index_[alive_[i]] = static_cast<std::int64_t>(i);
    }
  }
}

double ParticleSystem::height_of(NodeId id) const {
  if (id >= alive_index_.size() || alive_index_[id] < 0) {
    throw std::out_of_range("ParticleSystem: id " + std::to_string(id) + " is not alive");
  }
  return heights_[static_cast<std::size_t>(alive_index_[id])];
}

double ParticleSystem::max_height() const {
  if (heights_.empty()) throw std::invalid_argument("ParticleSystem: empty population");
  return *std::max_element(heights_.begin(), heights_.end());
}

double centering(double t) { return kSqrt2 * t - kLogCurve * log_plus(t); }

namespace {

struct Particle {
  NodeId node;
  double time;
  double height;
  double next_branch;
  Rng rng;
};

struct PrunedRecord {
  double time;
  double height;
};

// Upper tail of the standard normal.
double normal_sf(double z) { return 0.5 * std::erfc(z / kSqrt2); }

}  // namespace

ParticleSystem simulate(double t, const PruneConfig& prune, StreamKey key,
                        const SimulateOptions& options) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("simulate: t must be >= 0");
  if (!(prune.check_interval > 0.0)) {
    throw std::invalid_argument("simulate: check_interval must be positive");
  }
  if (prune.enabled && !(prune.window > 0.0)) {
    throw std::invalid_argument("simulate: prune window must be positive");
  }

  const bool genealogy = options.record_genealogy;
  std::vector<GenealogyNode> nodes;
  NodeId next_id = 0;
  auto new_node = [&](std::int64_t parent, double birth) -> NodeId {
    const NodeId id = next_id++;
    if (static_cast<std::size_t>(next_id) > options.population_cap) {
      throw ResourceError("simulate: population cap of " + std::to_string(options.population_cap) +
                          " nodes exceeded at horizon " + std::to_string(t) +
                          (prune.enabled ? "" : " (pruning disabled)"));
    }
    if (genealogy) nodes.push_back({id, parent, birth, birth, 0.0});
    return id;
  };
  auto close_node = [&](NodeId id, double end, double height) {
    if (genealogy) {
      nodes[id].end_time = end;
      nodes[id].height_at_end = height;
    }
  };

  Rng root_rng(key);
  std::vector<Particle> current;
  {
    const NodeId root = new_node(kNoParent, 0.0);
    const double first = root_rng.exponential();
    current.push_back({root, 0.0, 0.0, first, root_rng});
  }

  PruneLog log;
  std::vector<PrunedRecord> pruned;
  std::vector<Particle> next, stack;

  double slab_start = 0.0;
  std::size_t slab = 0;
  while (slab_start < t) {
    ++slab;
    const double slab_end = std::min(t, static_cast<double>(slab) * prune.check_interval);
    next.clear();
    for (Particle& start : current) {
      stack.push_back(std::move(start));
      while (!stack.empty()) {
        Particle p = std::move(stack.back());
        stack.pop_back();
        for (;;) {
          if (p.next_branch < slab_end) {
            const double dt = p.next_branch - p.time;
            p.height += std::sqrt(dt) * p.rng.normal();
            p.time = p.next_branch;
            close_node(p.node, p.time, p.height);
            const StreamKey parent_key = p.rng.key();
            const auto parent_id = static_cast<std::int64_t>(p.node);
            Rng second(derive(parent_key, 1));
            Particle sibling{new_node(parent_id, p.time), p.time, p.height, 0.0, second};
            sibling.next_branch = p.time + sibling.rng.exponential();
            Rng first(derive(parent_key, 0));
            p.node = new_node(parent_id, p.time);
            p.rng = first;
            p.next_branch = p.time + p.rng.exponential();
            stack.push_back(std::move(sibling));
          } else {
            const double dt = slab_end - p.time;
            if (dt > 0.0) p.height += std::sqrt(dt) * p.rng.normal();
            p.time = slab_end;
            next.push_back(std::move(p));
            break;
          }
        }
      }
    }
    current.swap(next);

    if (prune.enabled && slab_end < t) {
      double running_max = -kInf;
      for (const Particle& p : current) running_max = std::max(running_max, p.height);
      const double barrier = running_max - prune.window;
      if (log.barrier_used == -kInf || barrier < log.barrier_used) log.barrier_used = barrier;
      auto keep = std::partition(current.begin(), current.end(),
                                 [&](const Particle& p) { return p.height >= barrier; });
      for (auto it = keep; it != current.end(); ++it) {
        close_node(it->node, it->time, it->height);
        pruned.push_back({it->time, it->height});
      }
      log.pruned_count += static_cast<std::size_t>(current.end() - keep);
      current.erase(keep, current.end());
    }
    slab_start = slab_end;
  }

  // Alive particles in increasing id order so downstream output is canonical.
  std::sort(current.begin(), current.end(),
            [](const Particle& a, const Particle& b) { return a.node < b.node; });
  std::vector<NodeId> alive;
  std::vector<double> heights;
  alive.reserve(current.size());
  heights.reserve(current.size());
  double final_max = -kInf;
  for (const Particle& p : current) {
    close_node(p.node, t, p.height);
    alive.push_back(p.node);
    heights.push_back(p.height);
    final_max = std::max(final_max, p.height);
  }

  if (prune.enabled) {
    log.certified_depth = prune.window - prune.margin;
    const double level = final_max - log.certified_depth;
    double bound = 0.0;
    for (const PrunedRecord& r : pruned) {
      const double remaining = t - r.time;
      bound += std::exp(remaining) * normal_sf((level - r.height) / std::sqrt(remaining));
    }
    log.prune_bias_bound = bound;
  }

  return ParticleSystem(t, prune, std::move(nodes), std::move(alive), std::move(heights), log);
}

double centered_max(const ParticleSystem& system) {
  if (system.population() == 0) throw std::invalid_argument("centered_max: empty system");
  return system.max_height() - centering(system.horizon());
}

double derivative_martingale(const ParticleSystem& system, double c_diamond) {
  if (!(c_diamond > 0.0)) throw std::invalid_argument("derivative_martingale: C_diamond must be > 0");
  const double line = kSqrt2 * system.horizon();
  double z = 0.0;
  for (double h : system.heights()) z += (line - h) * std::exp(kSqrt2 * (h - line));
  return c_diamond * z;
}

double certified_level_depth(const ParticleSystem& system) {
  if (!system.prune_config().enabled) return kInf;
  return system.prune_log().certified_depth - centered_max(system);
}

std::size_t level_set_count(const ParticleSystem& system, double v) {
  if (system.prune_config().enabled && system.population() > 0) {
    const double depth = certified_level_depth(system);
    if (v > depth) {
      throw std::invalid_argument(
          "level_set_count: depth " + std::to_string(v) + " exceeds the prune-certified depth " +
          std::to_string(depth) + " below m_t (prune_bias_bound=" +
          std::to_string(system.prune_log().prune_bias_bound) + ")");
    }
  }
  const double level = centering(system.horizon()) - v;
  return static_cast<std::size_t>(std::count_if(system.heights().begin(), system.heights().end(),
                                                [&](double h) { return h >= level; }));
}

namespace {

void require_genealogy(const ParticleSystem& system, const char* op) {
  if (!system.has_genealogy()) {
    throw std::invalid_argument(std::string(op) + ": system was simulated without genealogy");
  }
}

}  // namespace

double genealogical_distance(const ParticleSystem& system, NodeId x, NodeId y) {
  require_genealogy(system, "genealogical_distance");
  (void)system.height_of(x);  // throws for unknown or dead ids
  (void)system.height_of(y);
  if (x == y) return 0.0;
  const auto& nodes = system.nodes();
  std::int64_t a = x, b = y;
  while (a != b) {
    const auto& na = nodes[static_cast<std::size_t>(a)];
    const auto& nb = nodes[static_cast<std::size_t>(b)];
    if (na.birth_time >= nb.birth_time) {
      a = na.parent;
    } else {
      b = nb.parent;
    }
  }
  return system.horizon() - nodes[static_cast<std::size_t>(a)].end_time;
}

namespace {

// Ball representative (ancestor alive at time t - r) for every alive particle,
// index-aligned with system.alive(). Parents always precede children in id
// order, so one forward pass suffices.
std::vector<NodeId> ball_roots(const ParticleSystem& system, double r) {
  const auto& nodes = system.nodes();
  const double cut = system.horizon() - r;
  std::vector<NodeId> group(nodes.size());
  for (const GenealogyNode& n : nodes) {
    group[n.id] = (n.parent == kNoParent || n.birth_time <= cut)
                      ? n.id
                      : group[static_cast<std::size_t>(n.parent)];
  }
  std::vector<NodeId> out(system.population());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = group[system.alive()[i]];
  return out;
}

}  // namespace

std::vector<NodeId> local_maxima(const ParticleSystem& system, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("local_maxima: r must be positive");
  require_genealogy(system, "local_maxima");
  const auto roots = ball_roots(system, r);
  const auto& alive = system.alive();
  const auto& heights = system.heights();
  // best[root] = index into alive of the current ball maximum
  std::vector<std::int64_t> best(system.nodes().size(), -1);
  for (std::size_t i = 0; i < alive.size(); ++i) {
    auto& b = best[roots[i]];
    if (b < 0) {
      b = static_cast<std::int64_t>(i);
      continue;
    }
    const auto j = static_cast<std::size_t>(b);
    if (heights[i] > heights[j] || (heights[i] == heights[j] && alive[i] < alive[j])) {
      b = static_cast<std::int64_t>(i);
    }
  }
  std::vector<NodeId> out;
  for (std::int64_t b : best) {
    if (b >= 0) out.push_back(alive[static_cast<std::size_t>(b)]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

DecoratedPointMeasure extract_clusters(const ParticleSystem& system, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("extract_clusters: r must be positive");
  require_genealogy(system, "extract_clusters");
  const auto roots = ball_roots(system, r);
  const auto& heights = system.heights();
  const auto maxima = local_maxima(system, r);
  const double m = centering(system.horizon());

  std::vector<std::int64_t> slot(system.nodes().size(), -1);
  std::vector<std::vector<double>> members(maxima.size());
  std::vector<double> tip_height(maxima.size());
  for (std::size_t k = 0; k < maxima.size(); ++k) {
    const double h = system.height_of(maxima[k]);
    tip_height[k] = h;
  }
  for (std::size_t k = 0; k < maxima.size(); ++k) {
    // Locate the maximum's ball root through its alive index.
    const auto it = std::lower_bound(system.alive().begin(), system.alive().end(), maxima[k]);
    slot[roots[static_cast<std::size_t>(it - system.alive().begin())]] =
        static_cast<std::int64_t>(k);
  }
  for (std::size_t i = 0; i < heights.size(); ++i) {
    const auto k = static_cast<std::size_t>(slot[roots[i]]);
    members[k].push_back(heights[i] - tip_height[k]);
  }
  std::vector<Decoration> pairs;
  pairs.reserve(maxima.size());
  for (std::size_t k = 0; k < maxima.size(); ++k) {
    pairs.push_back({tip_height[k] - m, PointMeasure(std::move(members[k]))});
  }
  return DecoratedPointMeasure(std::move(pairs));
}

ConditionedSystem conditioned_bbm(double s, double ceiling, StreamKey key,
                                  const ConditionedOptions& options, bool record_genealogy) {
  if (!(s >= 0.0)) throw std::invalid_argument("conditioned_bbm: s must be >= 0");
  if (s > options.s_max_exact) {
    throw std::invalid_argument("conditioned_bbm: s=" + std::to_string(s) +
                                " exceeds s_max_exact=" + std::to_string(options.s_max_exact));
  }
  SimulateOptions sim;
  sim.record_genealogy = record_genealogy;
  for (std::size_t k = 0; k < options.max_attempts; ++k) {
    ParticleSystem system = simulate(s, options.prune, derive(key, k), sim);
    if (centered_max(system) <= ceiling) return {std::move(system), k + 1};
  }
  const double upper = 3.0 / static_cast<double>(options.max_attempts);
  throw RejectionError("conditioned_bbm: no acceptance in " + std::to_string(options.max_attempts) +
                           " attempts at s=" + std::to_string(s) + ", ceiling=" +
                           std::to_string(ceiling) + "; acceptance rate < " + std::to_string(upper),
                       options.max_attempts, upper);
}

void write_genealogy_csv(const ParticleSystem& system, std::ostream& out) {
  require_genealogy(system, "write_genealogy_csv");
  out << "id,parent,birth_time,end_time,height_at_end\n";
  out.precision(17);
  for (const GenealogyNode& n : system.nodes()) {
    out << n.id << ',';
    if (n.parent != kNoParent) out << n.parent;
    out << ',' << n.birth_time << ',' << n.end_time << ',' << n.height_at_end << '\n';
  }
}

}  // namespace bbmx
