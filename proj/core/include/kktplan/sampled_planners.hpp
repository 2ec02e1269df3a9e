#pragma once

#include <cstdint>
#include <vector>

#include "kktplan/planning.hpp"
#include "kktplan/scenario.hpp"

namespace kktplan {

struct RoadmapEdge {
  std::size_t u = 0, v = 0;
  double cost = 0.0;
};

/// Undirected graph over constraint-space points of one state block.
struct Roadmap {
  std::vector<Point> vertices;
  std::vector<RoadmapEdge> edges;
  std::size_t start = 0, goal = 0;

  void validate() const;
  /// Adjacency list: (neighbour, edge index) per vertex.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adjacency() const;
};

/// Random geometric roadmap in the unit-scaled bounds; edges join vertices closer than radius.
Roadmap random_roadmap(const Box& bounds, std::size_t n_vertices, double radius, std::uint64_t seed);

struct EdgeBeliefs {
  std::vector<double> p_safe;
};

struct SampledOptions {
  std::size_t block = 0;
  double spacing = 0.025;       ///< collision sampling along edges
  std::size_t exact_limit = 12;  ///< exhaustive path enumeration up to this many vertices
  std::size_t label_cap = 200000;
};

struct McrResult {
  std::vector<std::size_t> path;      ///< vertex ids, start to goal
  std::vector<std::size_t> violated;  ///< indices of violated samples, ascending
  double cost = 0.0;
};

/// Indices of the samples under which the edge enters an obstacle.
std::vector<std::size_t> edge_violations(const Roadmap& rm, std::size_t edge, const std::vector<Point>& samples,
                                         const ConstraintModel& model, const SampledOptions& opts = {});

/// Path violating the fewest sampled constraints; ties broken by cost.
McrResult mcr_plan(const Roadmap& rm, const std::vector<Point>& samples, const ConstraintModel& model,
                   const SampledOptions& opts = {});

/// Fraction of samples under which each edge stays safe.
EdgeBeliefs estimate_edge_safety(const Roadmap& rm, const std::vector<Point>& samples, const ConstraintModel& model,
                                 const SampledOptions& opts = {});

/// Edge weight c - beta log p (or c + beta (1 - p) in linear mode); edges with p = 0 are excluded.
double btp_weight(double cost, double p_safe, double beta, bool linear = false);

/// Minimum total btp_weight path from start to goal.
std::vector<std::size_t> btp_plan(const Roadmap& rm, const EdgeBeliefs& beliefs, double beta, bool linear = false);

double path_cost(const Roadmap& rm, const std::vector<std::size_t>& path);

}  // namespace kktplan
