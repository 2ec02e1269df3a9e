#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kktplan/belief.hpp"
#include "kktplan/extraction.hpp"
#include "kktplan/scenario.hpp"

namespace kktplan {

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Regular state lattice anchored at the lower state bound.
struct Lattice {
  Point resolution;          ///< per state dimension
  bool diagonal = true;      ///< allow moves along several axes at once
  std::size_t max_step = 0;  ///< largest control multiple per axis; 0 = limited by control bounds only
  double edge_spacing = 0;   ///< constraint sampling along edges; 0 = half the finest resolution

  /// Lattice whose primitives are consistent with the dynamics: position
  /// resolution r and, for double integrators, velocity resolution r / dt.
  static Lattice for_dynamics(const Dynamics& dyn, double r, std::size_t max_step = 0, bool diagonal = true);
  double spacing() const;
};

/// Regions to avoid, per constraint block, tested with strict membership.
class ForbiddenSet {
 public:
  ForbiddenSet() = default;
  explicit ForbiddenSet(const ConstraintModel& model);

  void add(std::size_t block, const Box& kappa_box);
  void add(std::size_t block, const BoxUnion& kappa_set);
  /// Adds the union over theta in the box of every block's unsafe set.
  void add_theta_box(const ConstraintModel& model, const Box& theta_box);

  bool contains(std::size_t block, std::span<const double> kappa) const;
  std::size_t n_blocks() const { return boxes_.size(); }
  const std::vector<Box>& boxes(std::size_t block) const { return boxes_[block]; }

 private:
  std::vector<std::vector<Box>> boxes_;
};

struct LatticeOptions {
  std::size_t horizon = 0;  ///< 0 = task horizon
};

/// Minimum-cost lattice path from the snapped start to the snapped goal with at
/// most horizon - 1 moves, padded with zero controls. Every sampled constraint
/// point avoids the forbidden set and the known unsafe boxes.
std::optional<Trajectory> lattice_plan(const Task& task, const ConstraintModel& model, const ForbiddenSet& forbidden,
                                       const Lattice& lattice, const LatticeOptions& opts = {});

/// Start and goal snapped to the lattice.
Point snap_to_lattice(const Dynamics& dyn, const Lattice& lattice, const Point& x);

/// True if the trajectory never enters the forbidden or known unsafe sets.
bool trajectory_avoids(const Task& task, const ConstraintModel& model, const ForbiddenSet& forbidden,
                       const Trajectory& traj, double spacing);

struct Plan {
  Trajectory traj;
  std::vector<Box> chosen_boxes;
  double covered_prob = 0.0;
  double cost = 0.0;
  double epsilon_achieved = 1.0;
  /// Parameters sampled by the scenario baseline.
  std::vector<Point> samples;
};

enum class Variant { ChanceConstrained, EpsMin, Ratio, GuaranteedSafe, Scenario, Optimistic };
std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct CcOptions {
  std::size_t n_box_budget = 64;
  std::size_t k_split = 2;  ///< pieces per dimension when a whole atom cannot be honored; 1 disables
  std::size_t split_depth = 3;  ///< refinement levels below an atom
  /// Start from every finest piece the unconstrained path already avoids,
  /// then add the remaining pieces by mass.
  bool free_first = false;
};

/// Greedy chance-constrained planner: honors atoms of the belief support one at a time.
Plan plan_cc(const Belief& belief, const Task& task, const ConstraintModel& model, double eps,
             const Lattice& lattice, const CcOptions& opts = {});
/// Largest coverage reachable by the greedy accumulation.
Plan plan_eps_min(const Belief& belief, const Task& task, const ConstraintModel& model, const Lattice& lattice,
                  const CcOptions& opts = {});
/// Minimum cost / covered_prob over the greedy frontier.
Plan plan_ratio(const Belief& belief, const Task& task, const ConstraintModel& model, const Lattice& lattice,
                const CcOptions& opts = {});
/// Every plan met along the greedy accumulation, in order (first entry has no atoms).
std::vector<Plan> greedy_frontier(const Belief& belief, const Task& task, const ConstraintModel& model,
                                  const Lattice& lattice, const CcOptions& opts = {}, double stop_at = 2.0);

/// Avoids every possibly unsafe state of every block.
Trajectory plan_guaranteed_safe(const BoxUnion& f_theta, const Task& task, const ConstraintModel& model,
                                const Lattice& lattice);

struct ScenarioOptions {
  std::uint64_t seed = 0;
  std::size_t max_samples = 200;
};
/// Adds sampled obstacles until replanning fails; returns the last feasible plan.
Plan plan_scenario(const Belief& belief, const Task& task, const ConstraintModel& model, const Lattice& lattice,
                   const ScenarioOptions& opts = {});

/// Avoids only the guaranteed-unsafe states, inflated by `buffer` along uncertain axes.
Trajectory plan_optimistic(const BoxUnion& f_theta, const Task& task, const ConstraintModel& model,
                           const Lattice& lattice, double buffer);

/// Positive-mass atoms of the support, ordered by mass (desc) then lo.
std::vector<Box> belief_atoms(const Belief& belief);

}  // namespace kktplan
