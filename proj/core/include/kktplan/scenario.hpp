#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kktplan/geometry.hpp"

namespace kktplan {

/// Raised for malformed input files. `field` names the offending JSON path.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Raised when a well-formed input breaks a type invariant.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class DynamicsKind { SingleIntegrator, DoubleIntegrator };
enum class CostKind { SumSquaredControl, PathLength };
enum class PhiKind { StateProjection, ControlNormSquared, Identity };

std::string to_string(DynamicsKind k);
std::string to_string(CostKind k);
std::string to_string(PhiKind k);
DynamicsKind parse_dynamics_kind(const std::string& s);
CostKind parse_cost_kind(const std::string& s);
PhiKind parse_phi_kind(const std::string& s);

/// Linear time-invariant integrator chains, forward-Euler discretized.
///   single: x' = x + dt u
///   double: p' = p + dt v,  v' = v + dt u
struct Dynamics {
  DynamicsKind kind = DynamicsKind::SingleIntegrator;
  std::size_t dim = 2;  ///< workspace dimension
  double dt = 1.0;
  Box state_bounds;
  Box control_bounds;

  std::size_t state_dim() const { return kind == DynamicsKind::SingleIntegrator ? dim : 2 * dim; }
  std::size_t control_dim() const { return dim; }

  Point step(const Point& x, const Point& u) const;
  /// Position part of a state.
  Point position(const Point& x) const { return Point(x.begin(), x.begin() + static_cast<long>(dim)); }
};

struct Trajectory {
  std::vector<Point> states;    ///< T states
  std::vector<Point> controls;  ///< T-1 controls

  std::size_t horizon() const { return states.size(); }
  bool operator==(const Trajectory&) const = default;
};

struct Task {
  Dynamics dynamics;
  std::size_t horizon = 2;
  CostKind cost = CostKind::SumSquaredControl;
  Point start;
  Point goal;
  BoxUnion known_unsafe;  ///< boxes in workspace (position) coordinates

  double cost_of(const Trajectory& traj) const;
  /// Cost contribution of one transition.
  double step_cost(const Point& x, const Point& u, const Point& x_next) const;
};

/// One group of unknown obstacles acting on a single constraint map phi.
///
/// Box blocks (state-projection, identity) give every obstacle 2k offsets laid
/// out as [lo_0..lo_{k-1}, hi_0..hi_{k-1}]. The control-norm block has one
/// obstacle with one offset: the unsafe set is {kappa > theta}.
struct ConstraintBlock {
  PhiKind phi = PhiKind::StateProjection;
  std::size_t kappa_dim = 0;
  std::size_t n_obs = 0;
  std::size_t theta_offset = 0;
  Box kappa_bounds;  ///< reachable range of kappa, used to close half-infinite sets

  bool is_scalar_bound() const { return phi == PhiKind::ControlNormSquared; }
  std::size_t facets_per_obstacle() const { return is_scalar_bound() ? 1 : 2 * kappa_dim; }
  std::size_t theta_dim() const { return n_obs * facets_per_obstacle(); }

  /// Index into theta of facet (axis, upper) of obstacle m.
  std::size_t theta_index(std::size_t m, std::size_t axis, bool upper) const;
};

/// Identifies one offset-parameterized facet.
struct FacetRef {
  std::size_t block = 0;
  std::size_t obstacle = 0;
  std::size_t axis = 0;
  bool upper = false;
};

class ConstraintModel {
 public:
  ConstraintModel() = default;
  ConstraintModel(std::vector<ConstraintBlock> blocks, Box theta_prior);

  /// Builds blocks for the given phi kinds and obstacle counts, deriving
  /// kappa dimensions and bounds from the dynamics.
  static ConstraintModel make(const Dynamics& dyn, const std::vector<PhiKind>& phis,
                              const std::vector<std::size_t>& n_obs, Box theta_prior);

  const std::vector<ConstraintBlock>& blocks() const { return blocks_; }
  const ConstraintBlock& block(std::size_t b) const { return blocks_[b]; }
  std::size_t theta_dim() const { return theta_prior_.dim(); }
  std::size_t kappa_dim() const;  ///< concatenated constraint-space dimension
  const Box& theta_prior() const { return theta_prior_; }

  std::vector<FacetRef> facets(std::size_t b) const;
  std::size_t theta_index(const FacetRef& f) const {
    return blocks_[f.block].theta_index(f.obstacle, f.axis, f.upper);
  }

  /// Unsafe box of obstacle m for a point parameter; lo > hi marks an empty obstacle.
  void obstacle_bounds(std::size_t b, std::size_t m, std::span<const double> theta, Point& lo,
                       Point& hi) const;

  /// max over obstacles of min over facets of the signed inward distance.
  double block_g(std::size_t b, std::span<const double> theta, std::span<const double> kappa) const;
  /// Signed facet value v_f(kappa, theta); v_f <= 0 means kappa is outside across f.
  double facet_value(const FacetRef& f, std::span<const double> theta, std::span<const double> kappa) const;

  /// Outer box of obstacle m over a parameter box; nullopt when empty for every theta.
  std::optional<Box> outer_obstacle(std::size_t b, std::size_t m, const Box& theta_box) const;
  /// Inner box: kappa unsafe for every theta in the box (closure). nullopt when
  /// empty, or when flat unless allow_flat is set.
  std::optional<Box> inner_obstacle(std::size_t b, std::size_t m, const Box& theta_box, bool allow_flat = false) const;

 private:
  std::vector<ConstraintBlock> blocks_;
  Box theta_prior_;
};

/// Unsafe iff g > kStrictTol; the boundary counts as safe.
inline constexpr double kStrictTol = 1e-9;

/// g(kappa, theta) over the concatenated constraint space of all blocks.
double g_value(const ConstraintModel& model, std::span<const double> theta, std::span<const double> kappa);

/// Union over theta in the box of the unsafe set, as one closed box per
/// nonempty obstacle (overlapping obstacles are not merged). Half-infinite
/// sets are closed with the block's kappa bounds.
std::vector<Box> unsafe_boxes(const ConstraintModel& model, const Box& theta_box, std::size_t block);
/// Interior-disjoint version of unsafe_boxes.
BoxUnion unsafe_region(const ConstraintModel& model, const Box& theta_box, std::size_t block = 0);

/// Closure of the set of theta under which obstacle m of block b holds kappa
/// in its interior. Unconstrained coordinates are infinite.
Box violating_thetas(const ConstraintModel& model, std::size_t b, std::size_t m, std::span<const double> kappa);
/// Removes from u every theta that makes kappa strictly unsafe. Pieces that only
/// touch the violating set on its boundary are kept whole.
BoxUnion remove_violating(const BoxUnion& u, const ConstraintModel& model, std::size_t b,
                          std::span<const double> kappa);
/// Part of u under which kappa is unsafe for at least one obstacle of block b.
BoxUnion keep_violating(const BoxUnion& u, const ConstraintModel& model, std::size_t b,
                        std::span<const double> kappa);

/// Constraint points of a trajectory for block b: one per state for state
/// maps, one per control for the control-norm map.
std::vector<Point> constraint_points(const Task& task, const ConstraintModel& model, std::size_t b,
                                     const Trajectory& traj);
Point kappa_of_state(const Dynamics& dyn, PhiKind phi, const Point& x);
Point kappa_of_control(const Point& u);

/// Points checked along one transition x -> x_next under control u. State
/// maps are sampled by linear interpolation with at most `spacing` between
/// consecutive samples (x itself excluded, x_next included).
std::vector<Point> step_points(const Dynamics& dyn, const ConstraintBlock& block, const Point& x,
                               const Point& u, const Point& x_next, double spacing);

class RolloutError : public std::runtime_error {
 public:
  RolloutError(std::size_t step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

Trajectory rollout(const Dynamics& dyn, const Point& x0, const std::vector<Point>& controls);

/// Throws ValidationError naming the first offending timestep.
void check_trajectory(const Dynamics& dyn, const Trajectory& traj, double tol = 1e-9,
                      const std::string& field = "trajectory");

/// Suggested planning lattice shipped with a scenario; resolution 0 = unset.
struct LatticeHint {
  double resolution = 0.0;
  std::size_t max_step = 0;
  bool diagonal = true;
};

struct Scenario {
  Task task;
  ConstraintModel model;
  std::vector<Trajectory> demos;
  LatticeHint lattice;
};

}  // namespace kktplan
