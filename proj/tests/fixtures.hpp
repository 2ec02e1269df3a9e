#pragma once

#include <cmath>

#include "kktplan/scenario.hpp"

namespace kktplan::fixtures {

inline Dynamics single_integrator_2d(double dt = 1.0, double umax = 0.5) {
  Dynamics d;
  d.kind = DynamicsKind::SingleIntegrator;
  d.dim = 2;
  d.dt = dt;
  d.state_bounds = Box({0, 0}, {1, 1});
  d.control_bounds = Box({-umax, -umax}, {umax, umax});
  return d;
}

/// 2-D kinematic toy: one unknown box obstacle, one straight-line demo along y = 0.5.
inline Scenario toy_t1() {
  Scenario sc;
  sc.task.dynamics = single_integrator_2d();
  sc.task.horizon = 5;
  sc.task.cost = CostKind::SumSquaredControl;
  sc.task.start = {0.1, 0.5};
  sc.task.goal = {0.9, 0.5};
  sc.task.known_unsafe = BoxUnion(2);
  sc.model = ConstraintModel::make(sc.task.dynamics, {PhiKind::StateProjection}, {1},
                                   Box({0.2, 0.2, 0.4, 0.4}, {0.6, 0.6, 0.8, 0.8}));
  sc.demos.push_back(rollout(sc.task.dynamics, sc.task.start, std::vector<Point>(4, Point{0.2, 0.0})));
  sc.lattice = {0.05, 0, true};
  return sc;
}

inline constexpr double kScalarDemoLevel = 97.85;

/// 1-D single integrator whose demo holds u^2 = 97.85 with an unknown bound on u^2.
inline Scenario scalar_bound() {
  Scenario sc;
  Dynamics& d = sc.task.dynamics;
  d.kind = DynamicsKind::SingleIntegrator;
  d.dim = 1;
  d.dt = 1.0;
  d.state_bounds = Box({-100}, {100});
  d.control_bounds = Box({-10}, {10});
  sc.task.horizon = 4;
  sc.task.cost = CostKind::SumSquaredControl;
  const double u = std::sqrt(kScalarDemoLevel);
  const Trajectory demo = rollout(d, {0.0}, std::vector<Point>(3, Point{u}));
  sc.task.start = demo.states.front();
  sc.task.goal = demo.states.back();
  sc.task.known_unsafe = BoxUnion(1);
  sc.model = ConstraintModel::make(d, {PhiKind::ControlNormSquared}, {1}, Box({0}, {100}));
  sc.demos.push_back(demo);
  return sc;
}

/// Known vertical wall at x in [0.45, 0.55] with one-row gates, and an
/// unknown obstacle whose x-extent is pinned to the wall and whose y-extent
/// is uncertain: lo_y in [0, lo_max], hi_y in [hi_min, 1]. Start and goal sit
/// on the 0.1 lattice at y = 0.5.
inline Scenario gate_wall(const std::vector<double>& gates = {0.1, 0.3, 0.5, 0.7, 0.9}, std::size_t horizon = 25,
                          double lo_max = 0.6, double hi_min = 0.4) {
  Scenario sc;
  sc.task.dynamics = single_integrator_2d(1.0, 0.2);
  sc.task.horizon = horizon;
  sc.task.cost = CostKind::SumSquaredControl;
  sc.task.start = {0.1, 0.5};
  sc.task.goal = {0.9, 0.5};
  std::vector<Box> wall;
  double y = -0.1;
  for (double g : gates) {
    wall.push_back(Box({0.45, y}, {0.55, g - 0.05}));
    y = g + 0.05;
  }
  wall.push_back(Box({0.45, y}, {0.55, 1.1}));
  sc.task.known_unsafe = BoxUnion(wall);
  sc.model = ConstraintModel::make(sc.task.dynamics, {PhiKind::StateProjection}, {1},
                                   Box({0.45, 0.0, 0.55, hi_min}, {0.45, lo_max, 0.55, 1.0}));
  sc.lattice = {0.1, 2, false};
  return sc;
}

/// gate_wall with the middle gate always blocked, plus an unknown bound on
/// |u|^2 over [0.01, 0.05].
inline Scenario gate_wall_mixed(std::size_t horizon = 25) {
  Scenario sc = gate_wall({0.1, 0.3, 0.5, 0.7, 0.9}, horizon, 0.45, 0.55);
  const Box box_prior = sc.model.theta_prior();
  Point lo = box_prior.lo(), hi = box_prior.hi();
  lo.push_back(0.01);
  hi.push_back(0.05);
  sc.model = ConstraintModel::make(sc.task.dynamics, {PhiKind::StateProjection, PhiKind::ControlNormSquared}, {1, 1},
                                   Box(lo, hi));
  return sc;
}

/// Wall with a straight shortcut gate at y = 0.5 and a detour gate at y = 0.9.
/// The unknown obstacle only rarely reaches down into the shortcut:
/// lo_y in [0.48, 0.7], hi_y in [0.7, 0.8], so P(blocked) = 1/11.
inline Scenario maze_shortcut() {
  Scenario sc = gate_wall({0.5, 0.9}, 25);
  sc.model = ConstraintModel::make(sc.task.dynamics, {PhiKind::StateProjection}, {1},
                                   Box({0.45, 0.48, 0.55, 0.7}, {0.45, 0.7, 0.55, 0.8}));
  return sc;
}

}  // namespace kktplan::fixtures
