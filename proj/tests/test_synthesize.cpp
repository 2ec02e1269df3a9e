#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "kktplan/kkt.hpp"
#include "kktplan/planning.hpp"

using namespace kktplan;

namespace {

bool strictly_avoids(const Scenario& sc, const Point& theta, const Trajectory& tr) {
  for (const auto& x : tr.states) {
    if (g_value(sc.model, theta, sc.task.dynamics.position(x)) > kStrictTol) return false;
  }
  return true;
}

}  // namespace

TEST(Synthesize, FreeObstacleGivesStraightLine) {
  const Scenario sc = fixtures::toy_t1();
  const Point theta{0.2, 0.7, 0.4, 0.8};
  const Trajectory d = synthesize_demo(sc.task, sc.model, theta);
  EXPECT_NEAR(sc.task.cost_of(d), 0.16, 1e-8);
  for (const auto& x : d.states) EXPECT_NEAR(x[1], 0.5, 1e-7);
  EXPECT_TRUE(certify_local_opt(d, theta, sc.task, sc.model).first);
}

TEST(Synthesize, BlockingObstacleIsTouched) {
  const Scenario sc = fixtures::toy_t1();
  const Point theta{0.4, 0.3, 0.6, 0.7};
  const Trajectory d = synthesize_demo(sc.task, sc.model, theta);
  check_trajectory(sc.task.dynamics, d, 1e-8);
  EXPECT_TRUE(strictly_avoids(sc, theta, d));
  EXPECT_GT(sc.task.cost_of(d), 0.16);
  // Some state must sit on the obstacle boundary, otherwise the straight line would be optimal.
  double closest = 1e9;
  for (const auto& x : d.states) closest = std::min(closest, std::abs(g_value(sc.model, theta, x)));
  EXPECT_LT(closest, 1e-6);
  EXPECT_TRUE(certify_local_opt(d, theta, sc.task, sc.model).first);
  // The demo is consistent with the parameter that produced it.
  EXPECT_TRUE(robust_box_consistent(Box::point(theta), {d}, sc.task, sc.model));
}

TEST(Synthesize, InfeasibleTaskThrows) {
  const Scenario sc = fixtures::toy_t1();
  const Point theta{0.0, 0.0, 1.0, 1.0};
  EXPECT_THROW(synthesize_demo(sc.task, sc.model, theta), InfeasibleError);
}

TEST(Synthesize, ScalarBoundSaturates) {
  Scenario sc = fixtures::scalar_bound();
  sc.task.horizon = 8;
  sc.task.start = {0.0};
  sc.task.goal = {40.0};
  SynthesisOptions opts;
  opts.lattice_resolution = 1.0;
  // Unconstrained optimum has u^2 = (40/7)^2 ~ 32.65, so a cap of 40 is slack.
  const Trajectory slack = synthesize_demo(sc.task, sc.model, Point{40.0}, opts);
  for (const auto& u : slack.controls) EXPECT_NEAR(u[0], 40.0 / 7.0, 1e-7);
  // Seven steps under u^2 <= 30 cover at most 38.3.
  EXPECT_THROW(synthesize_demo(sc.task, sc.model, Point{30.0}, opts), InfeasibleError);
}

TEST(Synthesize, DoubleIntegratorAroundObstacle) {
  Scenario sc = fixtures::toy_t1();
  Dynamics& d = sc.task.dynamics;
  d.kind = DynamicsKind::DoubleIntegrator;
  d.dt = 0.5;
  d.state_bounds = Box({0, 0, -1, -1}, {1, 1, 1, 1});
  d.control_bounds = Box({-2, -2}, {2, 2});
  sc.task.horizon = 9;
  sc.task.start = {0.1, 0.5, 0, 0};
  sc.task.goal = {0.9, 0.5, 0, 0};
  sc.model = ConstraintModel::make(d, {PhiKind::StateProjection}, {1}, Box({0.2, 0.2, 0.4, 0.4}, {0.6, 0.6, 0.8, 0.8}));
  const Point theta{0.4, 0.45, 0.6, 0.8};
  SynthesisOptions opts;
  opts.lattice_resolution = 0.1;
  const Trajectory demo = synthesize_demo(sc.task, sc.model, theta, opts);
  check_trajectory(d, demo, 1e-8);
  EXPECT_TRUE(strictly_avoids(sc, theta, demo));
  EXPECT_TRUE(certify_local_opt(demo, theta, sc.task, sc.model).first);
}
