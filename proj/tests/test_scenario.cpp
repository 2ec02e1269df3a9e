#include <gtest/gtest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "kktplan/io.hpp"
#include "kktplan/rng.hpp"

using namespace kktplan;
using nlohmann::json;

namespace {

json minimal_1d() {
  return json::parse(R"({
    "version": 1,
    "dynamics": {"kind": "single-integrator", "dim": 1, "dt": 0.5,
                 "state_bounds": [[-5], [5]], "control_bounds": [[-1], [1]]},
    "task": {"T": 4, "cost": "sum-squared-control", "x0": [0], "xg": [1], "known_unsafe": []},
    "model": {"phi": "state-projection", "n_obs": 1, "theta_prior": {"lo": [-5, -5], "hi": [5, 5]}}
  })");
}

ConstraintModel box_model_2d(std::size_t n_obs) {
  const Dynamics dyn = fixtures::single_integrator_2d();
  Point lo(4 * n_obs, 0.0), hi(4 * n_obs, 1.0);
  return ConstraintModel::make(dyn, {PhiKind::StateProjection}, {n_obs}, Box(lo, hi));
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("kktplan_test_" + name)).string();
}

}  // namespace

TEST(LoadScenario, Minimal1d) {
  const Scenario sc = scenario_from_json(minimal_1d());
  EXPECT_EQ(sc.task.horizon, 4u);
  EXPECT_TRUE(sc.demos.empty());
  EXPECT_EQ(sc.model.theta_dim(), 2u);
}

TEST(LoadScenario, DemoViolatingDynamicsNamesTimestep) {
  json doc = minimal_1d();
  doc["demos"] = json::array({json::array({json::array({json::array({0.0}), json::array({0.5}), json::array({1.1})}),
                                           json::array({json::array({1.0}), json::array({1.0})})})});
  try {
    scenario_from_json(doc);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "demos[0] timestep 1");
  }
}

TEST(LoadScenario, UnknownFieldRejected) {
  json doc = minimal_1d();
  doc["task"]["horizon"] = 3;
  try {
    scenario_from_json(doc);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "task.horizon");
  }
}

TEST(LoadScenario, ValidationErrorsNameField) {
  json doc = minimal_1d();
  doc["task"]["T"] = 1;
  try {
    scenario_from_json(doc);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "task.T");
  }
  doc = minimal_1d();
  doc["model"]["theta_prior"] = {{"lo", {0}}, {"hi", {1}}};
  try {
    scenario_from_json(doc);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "model.theta_prior");
  }
  doc = minimal_1d();
  doc["version"] = 7;
  EXPECT_THROW(scenario_from_json(doc), ValidationError);
  doc = minimal_1d();
  doc["dynamics"]["kind"] = "unicycle";
  EXPECT_THROW(scenario_from_json(doc), ParseError);
}

TEST(LoadScenario, MalformedFileIsParseError) {
  const std::string path = temp_path("bad.json");
  write_text_file(path, "{\"version\": 1,");
  EXPECT_THROW(load_scenario(path), ParseError);
  EXPECT_THROW(load_scenario(temp_path("does_not_exist.json")), ParseError);
}

TEST(LoadScenario, ToyRoundTripIsBitIdentical) {
  const Scenario sc = fixtures::toy_t1();
  const std::string path = temp_path("t1.json");
  save_scenario(path, sc);
  const Scenario back = load_scenario(path);
  EXPECT_EQ(back.demos, sc.demos);
  EXPECT_EQ(back.task.start, sc.task.start);
  EXPECT_EQ(back.model.theta_prior(), sc.model.theta_prior());
  const std::string path2 = temp_path("t1_again.json");
  save_scenario(path2, back);
  EXPECT_EQ(read_text_file(path), read_text_file(path2));
}

TEST(LoadScenario, ProductModelArrays) {
  json doc = minimal_1d();
  doc["model"]["phi"] = {"state-projection", "control-norm-squared"};
  doc["model"]["n_obs"] = {1, 1};
  doc["model"]["theta_prior"] = {{"lo", {-5, -5, 0}}, {"hi", {5, 5, 1}}};
  const Scenario sc = scenario_from_json(doc);
  ASSERT_EQ(sc.model.blocks().size(), 2u);
  EXPECT_EQ(sc.model.block(1).theta_offset, 2u);
  EXPECT_EQ(sc.model.kappa_dim(), 2u);
  EXPECT_EQ(scenario_to_json(sc)["model"]["phi"].size(), 2u);
}

TEST(GValue, Examples) {
  const ConstraintModel model = box_model_2d(1);
  const Point theta{0.3, 0.3, 0.6, 0.6};
  EXPECT_NEAR(g_value(model, theta, Point{0.45, 0.45}), 0.15, 1e-12);
  EXPECT_NEAR(g_value(model, theta, Point{0.3, 0.45}), 0.0, 1e-15);

  const Scenario sc = fixtures::scalar_bound();
  EXPECT_NEAR(g_value(sc.model, Point{97.85}, Point{99.0}), 1.15, 1e-12);
  EXPECT_THROW(g_value(model, theta, Point{0.5}), ValidationError);
}

TEST(UnsafeRegion, Examples) {
  const ConstraintModel model = box_model_2d(1);
  const Point theta{0.3, 0.3, 0.6, 0.6};
  const BoxUnion single = unsafe_region(model, Box::point(theta));
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0], Box({0.3, 0.3}, {0.6, 0.6}));

  const BoxUnion ext = unsafe_region(model, Box({0.3, 0.3, 0.6, 0.6}, {0.3, 0.3, 0.9, 0.6}));
  ASSERT_EQ(ext.size(), 1u);
  EXPECT_EQ(ext[0], Box({0.3, 0.3}, {0.9, 0.6}));

  const Scenario sc = fixtures::scalar_bound();
  const BoxUnion s = unsafe_region(sc.model, Box({97.85}, {100}));
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].lo(0), 97.85);
  EXPECT_DOUBLE_EQ(s[0].hi(0), 100.0);
}

TEST(UnsafeRegion, MatchesGValueInterior) {
  const ConstraintModel model = box_model_2d(2);
  Rng rng(17);
  for (int k = 0; k < 1000; ++k) {
    Point theta(8);
    for (auto& v : theta) v = rng.uniform();
    const Point kappa{rng.uniform(), rng.uniform()};
    const auto boxes = unsafe_boxes(model, Box::point(theta), 0);
    bool interior = false;
    for (const auto& b : boxes) interior |= b.contains_strict(kappa);
    EXPECT_EQ(g_value(model, theta, kappa) > 0.0, interior);
  }
}

TEST(UnsafeRegion, MonotoneInThetaBox) {
  const ConstraintModel model = box_model_2d(1);
  Rng rng(23);
  for (int k = 0; k < 200; ++k) {
    Point lo(4), hi(4), lo2(4), hi2(4);
    for (std::size_t i = 0; i < 4; ++i) {
      const double a = rng.uniform(), b = rng.uniform();
      lo[i] = std::min(a, b);
      hi[i] = std::max(a, b);
      lo2[i] = lo[i] + rng.uniform() * (hi[i] - lo[i]);
      hi2[i] = lo2[i] + rng.uniform() * (hi[i] - lo2[i]);
    }
    const BoxUnion big = unsafe_region(model, Box(lo, hi));
    const BoxUnion small = unsafe_region(model, Box(lo2, hi2));
    for (int j = 0; j < 20; ++j) {
      const Point p{rng.uniform(), rng.uniform()};
      if (small.contains(p)) EXPECT_TRUE(big.contains(p));
    }
  }
}

TEST(Rollout, Examples) {
  const Dynamics dyn = fixtures::single_integrator_2d();
  const Trajectory still = rollout(dyn, {0.3, 0.4}, std::vector<Point>(3, Point{0, 0}));
  for (const auto& x : still.states) EXPECT_EQ(x, (Point{0.3, 0.4}));

  Dynamics di;
  di.kind = DynamicsKind::DoubleIntegrator;
  di.dim = 1;
  di.dt = 1.0;
  di.state_bounds = Box({-10, -10}, {10, 10});
  di.control_bounds = Box({-2}, {2});
  const Trajectory t = rollout(di, {0, 0}, {{1}, {1}});
  ASSERT_EQ(t.states.size(), 3u);
  EXPECT_EQ(t.states[0], (Point{0, 0}));
  EXPECT_EQ(t.states[1], (Point{0, 1}));
  EXPECT_EQ(t.states[2], (Point{1, 2}));
  EXPECT_NO_THROW(check_trajectory(di, t));
}

TEST(Rollout, BoundViolationReportsStep) {
  const Dynamics dyn = fixtures::single_integrator_2d();
  try {
    rollout(dyn, {0.5, 0.5}, {{0.1, 0}, {0.9, 0}});
    FAIL();
  } catch (const RolloutError& e) {
    EXPECT_EQ(e.step(), 1u);
  }
  try {
    rollout(dyn, {0.5, 0.5}, {{0.4, 0}, {0.4, 0}});
    FAIL();
  } catch (const RolloutError& e) {
    EXPECT_EQ(e.step(), 1u);
  }
}

TEST(StepPoints, SpacingRespected) {
  const Dynamics dyn = fixtures::single_integrator_2d();
  const ConstraintModel model = box_model_2d(1);
  const auto pts = step_points(dyn, model.block(0), {0.0, 0.0}, {0.5, 0.0}, {0.5, 0.0}, 0.1);
  ASSERT_EQ(pts.size(), 5u);
  EXPECT_EQ(pts.back(), (Point{0.5, 0.0}));
  EXPECT_NEAR(pts[0][0], 0.1, 1e-12);
}

TEST(Cost, Kinds) {
  Task task;
  task.dynamics = fixtures::single_integrator_2d();
  const Trajectory t = rollout(task.dynamics, {0, 0}, {{0.3, 0.4}, {0.0, 0.1}});
  task.cost = CostKind::SumSquaredControl;
  EXPECT_NEAR(task.cost_of(t), 0.25 + 0.01, 1e-12);
  task.cost = CostKind::PathLength;
  EXPECT_NEAR(task.cost_of(t), 0.25 + 0.01, 1e-12);
}
