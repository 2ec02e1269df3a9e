#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "kktplan/extraction.hpp"
#include "kktplan/rng.hpp"

using namespace kktplan;

namespace {

Point sample_box(const Box& b, Rng& rng) {
  Point p(b.dim());
  for (std::size_t i = 0; i < b.dim(); ++i) p[i] = rng.uniform(b.lo(i), b.hi(i));
  return p;
}

// Fraction of random prior samples where membership in f agrees with the pointwise certificate.
double agreement(const BoxUnion& f, const KktContext& ctx, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::size_t same = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Point th = sample_box(ctx.model().theta_prior(), rng);
    if (f.contains(th) == ctx.certify(th)) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(n);
}

// True if any obstacle of theta contains kappa in its interior.
bool strictly_unsafe(const ConstraintModel& model, const Point& theta, const Point& kappa) {
  for (const auto& b : unsafe_boxes(model, Box::point(theta), 0)) {
    if (b.contains_strict(kappa, kStrictTol)) return true;
  }
  return false;
}

}  // namespace

TEST(Engine, ParseRoundTrip) {
  for (Engine e : {Engine::Enumerate, Engine::Carve, Engine::Grid}) EXPECT_EQ(parse_engine(to_string(e)), e);
  EXPECT_THROW(parse_engine("magic"), ValidationError);
}

TEST(SplitLongest, HalvesWidestDimension) {
  const auto parts = split_longest(Box({0, 0}, {4, 1}), 4);
  ASSERT_EQ(parts.size(), 4u);
  double vol = 0;
  for (const auto& p : parts) vol += box_volume(p);
  EXPECT_DOUBLE_EQ(vol, 4.0);
  EXPECT_EQ(parts[0], Box({0, 0}, {1, 1}));
  EXPECT_THROW(split_longest(Box({0}, {1}), 0), ValidationError);
}

TEST(Extract, NoDemosGivesPrior) {
  Scenario sc = fixtures::toy_t1();
  sc.demos.clear();
  const auto res = extract(sc.demos, sc.task, sc.model);
  ASSERT_EQ(res.f_theta.size(), 1u);
  EXPECT_EQ(res.f_theta[0], sc.model.theta_prior());
}

TEST(Extract, ScalarBoundIsUpperInterval) {
  const Scenario sc = fixtures::scalar_bound();
  for (Engine e : {Engine::Enumerate, Engine::Carve}) {
    ExtractionOptions opts;
    opts.engine = e;
    const auto res = extract(sc.demos, sc.task, sc.model, opts);
    ASSERT_FALSE(res.f_theta.empty()) << to_string(e);
    const Box h = res.f_theta.hull();
    EXPECT_NEAR(h.lo(0), fixtures::kScalarDemoLevel, 1e-9) << to_string(e);
    EXPECT_DOUBLE_EQ(h.hi(0), 100.0);
    EXPECT_NEAR(union_volume(res.f_theta), 100.0 - fixtures::kScalarDemoLevel, 1e-9);
  }
}

TEST(Extract, ToyMatchesPointwiseCertificate) {
  const Scenario sc = fixtures::toy_t1();
  const Extractor ex(sc.task, sc.model, sc.demos);
  const auto res = ex.extract();
  ASSERT_FALSE(res.f_theta.empty());
  EXPECT_GE(agreement(res.f_theta, ex.kkt(), 3000, 5), 0.999);
  // Every piece must be robustly consistent on its own.
  for (const auto& b : res.f_theta) EXPECT_TRUE(ex.kkt().robust_box_consistent(b)) << to_string(b);
}

TEST(Extract, ToyAgreesWithGridOracle) {
  const Scenario sc = fixtures::toy_t1();
  const Extractor ex(sc.task, sc.model, sc.demos);
  const BoxUnion f = ex.extract().f_theta;
  const BoxUnion grid = ex.grid_oracle(0.05, sc.model.theta_prior());
  // Prior edges and demo coordinates sit on the 0.05 lattice, so cells never straddle a boundary.
  EXPECT_NEAR(union_volume(f), union_volume(grid), 1e-9);
  EXPECT_NEAR(union_volume(subtract(grid, f)), 0.0, 1e-9);
}

TEST(Extract, PartitionedMatchesSingle) {
  const Scenario sc = fixtures::toy_t1();
  const auto whole = extract(sc.demos, sc.task, sc.model);
  const auto split = extract_partitioned(sc.demos, sc.task, sc.model, 4);
  EXPECT_NEAR(union_volume(whole.f_theta), union_volume(split.f_theta), 1e-9);
  EXPECT_NEAR(union_volume(subtract(whole.f_theta, split.f_theta)), 0.0, 1e-9);
  EXPECT_NEAR(union_volume(subtract(split.f_theta, whole.f_theta)), 0.0, 1e-9);
}

TEST(Extract, CarveMatchesEnumerateAndBoundsIterations) {
  const Scenario sc = fixtures::toy_t1();
  ExtractionOptions opts;
  const auto exact = extract(sc.demos, sc.task, sc.model, opts);
  opts.engine = Engine::Carve;
  const auto carved = extract(sc.demos, sc.task, sc.model, opts);
  EXPECT_NEAR(union_volume(carved.f_theta), union_volume(exact.f_theta), 1e-9);
  EXPECT_LE(static_cast<double>(carved.iterations), irregular_grid_cells(exact.f_theta));
  EXPECT_GE(carved.iterations, 1u);
}

TEST(Extract, GridEngineRespectsCap) {
  const Scenario sc = fixtures::toy_t1();
  ExtractionOptions opts;
  opts.engine = Engine::Grid;
  opts.grid_h = 0.001;
  opts.grid_cell_cap = 1000;
  EXPECT_THROW(extract(sc.demos, sc.task, sc.model, opts), ExtractionError);
}

TEST(Extract, DropsDegeneratePiecesOnRequest) {
  const Scenario sc = fixtures::toy_t1();
  ExtractionOptions opts;
  opts.keep_degenerate = false;
  const auto res = extract(sc.demos, sc.task, sc.model, opts);
  for (const auto& b : res.f_theta) EXPECT_EQ(b.rank(), 4u);
}

TEST(MaxBox, InsideRemainingAndConsistent) {
  const Scenario sc = fixtures::toy_t1();
  const BoxUnion remaining{sc.model.theta_prior()};
  const auto b = max_box(remaining, sc.demos, sc.task, sc.model);
  ASSERT_TRUE(b.has_value());
  EXPECT_TRUE(sc.model.theta_prior().contains(*b));
  const KktContext ctx(sc.task, sc.model, sc.demos);
  EXPECT_TRUE(ctx.robust_box_consistent(*b));
  EXPECT_EQ(b->rank(), 4u);
}

TEST(GuaranteedSets, ScalarSplit) {
  const Scenario sc = fixtures::scalar_bound();
  const auto gs = guaranteed_sets(extract(sc.demos, sc.task, sc.model), sc.model);
  EXPECT_TRUE(gs.g_unsafe.empty());
  ASSERT_FALSE(gs.g_safe.empty());
  EXPECT_NEAR(gs.g_safe.hull().hi(0), fixtures::kScalarDemoLevel, 1e-9);
  EXPECT_DOUBLE_EQ(gs.g_safe.hull().lo(0), 0.0);
  EXPECT_NEAR(union_volume(gs.possibly_unsafe), 100.0 - fixtures::kScalarDemoLevel, 1e-9);
}

TEST(GuaranteedSets, EmptyParameterSetThrows) {
  const Scenario sc = fixtures::toy_t1();
  EXPECT_THROW(guaranteed_sets(BoxUnion(4), sc.model), ValidationError);
}

TEST(GuaranteedSets, MonteCarloSoundness) {
  // Narrow prior so that the guaranteed-unsafe set is non-empty.
  Scenario sc = fixtures::toy_t1();
  sc.model = ConstraintModel::make(sc.task.dynamics, {PhiKind::StateProjection}, {1},
                                   Box({0.3, 0.55, 0.6, 0.75}, {0.4, 0.6, 0.7, 0.8}));
  const auto f = extract(sc.demos, sc.task, sc.model).f_theta;
  ASSERT_FALSE(f.empty());
  const auto gs = guaranteed_sets(f, sc.model);
  ASSERT_FALSE(gs.g_unsafe.empty());
  const auto thetas = sample_uniform(f, 200, 11);
  const auto unsafe_pts = sample_uniform(gs.g_unsafe, 200, 12);
  const auto safe_pts = sample_uniform(gs.g_safe, 400, 13);
  for (const auto& th : thetas) {
    for (const auto& k : unsafe_pts) ASSERT_TRUE(strictly_unsafe(sc.model, th, k));
    for (const auto& k : safe_pts) ASSERT_FALSE(strictly_unsafe(sc.model, th, k));
  }
}

TEST(Extract, TwoDemosIntersect) {
  Scenario sc = fixtures::toy_t1();
  // A second demo along y = 0.3; each demo removes the thetas whose box strictly covers its line.
  sc.task.start = {0.1, 0.3};
  sc.task.goal = {0.9, 0.3};
  sc.demos.push_back(rollout(sc.task.dynamics, sc.task.start, std::vector<Point>(4, Point{0.2, 0.0})));
  const Extractor ex(sc.task, sc.model, sc.demos);
  const auto f = ex.extract().f_theta;
  EXPECT_GE(agreement(f, ex.kkt(), 3000, 9), 0.999);
  Scenario one = fixtures::toy_t1();
  const auto f1 = extract(one.demos, one.task, one.model).f_theta;
  EXPECT_LT(union_volume(f), union_volume(f1));
}
