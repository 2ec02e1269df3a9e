#include <gtest/gtest.h>

#include <set>

#include "fixtures.hpp"
#include "kktplan/rng.hpp"
#include "kktplan/sampled_planners.hpp"

using namespace kktplan;

namespace {

ConstraintModel unit_model() {
  return ConstraintModel::make(fixtures::single_integrator_2d(), {PhiKind::StateProjection}, {1},
                               Box({0.1, 0.1, 0.3, 0.3}, {0.5, 0.5, 0.9, 0.9}));
}

std::vector<Point> draw_thetas(const ConstraintModel& model, std::size_t n, std::uint64_t seed) {
  return sample_uniform(BoxUnion{model.theta_prior()}, n, seed);
}

// Every simple start-goal path as a vertex list.
void all_paths(const Roadmap& rm, std::size_t v, std::vector<std::size_t>& path, std::vector<char>& seen,
               std::vector<std::vector<std::size_t>>& out) {
  if (v == rm.goal) {
    out.push_back(path);
    return;
  }
  for (const auto& e : rm.edges) {
    std::size_t w;
    if (e.u == v) {
      w = e.v;
    } else if (e.v == v) {
      w = e.u;
    } else {
      continue;
    }
    if (seen[w]) continue;
    seen[w] = 1;
    path.push_back(w);
    all_paths(rm, w, path, seen, out);
    path.pop_back();
    seen[w] = 0;
  }
}

std::vector<std::vector<std::size_t>> enumerate_paths(const Roadmap& rm) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> path{rm.start};
  std::vector<char> seen(rm.vertices.size(), 0);
  seen[rm.start] = 1;
  all_paths(rm, rm.start, path, seen, out);
  return out;
}

std::size_t edge_index(const Roadmap& rm, std::size_t a, std::size_t b) {
  for (std::size_t e = 0; e < rm.edges.size(); ++e) {
    if ((rm.edges[e].u == a && rm.edges[e].v == b) || (rm.edges[e].u == b && rm.edges[e].v == a)) return e;
  }
  throw std::logic_error("no edge");
}

std::size_t oracle_min_violations(const Roadmap& rm, const std::vector<Point>& thetas, const ConstraintModel& model) {
  std::vector<std::set<std::size_t>> per_edge(rm.edges.size());
  for (std::size_t e = 0; e < rm.edges.size(); ++e) {
    const auto v = edge_violations(rm, e, thetas, model);
    per_edge[e].insert(v.begin(), v.end());
  }
  std::size_t best = SIZE_MAX;
  for (const auto& p : enumerate_paths(rm)) {
    std::set<std::size_t> all;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
      const auto& s = per_edge[edge_index(rm, p[k], p[k + 1])];
      all.insert(s.begin(), s.end());
    }
    best = std::min(best, all.size());
  }
  return best;
}

Roadmap connected_roadmap(std::size_t n, std::uint64_t seed) {
  for (std::uint64_t s = seed;; s += 1000) {
    Roadmap rm = random_roadmap(Box({0, 0}, {1, 1}), n, 0.55, s);
    std::vector<char> seen(n, 0);
    std::vector<std::size_t> stack{rm.start};
    seen[rm.start] = 1;
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      for (const auto& e : rm.edges) {
        for (std::size_t w : {e.u == v ? e.v : SIZE_MAX, e.v == v ? e.u : SIZE_MAX}) {
          if (w != SIZE_MAX && !seen[w]) {
            seen[w] = 1;
            stack.push_back(w);
          }
        }
      }
    }
    if (seen[rm.goal]) return rm;
  }
}

}  // namespace

TEST(Roadmap, Validation) {
  Roadmap rm;
  EXPECT_THROW(rm.validate(), ValidationError);
  rm.vertices = {{0, 0}, {1, 1}};
  rm.edges = {{0, 2, 1.0}};
  EXPECT_THROW(rm.validate(), ValidationError);
}

TEST(Mcr, NoSamplesGivesShortestPath) {
  const ConstraintModel model = unit_model();
  const Roadmap rm = connected_roadmap(10, 1);
  const auto res = mcr_plan(rm, {}, model);
  EXPECT_TRUE(res.violated.empty());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : enumerate_paths(rm)) best = std::min(best, path_cost(rm, p));
  EXPECT_NEAR(res.cost, best, 1e-12);
}

TEST(Mcr, BlockingSampleIsViolated) {
  const ConstraintModel model = unit_model();
  Roadmap rm;
  rm.vertices = {{0.0, 0.5}, {0.5, 0.1}, {0.5, 0.9}, {1.0, 0.5}};
  rm.edges = {{0, 1, 0.64}, {1, 3, 0.64}, {0, 2, 0.64}, {2, 3, 0.64}};
  rm.start = 0;
  rm.goal = 3;
  const std::vector<Point> thetas{{0.2, 0.0, 0.8, 1.0}};
  const auto res = mcr_plan(rm, thetas, model);
  EXPECT_EQ(res.violated, std::vector<std::size_t>{0});
  rm.edges.pop_back();
  rm.edges.pop_back();
  EXPECT_EQ(mcr_plan(rm, {}, model).path, (std::vector<std::size_t>{0, 1, 3}));
  rm.edges.pop_back();
  EXPECT_THROW(mcr_plan(rm, {}, model), InfeasibleError);
}

TEST(Mcr, MatchesExhaustiveEnumeration) {
  const ConstraintModel model = unit_model();
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Roadmap rm = connected_roadmap(10, 100 + s);
    const auto thetas = draw_thetas(model, 5, 200 + s);
    EXPECT_EQ(mcr_plan(rm, thetas, model).violated.size(), oracle_min_violations(rm, thetas, model)) << "seed " << s;
  }
}

TEST(Mcr, LabelSearchMatchesExhaustive) {
  const ConstraintModel model = unit_model();
  SampledOptions exhaustive;
  exhaustive.exact_limit = 100;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Roadmap rm = connected_roadmap(14, 300 + s);
    const auto thetas = draw_thetas(model, 8, 400 + s);
    const auto a = mcr_plan(rm, thetas, model);
    const auto b = mcr_plan(rm, thetas, model, exhaustive);
    EXPECT_EQ(a.violated.size(), b.violated.size()) << "seed " << s;
  }
}

TEST(Mcr, DensificationNeverHurts) {
  const ConstraintModel model = unit_model();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Roadmap small = connected_roadmap(8, 500 + s);
    Roadmap big = small;
    Rng rng(600 + s);
    // Insert extra vertices before the goal so ids of the small roadmap stay valid.
    const Point goal = big.vertices.back();
    big.vertices.pop_back();
    for (int k = 0; k < 3; ++k) big.vertices.push_back({rng.uniform(), rng.uniform()});
    big.vertices.push_back(goal);
    big.goal = big.vertices.size() - 1;
    big.edges.clear();
    for (const auto& e : small.edges) {
      big.edges.push_back({e.u == small.goal ? big.goal : e.u, e.v == small.goal ? big.goal : e.v, e.cost});
    }
    for (std::size_t i = small.goal; i < big.goal; ++i) {
      for (std::size_t j = 0; j < big.vertices.size(); ++j) {
        if (j == i) continue;
        if (j >= small.goal && j < i) continue;  // added once from the smaller index
        const double d = std::hypot(big.vertices[i][0] - big.vertices[j][0], big.vertices[i][1] - big.vertices[j][1]);
        if (d <= 0.55) big.edges.push_back({i, j, d});
      }
    }
    const auto thetas = draw_thetas(model, 6, 700 + s);
    EXPECT_LE(mcr_plan(big, thetas, model).violated.size(), mcr_plan(small, thetas, model).violated.size());
  }
}

TEST(EdgeSafety, RecountAndLimits) {
  const ConstraintModel model = unit_model();
  const Roadmap rm = connected_roadmap(10, 9);
  const auto thetas = draw_thetas(model, 50, 10);
  const auto eb = estimate_edge_safety(rm, thetas, model);
  for (std::size_t e = 0; e < rm.edges.size(); ++e) {
    std::size_t ok = 0;
    for (const auto& th : thetas) ok += edge_violations(rm, e, {th}, model).empty();
    EXPECT_DOUBLE_EQ(eb.p_safe[e], static_cast<double>(ok) / thetas.size());
  }
  Roadmap corner;
  corner.vertices = {{0.0, 0.0}, {0.05, 0.0}, {0.45, 0.6}, {0.55, 0.6}};
  corner.edges = {{0, 1, 0.05}, {2, 3, 0.1}};
  const ConstraintModel wide = ConstraintModel::make(fixtures::single_integrator_2d(), {PhiKind::StateProjection}, {1},
                                                     Box({0.1, 0.1, 0.8, 0.8}, {0.2, 0.2, 0.9, 0.9}));
  const auto c = estimate_edge_safety(corner, draw_thetas(wide, 50, 11), wide);
  EXPECT_DOUBLE_EQ(c.p_safe[0], 1.0);  // outside every obstacle
  EXPECT_DOUBLE_EQ(c.p_safe[1], 0.0);  // inside every obstacle
  EXPECT_THROW(estimate_edge_safety(corner, {}, model), ValidationError);
}

TEST(EdgeSafety, ConvergesToExactProbability) {
  const ConstraintModel model = unit_model();
  const Roadmap rm = connected_roadmap(8, 21);
  const std::size_t n = 10000;
  const auto thetas = draw_thetas(model, n, 22);
  const auto eb = estimate_edge_safety(rm, thetas, model);
  const Belief b = belief_from_support(BoxUnion{model.theta_prior()});
  for (std::size_t e = 0; e < rm.edges.size(); ++e) {
    const Point& a = rm.vertices[rm.edges[e].u];
    const Point& c = rm.vertices[rm.edges[e].v];
    std::vector<Point> pts;
    const double len = std::max(std::abs(c[0] - a[0]), std::abs(c[1] - a[1]));
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / 0.025 - 1e-12)));
    for (std::size_t s = 0; s <= k; ++s) {
      const double t = static_cast<double>(s) / k;
      pts.push_back({a[0] + t * (c[0] - a[0]), a[1] + t * (c[1] - a[1])});
    }
    const double exact = relative_volume(safe_thetas(b.support(), model, 0, pts), 4) / b.total_volume();
    const double tol = 3 * std::sqrt(std::max(exact * (1 - exact), 1e-4) / n);
    EXPECT_NEAR(eb.p_safe[e], exact, tol) << "edge " << e;
  }
}

TEST(Btp, ZeroBetaIsShortestPath) {
  const Roadmap rm = connected_roadmap(10, 31);
  EdgeBeliefs eb{std::vector<double>(rm.edges.size(), 0.5)};
  const auto path = btp_plan(rm, eb, 0.0);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : enumerate_paths(rm)) best = std::min(best, path_cost(rm, p));
  EXPECT_NEAR(path_cost(rm, path), best, 1e-12);
}

TEST(Btp, LargeBetaMaximizesSafety) {
  Roadmap rm;
  rm.vertices = {{0, 0}, {0.5, 0.1}, {0.5, 0.9}, {1, 0}};
  rm.edges = {{0, 1, 0.6}, {1, 3, 0.6}, {0, 2, 1.2}, {2, 3, 1.2}};
  rm.start = 0;
  rm.goal = 3;
  EdgeBeliefs eb{{0.5, 0.9, 0.99, 0.99}};
  EXPECT_EQ(btp_plan(rm, eb, 0.0), (std::vector<std::size_t>{0, 1, 3}));
  EXPECT_EQ(btp_plan(rm, eb, 1e6), (std::vector<std::size_t>{0, 2, 3}));
  EdgeBeliefs blocked{{0.0, 0.9, 0.0, 0.99}};
  EXPECT_THROW(btp_plan(rm, blocked, 1.0), InfeasibleError);
}

TEST(Btp, MatchesBruteForceAndScales) {
  Rng rng(41);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Roadmap rm = connected_roadmap(8, 800 + s);
    EdgeBeliefs eb;
    for (std::size_t e = 0; e < rm.edges.size(); ++e) eb.p_safe.push_back(rng.uniform(0.05, 1.0));
    const double beta = rng.uniform(0.0, 2.0);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : enumerate_paths(rm)) {
      double w = 0;
      for (std::size_t k = 0; k + 1 < p.size(); ++k) {
        const std::size_t e = edge_index(rm, p[k], p[k + 1]);
        w += rm.edges[e].cost - beta * std::log(eb.p_safe[e]);
      }
      best = std::min(best, w);
    }
    const auto path = btp_plan(rm, eb, beta);
    double w = 0;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const std::size_t e = edge_index(rm, path[k], path[k + 1]);
      w += btp_weight(rm.edges[e].cost, eb.p_safe[e], beta);
    }
    EXPECT_NEAR(w, best, 1e-9) << "seed " << s;

    Roadmap scaled = rm;
    for (auto& e : scaled.edges) e.cost *= 3.0;
    EXPECT_EQ(btp_plan(scaled, eb, 3.0 * beta), path);
  }
}
