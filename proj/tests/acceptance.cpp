// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <cli.hpp>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "kktplan/belief.hpp"
#include "kktplan/extraction.hpp"
#include "kktplan/kkt.hpp"
#include "kktplan/planning.hpp"
#include "kktplan/rng.hpp"
#include "kktplan/sampled_planners.hpp"
#include "kktplan/sim.hpp"

using namespace kktplan;
namespace fs = std::filesystem;

namespace {

// Tolerances, pinned.
constexpr double kExtractSymDiff = 0.02;      // fraction of oracle volume
constexpr std::size_t kCarveIterations = 100;
constexpr double kExtractSeconds = 60.0;
constexpr double kScalarEndpoint = 1e-6;
constexpr double kCcSlack = 0.02;
constexpr std::size_t kCcSamples = 10000;
constexpr std::size_t kLawEpisodes = 100000;
constexpr double kLawTv = 0.01;
constexpr double kSpotValue = 0.1696, kSpotTol = 0.005;
constexpr std::size_t kOrderingDraws = 500;
constexpr double kOrderingSigmas = 2.0;
constexpr std::size_t kMazeDraws = 200;
constexpr double kMcrSeconds = 5.0;
constexpr double kBtpTol = 1e-9;
constexpr std::size_t kBeliefSamples = 10000, kBeliefProbes = 1000;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %2d %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), s);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Lattice hinted_lattice(const Scenario& sc) {
  return Lattice::for_dynamics(sc.task.dynamics, sc.lattice.resolution, sc.lattice.max_step, sc.lattice.diagonal);
}

// ---- 1 ---------------------------------------------------------------------

// Random one-obstacle workspace: obstacle and prior on the 0.05 lattice, one
// or two demos along lattice rows or columns, synthesized under the truth.
std::optional<Scenario> random_extraction_scenario(std::uint64_t seed) {
  Rng rng(seed);
  auto q = [&](double lo, double hi) { return 0.05 * std::round(rng.uniform(lo, hi) / 0.05); };
  Scenario sc;
  sc.task.dynamics = fixtures::single_integrator_2d();
  sc.task.horizon = 9;
  sc.task.cost = CostKind::SumSquaredControl;
  sc.task.known_unsafe = BoxUnion(2);
  const double x0 = q(0.25, 0.5), y0 = q(0.25, 0.5);
  const Point theta{x0, y0, x0 + q(0.1, 0.25), y0 + q(0.1, 0.25)};
  const double w = 0.2;
  sc.model = ConstraintModel::make(sc.task.dynamics, {PhiKind::StateProjection}, {1},
                                   Box({theta[0] - w, theta[1] - w, theta[2] - w, theta[3] - w},
                                       {theta[0] + w, theta[1] + w, theta[2] + w, theta[3] + w}));
  const std::size_t n_demos = 1 + rng.below(2);
  for (std::size_t k = 0; k < n_demos; ++k) {
    const double c = 0.05 * static_cast<double>(2 + rng.below(17));
    Task t = sc.task;
    if (rng.below(2)) {
      t.start = {0.1, c};
      t.goal = {0.9, c};
    } else {
      t.start = {c, 0.1};
      t.goal = {c, 0.9};
    }
    try {
      sc.demos.push_back(synthesize_demo(t, sc.model, theta));
    } catch (const std::exception&) {
      return std::nullopt;
    }
    sc.task.start = t.start;
    sc.task.goal = t.goal;
  }
  return sc;
}

Outcome criterion_extraction() {
  Outcome o;
  std::size_t done = 0, degenerate = 0;
  double worst = 0.0, worst_time = 0.0;
  std::size_t worst_iter = 0;
  for (std::uint64_t seed = 1; done < 5 && seed < 200; ++seed) {
    auto sc = random_extraction_scenario(seed);
    if (!sc) continue;
    const std::vector<Trajectory>& demos = sc->demos;
    const auto t0 = std::chrono::steady_clock::now();
    const Extractor ex(sc->task, sc->model, demos);
    const BoxUnion f = ex.extract().f_theta;
    ExtractionOptions carve;
    carve.engine = Engine::Carve;
    const ExtractionResult rc = extract(demos, sc->task, sc->model, carve);
    const double elapsed = seconds_since(t0);
    const BoxUnion grid = ex.grid_oracle(0.05, sc->model.theta_prior());
    const double vg = union_volume(grid);
    if (!(vg > 0.0)) {
      // A volume comparison says nothing about a measure-zero set.
      ++degenerate;
      continue;
    }
    const double sd = (union_volume(subtract(grid, f)) + union_volume(subtract(f, grid))) / vg;
    const double sdc = (union_volume(subtract(grid, rc.f_theta)) + union_volume(subtract(rc.f_theta, grid))) / vg;
    worst = std::max({worst, sd, sdc});
    worst_iter = std::max(worst_iter, rc.iterations);
    worst_time = std::max(worst_time, elapsed);
    if (sd > kExtractSymDiff || sdc > kExtractSymDiff || rc.iterations > kCarveIterations ||
        elapsed > kExtractSeconds) {
      o.pass = false;
    }
    ++done;
  }
  if (done < 5) o.pass = false;
  o.detail = std::to_string(done) + " scenarios (" + std::to_string(degenerate) +
             " measure-zero skipped), worst symdiff " + fmt("%.4f", worst) + ", carve iterations <= " +
             std::to_string(worst_iter) + ", slowest " + fmt("%.2f s", worst_time);
  return o;
}

// ---- 2 ---------------------------------------------------------------------

Outcome criterion_scalar() {
  const Scenario sc = fixtures::scalar_bound();
  Outcome o;
  double lo_err = 0.0, hi_err = 0.0, split_err = 0.0;
  for (Engine e : {Engine::Enumerate, Engine::Carve}) {
    ExtractionOptions opts;
    opts.engine = e;
    const ExtractionResult r = extract(sc.demos, sc.task, sc.model, opts);
    if (r.f_theta.empty()) return {false, "empty parameter set"};
    const Box h = r.f_theta.hull();
    lo_err = std::max(lo_err, std::abs(h.lo(0) - 97.85));
    hi_err = std::max(hi_err, std::abs(h.hi(0) - 100.0));
    // A gap inside the hull would make it more than one interval.
    if (std::abs(union_volume(r.f_theta) - box_volume(h)) > kScalarEndpoint) o.pass = false;
    const GuaranteedSets g = guaranteed_sets(r, sc.model);
    if (g.g_safe.empty()) return {false, "no guaranteed-safe set"};
    split_err = std::max(split_err, std::abs(g.g_safe.hull().hi(0) - 97.85));
    if (!g.g_unsafe.empty()) o.pass = false;
  }
  if (lo_err > kScalarEndpoint || hi_err > kScalarEndpoint || split_err > kScalarEndpoint) o.pass = false;
  o.detail = "endpoint error " + fmt("%.2e", std::max(lo_err, hi_err)) + ", split error " + fmt("%.2e", split_err);
  return o;
}

// ---- 3 ---------------------------------------------------------------------

// True if the trajectory enters an obstacle under theta. State maps are
// checked on a fine interpolation, independent of the planner's spacing.
bool traj_unsafe(const Scenario& sc, const Trajectory& traj, std::span<const double> theta) {
  const Dynamics& dyn = sc.task.dynamics;
  for (std::size_t b = 0; b < sc.model.blocks().size(); ++b) {
    const ConstraintBlock& blk = sc.model.block(b);
    if (blk.phi == PhiKind::ControlNormSquared) {
      for (const auto& u : traj.controls) {
        double s = 0.0;
        for (double v : u) s += v * v;
        const Point k{s};
        if (sc.model.block_g(b, theta, k) > kStrictTol) return true;
      }
      continue;
    }
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
      const Point a = dyn.position(traj.states[t]);
      const Point c = t + 1 < traj.states.size() ? dyn.position(traj.states[t + 1]) : a;
      const int n = t + 1 < traj.states.size() ? 200 : 0;
      for (int i = 0; i <= n; ++i) {
        const double s = n ? static_cast<double>(i) / n : 0.0;
        Point p(a.size());
        for (std::size_t d = 0; d < a.size(); ++d) p[d] = a[d] + s * (c[d] - a[d]);
        if (sc.model.block_g(b, theta, p) > kStrictTol) return true;
      }
    }
  }
  return false;
}

// Exact best single-gate safety on the gate wall: a path through the wall
// crosses one gate row y, safe iff y <= lo or y >= hi, lo and hi independent
// and uniform on the prior.
double best_gate_safety(const Scenario& sc, const std::vector<double>& gates) {
  const Box& pr = sc.model.theta_prior();
  const double lo0 = pr.lo(1), lo1 = pr.hi(1), hi0 = pr.lo(3), hi1 = pr.hi(3);
  double best = 0.0;
  for (double y : gates) {
    const double pa = std::clamp((lo1 - y) / (lo1 - lo0), 0.0, 1.0);
    const double pb = std::clamp((y - hi0) / (hi1 - hi0), 0.0, 1.0);
    best = std::max(best, pa + pb - pa * pb);
  }
  return best;
}

Outcome criterion_chance() {
  Outcome o;
  struct Case {
    std::string name;
    Scenario sc;
    Belief belief;
    std::optional<double> certified_best;  // exact best safety, when known
  };
  std::vector<Case> cases;
  {
    Scenario sc = fixtures::toy_t1();
    Belief b = belief_from_extraction(extract(sc.demos, sc.task, sc.model));
    cases.push_back({"toy", sc, b, std::nullopt});
  }
  {
    Scenario sc = fixtures::maze_shortcut();
    Belief b = belief_from_support(BoxUnion{sc.model.theta_prior()});
    cases.push_back({"maze", sc, b, std::nullopt});
  }
  const std::vector<double> gates{0.1, 0.3, 0.5, 0.7, 0.9};
  {
    Scenario sc = fixtures::gate_wall(gates);
    Belief b = belief_from_support(BoxUnion{sc.model.theta_prior()});
    cases.push_back({"gate", sc, b, best_gate_safety(sc, gates)});
  }
  std::string detail;
  std::size_t evaluated = 0;
  for (const auto& c : cases) {
    for (double eps : {0.1, 0.3}) {
      const std::string tag = c.name + "@" + fmt("%.1f", eps);
      Plan plan;
      try {
        plan = plan_cc(c.belief, c.sc.task, c.sc.model, eps, hinted_lattice(c.sc));
      } catch (const InfeasibleError&) {
        // Acceptable only when no plan can reach the level at all.
        const bool certified = c.certified_best && *c.certified_best < 1.0 - eps;
        if (!certified) o.pass = false;
        detail += tag + " infeasible" +
                  (c.certified_best ? " (best possible " + fmt("%.3f", *c.certified_best) + ")" : "") + "; ";
        continue;
      }
      if (plan.covered_prob < 1.0 - eps - 1e-12) o.pass = false;
      const auto thetas = sample_belief(c.belief, kCcSamples, 1000 + evaluated);
      std::size_t bad = 0;
      for (const auto& th : thetas) bad += traj_unsafe(c.sc, plan.traj, th);
      const double frac = static_cast<double>(bad) / static_cast<double>(thetas.size());
      if (frac > eps + kCcSlack) o.pass = false;
      detail += tag + " viol " + fmt("%.4f", frac) + " cov " + fmt("%.3f", plan.covered_prob) + "; ";
      ++evaluated;
    }
  }
  if (evaluated < 3) o.pass = false;
  o.detail = detail;
  return o;
}

// ---- 4 ---------------------------------------------------------------------

Outcome criterion_law() {
  Outcome o;
  const OverrideLaw spot = theoretical_override_law({0.6910, 0.5490});
  const double p1 = spot.probs.size() > 1 ? spot.probs[1] : -1.0;
  if (std::abs(p1 - kSpotValue) > kSpotTol) o.pass = false;

  const Scenario sc = fixtures::gate_wall();
  const Belief belief = belief_from_support(BoxUnion{sc.model.theta_prior()});
  PolicyConfig cfg;
  cfg.lattice = hinted_lattice(sc);
  const auto tree = build_tree(belief, sc.task, cfg, sc.model);
  const auto chain = override_chain(*tree);
  if (!chain) return {false, "tree is not a sequential contingency chain"};
  BenchmarkOptions bo;
  bo.n_trials = kLawEpisodes;
  bo.seed = 20;
  const auto res = benchmark(sc.task, sc.model, belief, {{"epsmin", cfg}}, bo).front();
  const double tv = total_variation(violation_histogram(res.violations), theoretical_override_law(*chain));
  if (tv > kLawTv) o.pass = false;
  o.detail = "TV " + fmt("%.4f", tv) + " over " + std::to_string(kLawEpisodes) + " episodes, chain length " +
             std::to_string(chain->size()) + ", spot P(1) " + fmt("%.4f", p1);
  return o;
}

// ---- 5 ---------------------------------------------------------------------

Outcome criterion_ordering() {
  const Scenario sc = fixtures::gate_wall_mixed();
  const Belief belief = belief_from_support(BoxUnion{sc.model.theta_prior()});
  PolicyConfig base;
  base.lattice = hinted_lattice(sc);
  std::vector<NamedPolicy> pols;
  for (PolicyPlanner p : {PolicyPlanner::EpsMin, PolicyPlanner::Scenario, PolicyPlanner::Optimistic}) {
    PolicyConfig c = base;
    c.planner = p;
    pols.push_back({to_string(p), c});
  }
  BenchmarkOptions bo;
  bo.n_trials = kOrderingDraws;
  bo.seed = 5;
  const auto res = benchmark(sc.task, sc.model, belief, pols, bo);
  Outcome o;
  o.detail = "means";
  for (const auto& m : res) o.detail += " " + m.name + " " + fmt("%.3f", m.mean_violations);
  for (std::size_t i = 1; i < res.size(); ++i) {
    const std::size_t n = res[i].violations.size();
    std::vector<double> d(n);
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      d[k] = static_cast<double>(res[i].violations[k]) - static_cast<double>(res[i - 1].violations[k]);
      mean += d[k];
    }
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : d) var += (x - mean) * (x - mean);
    const double se = std::sqrt(var / static_cast<double>(n - 1) / static_cast<double>(n));
    o.detail += "; " + res[i].name + "-" + res[i - 1].name + " " + fmt("%.3f", mean) + " (" +
                fmt("%.1f sigma)", se > 0 ? mean / se : 0.0);
    if (!(mean > kOrderingSigmas * se)) o.pass = false;
  }
  return o;
}

// ---- 6 ---------------------------------------------------------------------

Outcome criterion_maze() {
  const Scenario sc = fixtures::maze_shortcut();
  const Belief belief = belief_from_support(BoxUnion{sc.model.theta_prior()});
  PolicyConfig base;
  base.lattice = hinted_lattice(sc);
  const double safe_cost = sc.task.cost_of(plan_guaranteed_safe(belief.support(), sc.task, sc.model, base.lattice));
  PolicyConfig ratio = base, safe = base;
  ratio.planner = PolicyPlanner::Ratio;
  safe.planner = PolicyPlanner::GuaranteedSafe;
  BenchmarkOptions bo;
  bo.n_trials = kMazeDraws;
  bo.seed = 6;
  const auto res = benchmark(sc.task, sc.model, belief, {{"ratio", ratio}, {"safe", safe}}, bo);
  std::size_t safe_viol = 0;
  for (std::size_t v : res[1].violations) safe_viol += v;
  Outcome o;
  o.pass = safe_cost >= res[0].mean_cost && safe_viol == 0;
  o.detail = "safe cost " + fmt("%.3f", safe_cost) + ", ratio executed cost " + fmt("%.3f", res[0].mean_cost) +
             ", ratio violations " + fmt("%.3f", res[0].mean_violations) + ", safe violations " +
             std::to_string(safe_viol);
  return o;
}

// ---- 7, 8 ------------------------------------------------------------------

std::vector<std::vector<std::size_t>> simple_paths(const Roadmap& rm) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> path{rm.start};
  std::vector<char> seen(rm.vertices.size(), 0);
  seen[rm.start] = 1;
  const auto adj = rm.adjacency();
  std::function<void(std::size_t)> go = [&](std::size_t v) {
    if (v == rm.goal) {
      out.push_back(path);
      return;
    }
    for (const auto& [w, e] : adj[v]) {
      if (seen[w]) continue;
      seen[w] = 1;
      path.push_back(w);
      go(w);
      path.pop_back();
      seen[w] = 0;
    }
  };
  go(rm.start);
  return out;
}

std::size_t find_edge(const Roadmap& rm, std::size_t a, std::size_t b) {
  for (std::size_t e = 0; e < rm.edges.size(); ++e) {
    if ((rm.edges[e].u == a && rm.edges[e].v == b) || (rm.edges[e].u == b && rm.edges[e].v == a)) return e;
  }
  throw std::logic_error("path uses a missing edge");
}

Roadmap connected_roadmap(std::size_t n, std::uint64_t seed) {
  for (std::uint64_t s = seed;; s += 7919) {
    Roadmap rm = random_roadmap(Box({0, 0}, {1, 1}), n, 0.5, s);
    if (!simple_paths(rm).empty()) return rm;
  }
}

// Does the straight edge cross obstacle theta? Fine sampling, own oracle.
bool edge_hits(const Roadmap& rm, std::size_t e, const ConstraintModel& model, const Point& theta) {
  const Point& a = rm.vertices[rm.edges[e].u];
  const Point& b = rm.vertices[rm.edges[e].v];
  for (int i = 0; i <= 400; ++i) {
    const double s = i / 400.0;
    const Point p{a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])};
    if (model.block_g(0, theta, p) > kStrictTol) return true;
  }
  return false;
}

Outcome criterion_mcr() {
  const ConstraintModel model = ConstraintModel::make(fixtures::single_integrator_2d(), {PhiKind::StateProjection},
                                                      {1}, Box({0.1, 0.1, 0.3, 0.3}, {0.5, 0.5, 0.9, 0.9}));
  Outcome o;
  Rng rng(70);
  double slowest = 0.0;
  std::size_t mismatches = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const std::size_t nv = 6 + rng.below(7), ns = 1 + rng.below(8);
    const Roadmap rm = connected_roadmap(nv, 700 + k);
    const auto samples = sample_uniform(BoxUnion{model.theta_prior()}, ns, 7000 + k);
    const auto t0 = std::chrono::steady_clock::now();
    SampledOptions so;
    so.spacing = 0.0025;
    const McrResult r = mcr_plan(rm, samples, model, so);
    slowest = std::max(slowest, seconds_since(t0));
    std::vector<std::vector<char>> hit(rm.edges.size(), std::vector<char>(ns, 0));
    for (std::size_t e = 0; e < rm.edges.size(); ++e) {
      for (std::size_t j = 0; j < ns; ++j) hit[e][j] = edge_hits(rm, e, model, samples[j]);
    }
    auto count = [&](const std::vector<std::size_t>& p) {
      std::vector<char> v(ns, 0);
      for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        const std::size_t e = find_edge(rm, p[i], p[i + 1]);
        for (std::size_t j = 0; j < ns; ++j) v[j] |= hit[e][j];
      }
      return static_cast<std::size_t>(std::count(v.begin(), v.end(), 1));
    };
    std::size_t best = std::numeric_limits<std::size_t>::max();
    for (const auto& p : simple_paths(rm)) best = std::min(best, count(p));
    if (r.violated.size() != best || count(r.path) != best) ++mismatches;
  }
  o.pass = mismatches == 0 && slowest <= kMcrSeconds;
  o.detail = std::to_string(mismatches) + " mismatches in 20 roadmaps, slowest " + fmt("%.3f s", slowest);
  return o;
}

Outcome criterion_btp() {
  Outcome o;
  Rng rng(80);
  std::size_t mismatches = 0, beta0_mismatches = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Roadmap rm = connected_roadmap(5 + rng.below(6), 800 + k);
    EdgeBeliefs eb;
    for (std::size_t e = 0; e < rm.edges.size(); ++e) eb.p_safe.push_back(rng.uniform(0.05, 1.0));
    const double beta = rng.uniform(0.1, 2.0);
    const auto paths = simple_paths(rm);
    auto weight = [&](const std::vector<std::size_t>& p, double b) {
      double w = 0.0;
      for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        const std::size_t e = find_edge(rm, p[i], p[i + 1]);
        w += rm.edges[e].cost - b * std::log(eb.p_safe[e]);
      }
      return w;
    };
    for (double b : {beta, 0.0}) {
      double best = std::numeric_limits<double>::infinity();
      std::vector<std::size_t> arg;
      for (const auto& p : paths) {
        const double w = weight(p, b);
        if (w < best - kBtpTol) {
          best = w;
          arg = p;
        }
      }
      const auto got = btp_plan(rm, eb, b);
      // Equal weights within tolerance count as the same argmin.
      const bool same = got == arg || std::abs(weight(got, b) - best) <= kBtpTol;
      if (!same) ++(b == 0.0 ? beta0_mismatches : mismatches);
    }
  }
  o.pass = mismatches == 0 && beta0_mismatches == 0;
  o.detail = std::to_string(mismatches) + " mismatches at random beta, " + std::to_string(beta0_mismatches) +
             " at beta 0 (shortest path), 20 graphs";
  return o;
}

// ---- 9 ---------------------------------------------------------------------

Outcome criterion_belief() {
  Scenario sc = fixtures::toy_t1();
  const Belief prior = belief_from_extraction(extract(sc.demos, sc.task, sc.model));
  // Scripted: every kind, points around the uncertain region.
  std::vector<Measurement> script{
      {MeasurementKind::ExactSafe, {{0.45, 0.3}}, 0},
      {MeasurementKind::AmbiguousUnsafe, {{0.3, 0.7}, {0.55, 0.75}}, 0},
      {MeasurementKind::AmbiguousSafe, {{0.35, 0.65}, {0.5, 0.25}}, 0},
      {MeasurementKind::ExactUnsafe, {{0.4, 0.72}}, 0},
      {MeasurementKind::ExactSafe, {{0.58, 0.78}, {0.25, 0.62}}, 0},
  };
  Belief fwd = prior;
  for (const auto& m : script) fwd = update(fwd, m, sc.model);
  if (fwd.empty()) return {false, "scripted sequence emptied the belief"};
  std::size_t unsound = 0;
  for (const auto& th : sample_belief(fwd, kBeliefSamples, 9)) {
    for (const auto& m : script) unsound += !satisfies(m, sc.model, th);
  }
  std::vector<std::size_t> order{3, 0, 4, 2, 1};
  Belief rev = prior;
  for (std::size_t i : order) rev = update(rev, script[i], sc.model);
  std::size_t disagree = 0;
  Rng rng(99);
  const Box& pr = sc.model.theta_prior();
  // Probes: half from the posterior, half from the prior box.
  const auto inside = sample_belief(fwd, kBeliefProbes / 2, 10);
  for (std::size_t k = 0; k < kBeliefProbes; ++k) {
    Point th(pr.dim());
    if (k < inside.size()) {
      th = inside[k];
    } else {
      for (std::size_t i = 0; i < pr.dim(); ++i) th[i] = rng.uniform(pr.lo(i), pr.hi(i));
    }
    disagree += fwd.support().contains(th) != rev.support().contains(th);
  }
  Outcome o;
  o.pass = unsound == 0 && disagree == 0 && std::abs(fwd.total_volume() - rev.total_volume()) <= 1e-12;
  o.detail = std::to_string(unsound) + " unsound samples of " + std::to_string(kBeliefSamples) + ", " +
             std::to_string(disagree) + " order disagreements of " + std::to_string(kBeliefProbes) +
             ", posterior mass " + fmt("%.4f", fwd.total_volume() / prior.total_volume());
  return o;
}

// ---- 10 --------------------------------------------------------------------

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome criterion_rerun() {
  const fs::path dir = fs::temp_directory_path() / "kktplan_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto out = [&](const std::string& n) { return (dir / n).string(); };
  auto scen = [](const std::string& n) { return std::string(KKTPLAN_SCENARIO_DIR) + "/" + n; };
  const std::vector<std::vector<std::string>> commands{
      {"extract", "--scenario", scen("toy_t1.json"), "--out", out("f.json")},
      {"plan", "--scenario", scen("maze_shortcut.json"), "--variant", "ratio", "--out", out("ratio.json")},
      {"plan", "--scenario", scen("toy_t1.json"), "--variant", "cc", "--eps", "0.1", "--out", out("cc.json")},
      {"plan", "--scenario", scen("gate_wall.json"), "--variant", "mcr", "--samples", "8", "--seed", "4", "--out",
       out("mcr.json")},
      {"simulate", "--scenario", scen("gate_mixed.json"), "--policy", "epsmin", "--trials", "4", "--seed", "3",
       "--out", out("trace.csv")},
      {"simulate", "--scenario", scen("gate_wall.json"), "--tree-depth", "3", "--seed", "8", "--out",
       out("tree.csv")},
      {"benchmark", "--scenario", scen("gate_wall.json"), "--policies", "epsmin,scenario,optimistic", "--trials",
       "50", "--seed", "2", "--out", out("metrics.csv")},
      {"plot", "--scenario", scen("toy_t1.json"), "--belief", out("f.json"), "--plan", out("cc.json"), "--out",
       out("toy.svg")},
      {"plot", "--scenario", scen("gate_wall.json"), "--trace", out("tree.csv"), "--tree-depth", "2", "--out",
       out("gate.svg")},
  };
  std::size_t files = 0, differing = 0;
  std::string bad;
  for (const auto& args : commands) {
    if (cli::run(args) != 0) return {false, args[0] + " failed"};
    const std::string manifest = cli::manifest_path(args.back());
    const auto m = nlohmann::json::parse(slurp(manifest));
    std::vector<std::pair<std::string, std::string>> before;
    for (const auto& f : m.at("outputs")) before.emplace_back(f.get<std::string>(), slurp(f.get<std::string>()));
    for (const auto& [f, bytes] : before) fs::remove(f);
    if (cli::run({"rerun", "--manifest", manifest}) != 0) return {false, args[0] + " rerun failed"};
    for (const auto& [f, bytes] : before) {
      ++files;
      if (slurp(f) != bytes) {
        ++differing;
        bad += " " + fs::path(f).filename().string();
      }
    }
  }
  fs::remove_all(dir);
  Outcome o;
  o.pass = differing == 0 && files > 0;
  o.detail = std::to_string(commands.size()) + " commands, " + std::to_string(files) + " files, " +
             std::to_string(differing) + " differ" + bad;
  return o;
}

}  // namespace

int main() {
  report(1, "extraction vs grid oracle", criterion_extraction);
  report(2, "scalar bound recovery", criterion_scalar);
  report(3, "chance-constraint safety", criterion_chance);
  report(4, "override histogram law", criterion_law);
  report(5, "baseline ordering", criterion_ordering);
  report(6, "guaranteed-safe conservatism", criterion_maze);
  report(7, "mcr exactness", criterion_mcr);
  report(8, "btp exactness", criterion_btp);
  report(9, "belief update soundness", criterion_belief);
  report(10, "rerun determinism", criterion_rerun);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
