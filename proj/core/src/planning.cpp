#include "kktplan/planning.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>

namespace kktplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Index of the state coordinate driven by control j.
std::size_t driven_state(const Dynamics& dyn, std::size_t j) {
  return dyn.kind == DynamicsKind::SingleIntegrator ? j : dyn.dim + j;
}

class LatticeGraph {
 public:
  LatticeGraph(const Dynamics& dyn, const Lattice& lat) : dyn_(dyn), lat_(lat) {
    const std::size_t n = dyn.state_dim();
    if (lat.resolution.size() != n) throw ValidationError("lattice.resolution", "one entry per state dimension");
    counts_.resize(n);
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(lat.resolution[i] > 0.0)) throw ValidationError("lattice.resolution", "must be positive");
      counts_[i] = static_cast<std::size_t>(std::floor(dyn.state_bounds.width(i) / lat.resolution[i] + 1e-9)) + 1;
      total *= counts_[i];
      if (total > 50'000'000) throw ValidationError("lattice.resolution", "lattice too large");
    }
    n_cells_ = total;

    const std::size_t m = dyn.control_dim();
    std::vector<long> kmin(m), kmax(m);
    cres_.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      cres_[j] = lat.resolution[driven_state(dyn, j)] / dyn.dt;
      kmin[j] = static_cast<long>(std::ceil(dyn.control_bounds.lo(j) / cres_[j] - 1e-9));
      kmax[j] = static_cast<long>(std::floor(dyn.control_bounds.hi(j) / cres_[j] + 1e-9));
      if (lat.max_step > 0) {
        kmin[j] = std::max(kmin[j], -static_cast<long>(lat.max_step));
        kmax[j] = std::min(kmax[j], static_cast<long>(lat.max_step));
      }
    }
    std::vector<long> k(kmin);
    while (true) {
      std::size_t nonzero = 0;
      for (long v : k) nonzero += v != 0;
      if (lat.diagonal || nonzero <= 1) {
        Point u(m);
        for (std::size_t j = 0; j < m; ++j) u[j] = static_cast<double>(k[j]) * cres_[j];
        prims_.push_back(std::move(u));
      }
      std::size_t j = 0;
      for (; j < m; ++j) {
        if (++k[j] <= kmax[j]) break;
        k[j] = kmin[j];
      }
      if (j == m) break;
    }
  }

  std::size_t n_cells() const { return n_cells_; }
  const std::vector<Point>& primitives() const { return prims_; }

  Point state(std::size_t cell) const {
    Point x(counts_.size());
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      x[i] = dyn_.state_bounds.lo(i) + static_cast<double>(cell % counts_[i]) * lat_.resolution[i];
      cell /= counts_[i];
    }
    return x;
  }

  std::size_t snap(const Point& x) const {
    std::size_t cell = 0, stride = 1;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      const double r = std::round((x[i] - dyn_.state_bounds.lo(i)) / lat_.resolution[i]);
      const auto idx = static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(counts_[i] - 1)));
      cell += idx * stride;
      stride *= counts_[i];
    }
    return cell;
  }

  // Lattice cell of x if x lies on the lattice inside the bounds.
  std::optional<std::size_t> exact_cell(const Point& x) const {
    std::size_t cell = 0, stride = 1;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      const double r = (x[i] - dyn_.state_bounds.lo(i)) / lat_.resolution[i];
      const double ri = std::round(r);
      if (std::abs(r - ri) > 1e-6 || ri < 0 || ri > static_cast<double>(counts_[i] - 1)) return std::nullopt;
      cell += static_cast<std::size_t>(ri) * stride;
      stride *= counts_[i];
    }
    return cell;
  }

 private:
  const Dynamics& dyn_;
  const Lattice& lat_;
  std::vector<std::size_t> counts_;
  std::size_t n_cells_ = 0;
  Point cres_;
  std::vector<Point> prims_;
};

bool known_clear(const Task& task, const Point& x, const Point& x_next, double spacing) {
  if (task.known_unsafe.empty()) return true;
  const std::size_t d = task.dynamics.dim;
  double dist = 0.0;
  for (std::size_t i = 0; i < d; ++i) dist = std::max(dist, std::abs(x_next[i] - x[i]));
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dist / spacing - 1e-12)));
  Point p(d);
  for (std::size_t s = 0; s <= n; ++s) {
    const double a = static_cast<double>(s) / static_cast<double>(n);
    for (std::size_t i = 0; i < d; ++i) p[i] = x[i] + a * (x_next[i] - x[i]);
    for (const auto& b : task.known_unsafe) {
      if (b.contains_strict(p, kStrictTol)) return false;
    }
  }
  return true;
}

bool edge_clear(const Task& task, const ConstraintModel& model, const ForbiddenSet& forbidden, const Point& x,
                const Point& u, const Point& x_next, double spacing) {
  if (!known_clear(task, x, x_next, spacing)) return false;
  for (std::size_t b = 0; b < forbidden.n_blocks(); ++b) {
    if (forbidden.boxes(b).empty()) continue;
    for (const auto& p : step_points(task.dynamics, model.block(b), x, u, x_next, spacing)) {
      if (forbidden.contains(b, p)) return false;
    }
  }
  return true;
}

bool point_clear(const Task& task, const ConstraintModel& model, const ForbiddenSet& forbidden, const Point& x) {
  for (const auto& b : task.known_unsafe) {
    if (b.contains_strict(task.dynamics.position(x), kStrictTol)) return false;
  }
  for (std::size_t b = 0; b < forbidden.n_blocks(); ++b) {
    if (model.block(b).is_scalar_bound()) continue;
    if (forbidden.contains(b, kappa_of_state(task.dynamics, model.block(b).phi, x))) return false;
  }
  return true;
}

}  // namespace

Lattice Lattice::for_dynamics(const Dynamics& dyn, double r, std::size_t max_step, bool diagonal) {
  Lattice lat;
  lat.resolution.assign(dyn.state_dim(), r);
  if (dyn.kind == DynamicsKind::DoubleIntegrator) {
    for (std::size_t i = 0; i < dyn.dim; ++i) lat.resolution[dyn.dim + i] = r / dyn.dt;
  }
  lat.max_step = max_step;
  lat.diagonal = diagonal;
  return lat;
}

double Lattice::spacing() const {
  if (edge_spacing > 0.0) return edge_spacing;
  return 0.5 * *std::min_element(resolution.begin(), resolution.end());
}

ForbiddenSet::ForbiddenSet(const ConstraintModel& model) : boxes_(model.blocks().size()) {}

void ForbiddenSet::add(std::size_t block, const Box& kappa_box) { boxes_.at(block).push_back(kappa_box); }

void ForbiddenSet::add(std::size_t block, const BoxUnion& kappa_set) {
  for (const auto& b : kappa_set) add(block, b);
}

void ForbiddenSet::add_theta_box(const ConstraintModel& model, const Box& theta_box) {
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    for (std::size_t m = 0; m < model.block(b).n_obs; ++m) {
      auto ob = model.outer_obstacle(b, m, theta_box);
      if (!ob) continue;
      if (model.block(b).is_scalar_bound()) {
        Point hi = ob->hi();
        hi[0] = kInf;
        ob = Box(ob->lo(), hi);
      }
      add(b, *ob);
    }
  }
}

bool ForbiddenSet::contains(std::size_t block, std::span<const double> kappa) const {
  const auto& boxes = boxes_[block];
  bool on_boundary = false;
  for (const auto& b : boxes) {
    if (b.contains_strict(kappa, kStrictTol)) return true;
    on_boundary = on_boundary || b.contains(kappa);
  }
  if (!on_boundary) return false;
  // A point on a face shared by two boxes is still interior to the union:
  // test every diagonal neighbour.
  constexpr double kNudge = 1e-7;
  const std::size_t k = kappa.size();
  Point q(k);
  for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
    for (std::size_t i = 0; i < k; ++i) q[i] = kappa[i] + ((mask >> i) & 1 ? kNudge : -kNudge);
    bool inside = false;
    for (const auto& b : boxes) {
      if (b.contains(q, 0.0)) {
        inside = true;
        break;
      }
    }
    if (!inside) return false;
  }
  return true;
}

Point snap_to_lattice(const Dynamics& dyn, const Lattice& lattice, const Point& x) {
  const LatticeGraph g(dyn, lattice);
  return g.state(g.snap(x));
}

bool trajectory_avoids(const Task& task, const ConstraintModel& model, const ForbiddenSet& forbidden,
                       const Trajectory& traj, double spacing) {
  if (traj.states.empty()) return true;
  if (!point_clear(task, model, forbidden, traj.states.front())) return false;
  for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
    if (!edge_clear(task, model, forbidden, traj.states[t], traj.controls[t], traj.states[t + 1], spacing)) {
      return false;
    }
  }
  return true;
}

std::optional<Trajectory> lattice_plan(const Task& task, const ConstraintModel& model, const ForbiddenSet& forbidden,
                                       const Lattice& lattice, const LatticeOptions& opts) {
  const Dynamics& dyn = task.dynamics;
  const LatticeGraph g(dyn, lattice);
  const std::size_t T = opts.horizon ? opts.horizon : task.horizon;
  if (T < 1) throw ValidationError("horizon", "must be at least 1");
  const double spacing = lattice.spacing();
  const std::size_t start = g.snap(task.start), goal = g.snap(task.goal);
  const Point xs = g.state(start);
  if (!point_clear(task, model, forbidden, xs)) return std::nullopt;

  const auto& prims = g.primitives();
  const std::size_t P = prims.size();
  // Waiting at the goal keeps the state only if zero control is a fixed point.
  const Point xg = g.state(goal);
  const bool can_wait = dyn.step(xg, Point(dyn.control_dim(), 0.0)) == xg;

  std::vector<signed char> edge_ok(g.n_cells() * P, -1);
  std::vector<std::uint32_t> edge_to(g.n_cells() * P, 0);
  auto edge = [&](std::size_t cell, std::size_t p) -> std::optional<std::size_t> {
    signed char& ok = edge_ok[cell * P + p];
    if (ok < 0) {
      const Point x = g.state(cell);
      const Point y = dyn.step(x, prims[p]);
      const auto c = g.exact_cell(y);
      ok = c && edge_clear(task, model, forbidden, x, prims[p], y, spacing) ? 1 : 0;
      if (ok) edge_to[cell * P + p] = static_cast<std::uint32_t>(*c);
    }
    if (!ok) return std::nullopt;
    return edge_to[cell * P + p];
  };

  const std::size_t N = g.n_cells();
  std::vector<double> best(N * T, kInf);
  std::vector<std::uint32_t> parent_prim(N * T, 0);
  std::vector<std::uint32_t> parent_cell(N * T, 0);
  using Item = std::tuple<double, std::size_t, std::size_t>;  // cost, t, cell
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  best[start * T] = 0.0;
  open.emplace(0.0, 0, start);
  std::optional<std::pair<std::size_t, std::size_t>> found;
  while (!open.empty()) {
    const auto [cost, t, cell] = open.top();
    open.pop();
    if (cost > best[cell * T + t]) continue;
    // Dominated by an earlier arrival that was at least as cheap.
    bool dominated = false;
    for (std::size_t s = 0; s < t && !dominated; ++s) dominated = best[cell * T + s] <= cost;
    if (dominated) continue;
    if (cell == goal && (can_wait || t + 1 == T)) {
      found = {cell, t};
      break;
    }
    if (t + 1 >= T) continue;
    const Point x = g.state(cell);
    for (std::size_t p = 0; p < P; ++p) {
      const auto next = edge(cell, p);
      if (!next) continue;
      const double c = cost + task.step_cost(x, prims[p], g.state(*next));
      double& b = best[*next * T + t + 1];
      if (c < b) {
        b = c;
        parent_prim[*next * T + t + 1] = static_cast<std::uint32_t>(p);
        parent_cell[*next * T + t + 1] = static_cast<std::uint32_t>(cell);
        open.emplace(c, t + 1, *next);
      }
    }
  }
  if (!found) return std::nullopt;

  Trajectory traj;
  std::vector<std::size_t> cells;
  std::vector<std::size_t> ps;
  for (std::size_t cell = found->first, t = found->second; t > 0; --t) {
    cells.push_back(cell);
    ps.push_back(parent_prim[cell * T + t]);
    cell = parent_cell[cell * T + t];
  }
  traj.states.push_back(xs);
  for (std::size_t k = cells.size(); k-- > 0;) {
    traj.controls.push_back(prims[ps[k]]);
    traj.states.push_back(g.state(cells[k]));
  }
  while (traj.states.size() < T) {
    traj.controls.push_back(Point(dyn.control_dim(), 0.0));
    traj.states.push_back(traj.states.back());
  }
  return traj;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::ChanceConstrained: return "cc";
    case Variant::EpsMin: return "epsmin";
    case Variant::Ratio: return "ratio";
    case Variant::GuaranteedSafe: return "safe";
    case Variant::Scenario: return "scenario";
    case Variant::Optimistic: return "optimistic";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  for (auto v : {Variant::ChanceConstrained, Variant::EpsMin, Variant::Ratio, Variant::GuaranteedSafe,
                 Variant::Scenario, Variant::Optimistic}) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("variant", "unknown planner variant '" + s + "'");
}

std::vector<Box> belief_atoms(const Belief& belief) {
  std::vector<std::pair<double, Box>> atoms;
  for (const auto& b : belief.support()) {
    const double v = relative_volume(b, belief.reference_rank());
    if (v > 0.0) atoms.emplace_back(v, b);
  }
  std::stable_sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return std::lexicographical_compare(a.second.lo().begin(), a.second.lo().end(), b.second.lo().begin(),
                                        b.second.lo().end());
  });
  std::vector<Box> out;
  for (auto& [v, b] : atoms) out.push_back(std::move(b));
  return out;
}

namespace {

std::vector<Box> split_atom(const Box& atom, std::size_t k) {
  std::vector<Box> parts{atom};
  for (std::size_t i = 0; i < atom.dim(); ++i) {
    if (atom.degenerate(i)) continue;
    std::vector<Box> next;
    for (const auto& p : parts) {
      for (std::size_t s = 0; s < k; ++s) {
        Point lo = p.lo(), hi = p.hi();
        lo[i] = atom.lo(i) + atom.width(i) * static_cast<double>(s) / static_cast<double>(k);
        hi[i] = s + 1 == k ? atom.hi(i) : atom.lo(i) + atom.width(i) * static_cast<double>(s + 1) / static_cast<double>(k);
        next.emplace_back(lo, hi);
      }
    }
    parts = std::move(next);
  }
  return parts;
}

Plan make_plan(const Task& task, Trajectory traj, std::vector<Box> chosen, double covered) {
  Plan p;
  p.cost = task.cost_of(traj);
  p.traj = std::move(traj);
  p.chosen_boxes = std::move(chosen);
  p.covered_prob = std::clamp(covered, 0.0, 1.0);
  p.epsilon_achieved = 1.0 - p.covered_prob;
  return p;
}

}  // namespace

std::vector<Plan> greedy_frontier(const Belief& belief, const Task& task, const ConstraintModel& model,
                                  const Lattice& lattice, const CcOptions& opts, double stop_at) {
  if (belief.empty()) throw EmptyBeliefError();
  ForbiddenSet forbidden(model);
  auto base = lattice_plan(task, model, forbidden, lattice);
  if (!base) throw InfeasibleError("no lattice path even without the unknown constraints");
  std::vector<Plan> frontier{make_plan(task, *base, {}, 0.0)};
  if (stop_at <= 0.0) return frontier;

  Trajectory current = *base;
  std::vector<Box> chosen;
  double covered = 0.0;
  const double spacing = lattice.spacing();

  // Tries to honor one more box; true if accepted.
  auto try_add = [&](const Box& box) {
    if (chosen.size() >= opts.n_box_budget) return false;
    ForbiddenSet trial = forbidden;
    trial.add_theta_box(model, box);
    std::optional<Trajectory> traj;
    if (trajectory_avoids(task, model, trial, current, spacing)) {
      traj = current;  // still optimal: the forbidden set only grew
    } else {
      traj = lattice_plan(task, model, trial, lattice);
    }
    if (!traj) return false;
    forbidden = std::move(trial);
    current = std::move(*traj);
    chosen.push_back(box);
    covered += prob_of(belief, box);
    frontier.push_back(make_plan(task, current, chosen, covered));
    return true;
  };

  auto stop = [&] { return covered >= stop_at - 1e-12 || chosen.size() >= opts.n_box_budget; };
  // Honors a box whole, or else its pieces, refining up to split_depth levels.
  std::function<void(const Box&, std::size_t)> honor = [&](const Box& box, std::size_t depth) {
    if (try_add(box) || depth == 0 || opts.k_split < 2) return;
    auto parts = split_atom(box, opts.k_split);
    std::stable_sort(parts.begin(), parts.end(), [&](const Box& a, const Box& b) {
      const double va = relative_volume(a, belief.reference_rank()), vb = relative_volume(b, belief.reference_rank());
      if (va != vb) return va > vb;
      return std::lexicographical_compare(a.lo().begin(), a.lo().end(), b.lo().begin(), b.lo().end());
    });
    for (const auto& part : parts) {
      if (stop()) break;
      honor(part, depth - 1);
    }
  };
  if (opts.free_first) {
    // Finest pieces, heaviest first; those the base path already avoids cost nothing.
    std::size_t k = 1;
    for (std::size_t i = 0; i < opts.split_depth; ++i) k *= std::max<std::size_t>(opts.k_split, 1);
    std::vector<Box> leaves;
    for (const auto& atom : belief_atoms(belief)) {
      for (auto& leaf : split_atom(atom, k)) {
        if (prob_of(belief, leaf) > 0.0) leaves.push_back(std::move(leaf));
      }
    }
    std::stable_sort(leaves.begin(), leaves.end(),
                     [&](const Box& a, const Box& b) { return prob_of(belief, a) > prob_of(belief, b); });
    std::vector<Box> rest;
    for (const auto& leaf : leaves) {
      ForbiddenSet trial = forbidden;
      trial.add_theta_box(model, leaf);
      if (!trajectory_avoids(task, model, trial, current, spacing) || !try_add(leaf)) rest.push_back(leaf);
    }
    for (const auto& leaf : rest) {
      if (stop()) break;
      try_add(leaf);
    }
    return frontier;
  }
  for (const auto& atom : belief_atoms(belief)) {
    if (stop()) break;
    honor(atom, opts.split_depth);
  }
  return frontier;
}

Plan plan_cc(const Belief& belief, const Task& task, const ConstraintModel& model, double eps,
             const Lattice& lattice, const CcOptions& opts) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("eps", "must lie in [0, 1]");
  const double target = 1.0 - eps;
  auto frontier = greedy_frontier(belief, task, model, lattice, opts, target);
  Plan& last = frontier.back();
  if (last.covered_prob < target - 1e-9) {
    throw InfeasibleError("chance constraint unreachable: best coverage " + std::to_string(last.covered_prob));
  }
  return last;
}

Plan plan_eps_min(const Belief& belief, const Task& task, const ConstraintModel& model, const Lattice& lattice,
                  const CcOptions& opts) {
  auto frontier = greedy_frontier(belief, task, model, lattice, opts);
  std::size_t pick = 0;
  for (std::size_t i = 1; i < frontier.size(); ++i) {
    const Plan& a = frontier[i];
    const Plan& b = frontier[pick];
    if (a.covered_prob > b.covered_prob + 1e-12 || (std::abs(a.covered_prob - b.covered_prob) <= 1e-12 && a.cost < b.cost)) {
      pick = i;
    }
  }
  return frontier[pick];
}

Plan plan_ratio(const Belief& belief, const Task& task, const ConstraintModel& model, const Lattice& lattice,
                const CcOptions& opts) {
  // Whole-atom accumulation misses cheap partial coverage, so the free-first
  // ordering is searched as well.
  auto frontier = greedy_frontier(belief, task, model, lattice, opts);
  if (!opts.free_first && opts.k_split >= 2 && opts.split_depth > 0) {
    CcOptions alt = opts;
    alt.free_first = true;
    for (auto& p : greedy_frontier(belief, task, model, lattice, alt)) frontier.push_back(std::move(p));
  }
  std::optional<std::size_t> pick;
  double best = kInf;
  for (std::size_t i = 0; i < frontier.size(); ++i) {
    if (frontier[i].covered_prob <= 0.0) continue;
    const double r = frontier[i].cost / frontier[i].covered_prob;
    if (r < best - 1e-12 || (pick && std::abs(r - best) <= 1e-12 && frontier[i].covered_prob > frontier[*pick].covered_prob)) {
      best = std::min(best, r);
      pick = i;
    }
  }
  if (!pick) throw InfeasibleError("no plan with positive safety probability");
  return frontier[*pick];
}

Trajectory plan_guaranteed_safe(const BoxUnion& f_theta, const Task& task, const ConstraintModel& model,
                                const Lattice& lattice) {
  // Every obstacle any consistent parameter can produce; equals g_unsafe plus possibly_unsafe.
  ForbiddenSet forbidden(model);
  for (const auto& piece : f_theta) forbidden.add_theta_box(model, piece);
  auto traj = lattice_plan(task, model, forbidden, lattice);
  if (!traj) throw InfeasibleError("no path avoids every possibly unsafe state");
  return *traj;
}

namespace {

// Guaranteed-unsafe states including flat pieces, e.g. a single point learned by contact.
std::vector<Box> closed_guaranteed_unsafe(const BoxUnion& f_theta, const ConstraintModel& model, std::size_t b) {
  std::vector<Box> acc;
  bool first = true;
  for (const auto& piece : f_theta) {
    std::vector<Box> mine;
    for (std::size_t m = 0; m < model.block(b).n_obs; ++m) {
      if (auto in = model.inner_obstacle(b, m, piece, true)) mine.push_back(*in);
    }
    if (first) {
      acc = std::move(mine);
      first = false;
      continue;
    }
    std::vector<Box> next;
    Box out;
    for (const auto& a : acc) {
      for (const auto& c : mine) {
        if (intersect(a, c, out)) next.push_back(out);
      }
    }
    acc = std::move(next);
    if (acc.empty()) break;
  }
  return acc;
}

// Closed guaranteed-unsafe states, inflated by `buffer` along uncertain axes.
ForbiddenSet guaranteed_unsafe_forbidden(const BoxUnion& f_theta, const ConstraintModel& model, double buffer) {
  ForbiddenSet forbidden(model);
  const Box hull = f_theta.hull();
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    const auto& blk = model.block(b);
    std::vector<char> uncertain(blk.kappa_dim, 0);
    for (std::size_t m = 0; m < blk.n_obs; ++m) {
      for (std::size_t a = 0; a < (blk.is_scalar_bound() ? 1 : blk.kappa_dim); ++a) {
        for (bool up : {false, true}) {
          if (blk.is_scalar_bound() && up) continue;
          if (!hull.degenerate(blk.theta_index(m, a, up))) uncertain[a] = 1;
        }
      }
    }
    for (const auto& box : closed_guaranteed_unsafe(f_theta, model, b)) {
      Point lo = box.lo(), hi = box.hi();
      for (std::size_t a = 0; a < blk.kappa_dim; ++a) {
        // The boundary of the closure is unsafe for almost every parameter, so pad it into the interior.
        const double pad = (uncertain[a] ? buffer : 0.0) + kActiveTol;
        lo[a] -= pad;
        hi[a] += pad;
      }
      forbidden.add(b, Box(lo, hi));
    }
  }
  return forbidden;
}

}  // namespace

Plan plan_scenario(const Belief& belief, const Task& task, const ConstraintModel& model, const Lattice& lattice,
                   const ScenarioOptions& opts) {
  if (belief.empty()) throw EmptyBeliefError();
  // Every sample shares the guaranteed-unsafe states, so they are enforced from the start.
  ForbiddenSet forbidden = guaranteed_unsafe_forbidden(belief.support(), model, 0.0);
  auto base = lattice_plan(task, model, forbidden, lattice);
  if (!base) throw InfeasibleError("no lattice path even without the unknown constraints");
  Trajectory current = *base;
  std::vector<Point> used;
  const double spacing = lattice.spacing();
  for (const auto& theta : sample_belief(belief, opts.max_samples, opts.seed)) {
    ForbiddenSet trial = forbidden;
    trial.add_theta_box(model, Box::point(theta));
    std::optional<Trajectory> traj;
    if (trajectory_avoids(task, model, trial, current, spacing)) {
      traj = current;
    } else {
      traj = lattice_plan(task, model, trial, lattice);
    }
    if (!traj) break;
    forbidden = std::move(trial);
    current = std::move(*traj);
    used.push_back(theta);
  }
  Plan p = make_plan(task, current, {}, prob_traj_safe(belief, task, model, current, spacing));
  p.samples = std::move(used);
  return p;
}

Trajectory plan_optimistic(const BoxUnion& f_theta, const Task& task, const ConstraintModel& model,
                           const Lattice& lattice, double buffer) {
  if (buffer < 0.0) throw ValidationError("buffer", "must be non-negative");
  const ForbiddenSet forbidden = guaranteed_unsafe_forbidden(f_theta, model, buffer);
  auto traj = lattice_plan(task, model, forbidden, lattice);
  if (!traj) throw InfeasibleError("no path avoids the guaranteed unsafe states");
  return *traj;
}

}  // namespace kktplan
