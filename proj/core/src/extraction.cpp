#include "kktplan/extraction.hpp"

#include <algorithm>
#include <chrono>
#include <exception>
#include <functional>
#include <cmath>
#include <limits>
#include <set>
#include <thread>
#include <tuple>

namespace kktplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Event {
  std::uint32_t dir;
  std::size_t block, m, axis;
  bool upper;
  std::size_t t;
  double value;
};

// Per-coordinate interval state of a partial activation pattern.
struct PatternState {
  Point lo, hi;
  std::vector<char> pinned;
};

bool lex_less(const Point& a, const Point& b) { return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()); }

// Ranking key for candidate boxes: higher rank, then larger measure, then smaller lo.
bool better_box(const Box& a, const Box& b) {
  if (a.rank() != b.rank()) return a.rank() > b.rank();
  const double va = relative_volume(a, a.rank()), vb = relative_volume(b, b.rank());
  if (std::abs(va - vb) > 1e-12 * std::max(va, vb)) return va > vb;
  return lex_less(a.lo(), b.lo());
}

bool contained_in(const Box& b, const BoxUnion& u) {
  const std::size_t r = b.rank();
  const double vol = relative_volume(b, r);
  BoxUnion rest{b};
  for (const auto& piece : u) {
    rest = subtract(rest, piece);
    if (rest.empty()) return true;
  }
  return relative_volume(rest, r) <= 1e-12 * std::max(vol, 1e-300);
}

// Grows b face by face over the breakpoints of u while it stays inside u.
Box grow_box(Box b, const BoxUnion& u) {
  const std::size_t d = b.dim();
  std::vector<std::vector<double>> grid(d);
  for (std::size_t i = 0; i < d; ++i) {
    for (const auto& p : u) {
      grid[i].push_back(p.lo(i));
      grid[i].push_back(p.hi(i));
    }
    std::sort(grid[i].begin(), grid[i].end());
    grid[i].erase(std::unique(grid[i].begin(), grid[i].end()), grid[i].end());
  }
  for (int pass = 0; pass < 3; ++pass) {
    bool changed = false;
    for (std::size_t i = 0; i < d; ++i) {
      for (int side = 0; side < 2; ++side) {
        std::vector<double> cand;
        for (double c : grid[i]) {
          if (side == 0 ? c < b.lo(i) : c > b.hi(i)) cand.push_back(c);
        }
        if (side == 0) std::reverse(cand.begin(), cand.end());  // nearest first
        std::size_t lo = 0, hi = cand.size();  // cand[0..lo) known good
        while (lo < hi) {
          const std::size_t mid = (lo + hi) / 2;
          Point l = b.lo(), h = b.hi();
          (side == 0 ? l : h)[i] = cand[mid];
          if (contained_in(Box(l, h), u)) {
            lo = mid + 1;
          } else {
            hi = mid;
          }
        }
        if (lo > 0) {
          Point l = b.lo(), h = b.hi();
          (side == 0 ? l : h)[i] = cand[lo - 1];
          b = Box(l, h);
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  return b;
}

BoxUnion drop_lower_rank(const BoxUnion& u) {
  const std::size_t r = top_rank(u);
  BoxUnion out(u.dim());
  for (const auto& b : u) {
    if (b.rank() == r) out.push_back(b);
  }
  return out;
}

}  // namespace

std::string to_string(Engine e) {
  switch (e) {
    case Engine::Enumerate: return "enumerate";
    case Engine::Carve: return "carve";
    case Engine::Grid: return "grid";
  }
  return "?";
}

Engine parse_engine(const std::string& s) {
  if (s == "enumerate") return Engine::Enumerate;
  if (s == "carve") return Engine::Carve;
  if (s == "grid") return Engine::Grid;
  throw ValidationError("engine", "unknown engine '" + s + "'");
}

BoxUnion prune_dominated(const BoxUnion& u) {
  std::vector<char> drop(u.size(), 0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t j = 0; j < u.size() && !drop[i]; ++j) {
      if (i == j || drop[j]) continue;
      if (!u[j].contains(u[i], 1e-12)) continue;
      if (u[i].rank() < u[j].rank() || (u[i] == u[j] && j < i) || relative_volume(u[i], u[i].rank()) == 0.0) {
        drop[i] = 1;
      }
    }
  }
  BoxUnion out(u.dim());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!drop[i]) out.push_back(u[i]);
  }
  return out;
}

double irregular_grid_cells(const BoxUnion& u) {
  double cells = 1.0;
  for (std::size_t i = 0; i < u.dim(); ++i) {
    std::set<double> coords;
    for (const auto& b : u) {
      coords.insert(b.lo(i));
      coords.insert(b.hi(i));
    }
    cells *= static_cast<double>(std::max<std::size_t>(coords.size(), 2) - 1);
  }
  return cells;
}

std::vector<Box> split_longest(const Box& region, std::size_t parts) {
  if (parts == 0) throw ValidationError("partitions", "must be at least 1");
  std::vector<Box> boxes{region};
  while (boxes.size() < parts) {
    // Split the widest box (first on ties) along its longest dimension.
    std::size_t pick = 0;
    double best = -1.0;
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      for (std::size_t i = 0; i < region.dim(); ++i) {
        if (boxes[k].width(i) > best) {
          best = boxes[k].width(i);
          pick = k;
        }
      }
    }
    const Box b = boxes[pick];
    std::size_t axis = 0;
    for (std::size_t i = 1; i < b.dim(); ++i) {
      if (b.width(i) > b.width(axis)) axis = i;
    }
    const double mid = 0.5 * (b.lo(axis) + b.hi(axis));
    Point h1 = b.hi(), l2 = b.lo();
    h1[axis] = mid;
    l2[axis] = mid;
    boxes[pick] = Box(b.lo(), h1);
    boxes.insert(boxes.begin() + static_cast<long>(pick) + 1, Box(l2, b.hi()));
  }
  return boxes;
}

Extractor::Extractor(const Task& task, const ConstraintModel& model, const std::vector<Trajectory>& demos,
                     ExtractionOptions opts)
    : ctx_(task, model, demos, opts.tol), opts_(opts) {}

// Removes every theta under which some point of demo j lies strictly inside
// an obstacle. Pinned coordinates sitting on the boundary stay (open obstacles).
BoxUnion Extractor::carve_primal(const Box& region, std::size_t j) const {
  const ConstraintModel& model = ctx_.model();
  const DemoKkt& demo = ctx_.demo(j);
  BoxUnion u{region};
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    for (std::size_t t = 0; t < demo.n_points(b) && !u.empty(); ++t) u = remove_violating(u, model, b, demo.kappa(b, t));
  }
  return u;
}

BoxUnion Extractor::enumerate_demo(std::size_t j, const Box& region, std::size_t* nodes) const {
  const ConstraintModel& model = ctx_.model();
  const DemoKkt& demo = ctx_.demo(j);
  const double tol = opts_.tol;
  const std::size_t d = model.theta_dim();
  if (demo.known_primal() > tol) return BoxUnion(d);

  std::vector<Event> events;
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    const auto& blk = model.block(b);
    for (std::size_t m = 0; m < blk.n_obs; ++m) {
      for (const auto& f : model.facets(b)) {
        if (f.obstacle != m) continue;
        for (std::size_t t = 0; t < demo.n_points(b); ++t) {
          const double v = demo.kappa(b, t)[f.axis];
          const std::size_t c = model.theta_index(f);
          if (v < region.lo(c) - kActiveTol || v > region.hi(c) + kActiveTol) continue;
          events.push_back({demo.direction_id(b, f.axis, f.upper, t), b, m, f.axis, f.upper, t, v});
        }
      }
    }
  }
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return std::tie(a.dir, a.block, a.m) < std::tie(b.dir, b.block, b.m);
  });

  auto apply = [&](PatternState& s, const Event& e) {
    const auto& blk = model.block(e.block);
    const std::size_t c = blk.theta_index(e.m, e.axis, e.upper);
    if (s.pinned[c] && std::abs(s.lo[c] - e.value) > kActiveTol) return false;
    if (e.value < s.lo[c] - kActiveTol || e.value > s.hi[c] + kActiveTol) return false;
    const double pin = s.pinned[c] ? s.lo[c] : e.value;
    s.lo[c] = s.hi[c] = pin;
    s.pinned[c] = 1;
    if (!blk.is_scalar_bound()) {
      const Point& kap = demo.kappa(e.block, e.t);
      for (std::size_t a = 0; a < blk.kappa_dim; ++a) {
        const std::size_t il = blk.theta_index(e.m, a, false), ih = blk.theta_index(e.m, a, true);
        if (il != c) s.hi[il] = std::min(s.hi[il], kap[a]);
        if (ih != c) s.lo[ih] = std::max(s.lo[ih], kap[a]);
        for (std::size_t k : {il, ih}) {
          if (s.lo[k] > s.hi[k] + kActiveTol) return false;
          if (s.lo[k] > s.hi[k]) s.lo[k] = s.hi[k] = s.pinned[k] ? s.lo[k] : s.hi[k];
        }
      }
    }
    return true;
  };

  struct Found {
    std::vector<std::size_t> events;
    PatternState state;
  };
  std::vector<Found> found;
  std::size_t count = 0;
  std::vector<std::size_t> chosen;

  auto dirs_of = [&](const std::vector<std::size_t>& evs) {
    std::vector<std::uint32_t> dirs;
    for (std::size_t e : evs) dirs.push_back(events[e].dir);
    std::sort(dirs.begin(), dirs.end());
    dirs.erase(std::unique(dirs.begin(), dirs.end()), dirs.end());
    return dirs;
  };

  std::function<void(const PatternState&, std::size_t)> dfs = [&](const PatternState& s, std::size_t next) {
    if (++count > opts_.node_cap) {
      throw ExtractionError("activation-pattern search exceeded " + std::to_string(opts_.node_cap) + " nodes");
    }
    const auto dirs = dirs_of(chosen);
    if (demo.stationarity(dirs).residual <= tol) {
      found.push_back({chosen, s});
      return;
    }
    std::vector<std::size_t> cand;
    std::vector<std::uint32_t> ub = dirs;
    for (std::size_t e = next; e < events.size(); ++e) {
      if (std::binary_search(dirs.begin(), dirs.end(), events[e].dir)) continue;
      PatternState trial = s;
      if (!apply(trial, events[e])) continue;
      cand.push_back(e);
      ub.push_back(events[e].dir);
    }
    if (cand.empty()) return;
    std::sort(ub.begin(), ub.end());
    ub.erase(std::unique(ub.begin(), ub.end()), ub.end());
    if (demo.stationarity(ub).residual > tol) return;
    for (std::size_t e : cand) {
      PatternState child = s;
      apply(child, events[e]);
      chosen.push_back(e);
      dfs(child, e + 1);
      chosen.pop_back();
    }
  };

  PatternState root{region.lo(), region.hi(), std::vector<char>(d, 0)};
  for (std::size_t c = 0; c < d; ++c) root.pinned[c] = region.degenerate(c) ? 1 : 0;
  dfs(root, 0);
  if (nodes) *nodes += count;

  // Supersets of another found pattern only describe a subset of its region.
  std::vector<char> redundant(found.size(), 0);
  for (std::size_t a = 0; a < found.size(); ++a) {
    for (std::size_t b = 0; b < found.size() && !redundant[a]; ++b) {
      if (a == b || redundant[b] || found[b].events.size() >= found[a].events.size()) continue;
      if (std::includes(found[a].events.begin(), found[a].events.end(), found[b].events.begin(), found[b].events.end())) {
        redundant[a] = 1;
      }
    }
  }

  BoxUnion out(d);
  for (std::size_t a = 0; a < found.size(); ++a) {
    if (redundant[a]) continue;
    const PatternState& s = found[a].state;
    Point lo = s.lo, hi = s.hi;
    for (std::size_t c = 0; c < d; ++c) {
      if (hi[c] < lo[c]) hi[c] = lo[c];
    }
    for (const auto& piece : carve_primal(Box(lo, hi), j)) out.add_disjoint(piece);
  }
  return out;
}

BoxUnion Extractor::enumerate(const Box& region, std::size_t* nodes) const {
  if (nodes) *nodes = 0;
  BoxUnion f{region};
  for (std::size_t j = 0; j < ctx_.n_demos() && !f.empty(); ++j) {
    f = prune_dominated(intersect(f, enumerate_demo(j, region, nodes)));
  }
  if (f.empty()) return BoxUnion(region.dim());
  return opts_.keep_degenerate ? f : drop_lower_rank(f);
}

namespace {

std::optional<Box> best_grown(const BoxUnion& avail, const KktContext& ctx) {
  if (avail.empty()) return std::nullopt;
  std::vector<Box> pieces(avail.begin(), avail.end());
  std::sort(pieces.begin(), pieces.end(), better_box);
  constexpr std::size_t kGrow = 8;
  std::optional<Box> best;
  for (std::size_t k = 0; k < pieces.size() && k < kGrow; ++k) {
    Box grown = grow_box(pieces[k], avail);
    if (!ctx.robust_box_consistent(grown)) {
      grown = pieces[k];
      if (!ctx.robust_box_consistent(grown)) continue;
    }
    if (!best || better_box(grown, *best)) best = grown;
  }
  if (!best) {
    // Fall back to any exact piece the oracle accepts.
    for (const auto& p : pieces) {
      if (ctx.robust_box_consistent(p)) return p;
    }
  }
  return best;
}

}  // namespace

std::optional<Box> Extractor::max_box(const BoxUnion& remaining) const {
  if (remaining.empty()) return std::nullopt;
  const BoxUnion exact = enumerate(remaining.hull());
  return best_grown(prune_dominated(intersect(exact, remaining)), ctx_);
}

ExtractionResult Extractor::carve(const Box& region) const {
  ExtractionResult res;
  res.engine = Engine::Carve;
  BoxUnion avail = enumerate(region);
  BoxUnion out(region.dim());
  while (!avail.empty()) {
    if (res.iterations >= opts_.iteration_cap) {
      throw ExtractionError("carve engine exceeded " + std::to_string(opts_.iteration_cap) + " iterations");
    }
    const auto box = best_grown(avail, ctx_);
    if (!box) break;
    ++res.iterations;
    out.push_back(*box);
    avail = prune_dominated(subtract(avail, *box));
    if (!opts_.keep_degenerate) avail = drop_lower_rank(avail);
  }
  res.f_theta = out;
  return res;
}

ExtractionResult Extractor::extract(const Box& region) const {
  const auto t0 = std::chrono::steady_clock::now();
  ExtractionResult res;
  switch (opts_.engine) {
    case Engine::Enumerate: {
      std::size_t nodes = 0;
      res.f_theta = enumerate(region, &nodes);
      res.iterations = nodes;
      res.engine = Engine::Enumerate;
      break;
    }
    case Engine::Carve:
      res = carve(region);
      break;
    case Engine::Grid:
      res.f_theta = grid_oracle(opts_.grid_h, region);
      res.engine = Engine::Grid;
      break;
  }
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

BoxUnion Extractor::grid_oracle(double h, const Box& region) const {
  if (!(h > 0.0)) throw ValidationError("h", "must be positive");
  const std::size_t d = region.dim();
  std::vector<std::size_t> n(d);
  double total = 1.0;
  for (std::size_t i = 0; i < d; ++i) {
    n[i] = region.degenerate(i) ? 1 : static_cast<std::size_t>(std::ceil(region.width(i) / h - 1e-9));
    total *= static_cast<double>(n[i]);
  }
  if (total > static_cast<double>(opts_.grid_cell_cap)) {
    throw ExtractionError("grid oracle needs " + std::to_string(static_cast<long long>(total)) + " cells");
  }
  auto edge = [&](std::size_t i, std::size_t k) {
    if (region.degenerate(i)) return region.lo(i);
    return std::min(region.hi(i), region.lo(i) + static_cast<double>(k) * h);
  };
  BoxUnion out(d);
  std::vector<std::size_t> idx(d, 0);
  Point center(d), lo(d), hi(d);
  // Runs of consecutive consistent cells along dimension 0 merge into one box.
  bool open_run = false;
  Point run_lo;
  auto flush = [&](const Point& run_hi) {
    if (open_run) out.push_back(Box(run_lo, run_hi));
    open_run = false;
  };
  const std::size_t cells = static_cast<std::size_t>(total);
  Point prev_hi;
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = edge(i, idx[i]);
      hi[i] = region.degenerate(i) ? region.hi(i) : edge(i, idx[i] + 1);
      center[i] = 0.5 * (lo[i] + hi[i]);
    }
    if (idx[0] == 0) flush(prev_hi);
    if (ctx_.certify(center)) {
      if (!open_run) {
        run_lo = lo;
        open_run = true;
      }
      prev_hi = hi;
    } else {
      flush(prev_hi);
    }
    for (std::size_t i = 0; i < d; ++i) {
      if (++idx[i] < n[i]) break;
      idx[i] = 0;
    }
  }
  flush(prev_hi);
  return out;
}

ExtractionResult extract(const std::vector<Trajectory>& demos, const Task& task, const ConstraintModel& model,
                         const ExtractionOptions& opts) {
  return Extractor(task, model, demos, opts).extract();
}

ExtractionResult extract_partitioned(const std::vector<Trajectory>& demos, const Task& task,
                                     const ConstraintModel& model, std::size_t partitions,
                                     const ExtractionOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const Extractor ex(task, model, demos, opts);
  const auto parts = split_longest(model.theta_prior(), partitions);
  std::vector<ExtractionResult> results(parts.size());
  std::vector<std::exception_ptr> errors(parts.size());
  std::vector<std::thread> workers;
  const std::size_t width = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  for (std::size_t start = 0; start < parts.size(); start += width) {
    workers.clear();
    for (std::size_t k = start; k < std::min(parts.size(), start + width); ++k) {
      workers.emplace_back([&, k] {
        try {
          results[k] = ex.extract(parts[k]);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  ExtractionResult out;
  out.engine = opts.engine;
  out.f_theta = BoxUnion(model.theta_dim());
  for (const auto& r : results) {
    for (const auto& b : r.f_theta) out.f_theta.push_back(b);
    out.iterations += r.iterations;
  }
  out.f_theta = prune_dominated(out.f_theta);
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::optional<Box> max_box(const BoxUnion& remaining, const std::vector<Trajectory>& demos, const Task& task,
                           const ConstraintModel& model, double tol) {
  ExtractionOptions opts;
  opts.tol = tol;
  return Extractor(task, model, demos, opts).max_box(remaining);
}

BoxUnion grid_oracle(const std::vector<Trajectory>& demos, const Task& task, const ConstraintModel& model, double tol,
                     double h) {
  ExtractionOptions opts;
  opts.tol = tol;
  return Extractor(task, model, demos, opts).grid_oracle(h, model.theta_prior());
}

GuaranteedSets guaranteed_sets(const BoxUnion& f_theta, const ConstraintModel& model, std::size_t block) {
  if (f_theta.empty()) throw ValidationError("f_theta", "empty parameter set");
  const auto& blk = model.block(block);
  const std::size_t k = blk.kappa_dim;
  GuaranteedSets gs;

  std::optional<BoxUnion> g_unsafe;
  std::vector<Box> outer;
  for (const auto& theta_box : f_theta) {
    std::vector<Box> inner;
    for (std::size_t m = 0; m < blk.n_obs; ++m) {
      if (auto b = model.inner_obstacle(block, m, theta_box)) inner.push_back(*b);
      if (auto b = model.outer_obstacle(block, m, theta_box)) outer.push_back(*b);
    }
    BoxUnion here = inner.empty() ? BoxUnion(k) : make_disjoint(inner);
    g_unsafe = g_unsafe ? intersect(*g_unsafe, here) : here;
    g_unsafe = drop_lower_rank(*g_unsafe);
    if (!g_unsafe->empty() && g_unsafe->begin()->rank() < k) g_unsafe = BoxUnion(k);
  }
  gs.g_unsafe = g_unsafe ? *g_unsafe : BoxUnion(k);
  gs.possibly_unsafe = outer.empty() ? BoxUnion(k) : subtract(make_disjoint(outer), gs.g_unsafe);
  gs.possibly_unsafe = prune_dominated(gs.possibly_unsafe);
  BoxUnion safe{blk.kappa_bounds};
  safe = subtract(safe, gs.g_unsafe);
  safe = subtract(safe, gs.possibly_unsafe);
  gs.g_safe = prune_dominated(safe);
  if (gs.g_safe.empty()) gs.g_safe = BoxUnion(k);
  if (gs.possibly_unsafe.empty()) gs.possibly_unsafe = BoxUnion(k);
  return gs;
}

}  // namespace kktplan
