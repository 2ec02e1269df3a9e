#include "kktplan/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kktplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sq_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace

std::string to_string(DynamicsKind k) {
  return k == DynamicsKind::SingleIntegrator ? "single-integrator" : "double-integrator";
}

std::string to_string(CostKind k) {
  return k == CostKind::SumSquaredControl ? "sum-squared-control" : "path-length";
}

std::string to_string(PhiKind k) {
  switch (k) {
    case PhiKind::StateProjection: return "state-projection";
    case PhiKind::ControlNormSquared: return "control-norm-squared";
    case PhiKind::Identity: return "identity";
  }
  return "?";
}

DynamicsKind parse_dynamics_kind(const std::string& s) {
  if (s == "single-integrator") return DynamicsKind::SingleIntegrator;
  if (s == "double-integrator") return DynamicsKind::DoubleIntegrator;
  throw ParseError("dynamics.kind", "unknown dynamics kind '" + s + "'");
}

CostKind parse_cost_kind(const std::string& s) {
  if (s == "sum-squared-control") return CostKind::SumSquaredControl;
  if (s == "path-length") return CostKind::PathLength;
  throw ParseError("task.cost", "unknown cost kind '" + s + "'");
}

PhiKind parse_phi_kind(const std::string& s) {
  if (s == "state-projection") return PhiKind::StateProjection;
  if (s == "control-norm-squared") return PhiKind::ControlNormSquared;
  if (s == "identity") return PhiKind::Identity;
  throw ParseError("model.phi", "unknown phi kind '" + s + "'");
}

Point Dynamics::step(const Point& x, const Point& u) const {
  Point next = x;
  if (kind == DynamicsKind::SingleIntegrator) {
    for (std::size_t i = 0; i < dim; ++i) next[i] += dt * u[i];
  } else {
    for (std::size_t i = 0; i < dim; ++i) {
      next[i] += dt * x[dim + i];
      next[dim + i] += dt * u[i];
    }
  }
  return next;
}

double Task::step_cost(const Point& x, const Point& u, const Point& x_next) const {
  if (cost == CostKind::SumSquaredControl) return sq_norm(u);
  double s = 0.0;
  for (std::size_t i = 0; i < dynamics.dim; ++i) {
    const double d = x_next[i] - x[i];
    s += d * d;
  }
  return s;
}

double Task::cost_of(const Trajectory& traj) const {
  double c = 0.0;
  for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
    c += step_cost(traj.states[t], traj.controls[t], traj.states[t + 1]);
  }
  return c;
}

std::size_t ConstraintBlock::theta_index(std::size_t m, std::size_t axis, bool upper) const {
  if (is_scalar_bound()) return theta_offset + m;
  return theta_offset + m * 2 * kappa_dim + (upper ? kappa_dim : 0) + axis;
}

ConstraintModel::ConstraintModel(std::vector<ConstraintBlock> blocks, Box theta_prior)
    : blocks_(std::move(blocks)), theta_prior_(std::move(theta_prior)) {
  std::size_t d = 0;
  for (auto& b : blocks_) {
    if (b.theta_offset != d) throw ValidationError("model", "block parameter offsets are not contiguous");
    if (b.is_scalar_bound() && b.n_obs != 1) throw ValidationError("model.n_obs", "a scalar bound has exactly one obstacle");
    if (b.kappa_bounds.dim() != b.kappa_dim) throw ValidationError("model", "kappa bounds dimension mismatch");
    d += b.theta_dim();
  }
  if (d != theta_prior_.dim()) {
    throw ValidationError("model.theta_prior", "expected dimension " + std::to_string(d) + ", got " +
                                                   std::to_string(theta_prior_.dim()));
  }
}

ConstraintModel ConstraintModel::make(const Dynamics& dyn, const std::vector<PhiKind>& phis,
                                      const std::vector<std::size_t>& n_obs, Box theta_prior) {
  if (phis.size() != n_obs.size()) throw ValidationError("model.n_obs", "one obstacle count per phi entry expected");
  std::vector<ConstraintBlock> blocks;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < phis.size(); ++i) {
    ConstraintBlock b;
    b.phi = phis[i];
    b.n_obs = n_obs[i];
    b.theta_offset = offset;
    switch (b.phi) {
      case PhiKind::StateProjection: {
        b.kappa_dim = dyn.dim;
        Point lo(dyn.state_bounds.lo().begin(), dyn.state_bounds.lo().begin() + static_cast<long>(dyn.dim));
        Point hi(dyn.state_bounds.hi().begin(), dyn.state_bounds.hi().begin() + static_cast<long>(dyn.dim));
        b.kappa_bounds = Box(lo, hi);
        break;
      }
      case PhiKind::Identity:
        b.kappa_dim = dyn.state_dim();
        b.kappa_bounds = dyn.state_bounds;
        break;
      case PhiKind::ControlNormSquared: {
        b.kappa_dim = 1;
        double hi = 0.0;
        for (std::size_t j = 0; j < dyn.control_dim(); ++j) {
          const double m = std::max(std::abs(dyn.control_bounds.lo(j)), std::abs(dyn.control_bounds.hi(j)));
          hi += m * m;
        }
        b.kappa_bounds = Box({0.0}, {hi});
        if (b.n_obs != 1) throw ValidationError("model.n_obs", "a scalar bound has exactly one obstacle");
        break;
      }
    }
    offset += b.theta_dim();
    blocks.push_back(std::move(b));
  }
  return ConstraintModel(std::move(blocks), std::move(theta_prior));
}

std::size_t ConstraintModel::kappa_dim() const {
  std::size_t k = 0;
  for (const auto& b : blocks_) k += b.kappa_dim;
  return k;
}

std::vector<FacetRef> ConstraintModel::facets(std::size_t b) const {
  const auto& blk = blocks_[b];
  std::vector<FacetRef> out;
  for (std::size_t m = 0; m < blk.n_obs; ++m) {
    if (blk.is_scalar_bound()) {
      out.push_back({b, m, 0, false});
      continue;
    }
    for (int upper = 0; upper < 2; ++upper) {
      for (std::size_t i = 0; i < blk.kappa_dim; ++i) out.push_back({b, m, i, upper == 1});
    }
  }
  return out;
}

void ConstraintModel::obstacle_bounds(std::size_t b, std::size_t m, std::span<const double> theta, Point& lo,
                                      Point& hi) const {
  const auto& blk = blocks_[b];
  lo.assign(blk.kappa_dim, 0.0);
  hi.assign(blk.kappa_dim, kInf);
  if (blk.is_scalar_bound()) {
    lo[0] = theta[blk.theta_index(m, 0, false)];
    return;
  }
  for (std::size_t i = 0; i < blk.kappa_dim; ++i) {
    lo[i] = theta[blk.theta_index(m, i, false)];
    hi[i] = theta[blk.theta_index(m, i, true)];
  }
}

double ConstraintModel::facet_value(const FacetRef& f, std::span<const double> theta,
                                    std::span<const double> kappa) const {
  const double off = theta[theta_index(f)];
  return f.upper ? off - kappa[f.axis] : kappa[f.axis] - off;
}

double ConstraintModel::block_g(std::size_t b, std::span<const double> theta, std::span<const double> kappa) const {
  const auto& blk = blocks_[b];
  if (theta.size() != theta_dim()) throw ValidationError("theta", "dimension mismatch");
  if (kappa.size() != blk.kappa_dim) throw ValidationError("kappa", "dimension mismatch");
  double g = -kInf;
  Point lo, hi;
  for (std::size_t m = 0; m < blk.n_obs; ++m) {
    obstacle_bounds(b, m, theta, lo, hi);
    double gm = kInf;
    for (std::size_t i = 0; i < blk.kappa_dim; ++i) {
      gm = std::min(gm, kappa[i] - lo[i]);
      gm = std::min(gm, hi[i] - kappa[i]);
    }
    g = std::max(g, gm);
  }
  return g;
}

std::optional<Box> ConstraintModel::outer_obstacle(std::size_t b, std::size_t m, const Box& theta_box) const {
  const auto& blk = blocks_[b];
  Point lo(blk.kappa_dim), hi(blk.kappa_dim);
  if (blk.is_scalar_bound()) {
    lo[0] = theta_box.lo(blk.theta_index(m, 0, false));
    hi[0] = blk.kappa_bounds.hi(0);
  } else {
    for (std::size_t i = 0; i < blk.kappa_dim; ++i) {
      lo[i] = theta_box.lo(blk.theta_index(m, i, false));
      hi[i] = theta_box.hi(blk.theta_index(m, i, true));
    }
  }
  for (std::size_t i = 0; i < blk.kappa_dim; ++i) {
    if (!(lo[i] < hi[i])) return std::nullopt;
  }
  return Box(std::move(lo), std::move(hi));
}

std::optional<Box> ConstraintModel::inner_obstacle(std::size_t b, std::size_t m, const Box& theta_box,
                                                   bool allow_flat) const {
  const auto& blk = blocks_[b];
  Point lo(blk.kappa_dim), hi(blk.kappa_dim);
  if (blk.is_scalar_bound()) {
    lo[0] = theta_box.hi(blk.theta_index(m, 0, false));
    hi[0] = blk.kappa_bounds.hi(0);
  } else {
    for (std::size_t i = 0; i < blk.kappa_dim; ++i) {
      lo[i] = theta_box.hi(blk.theta_index(m, i, false));
      hi[i] = theta_box.lo(blk.theta_index(m, i, true));
    }
  }
  for (std::size_t i = 0; i < blk.kappa_dim; ++i) {
    if (allow_flat ? !(lo[i] <= hi[i]) : !(lo[i] < hi[i])) return std::nullopt;
  }
  return Box(std::move(lo), std::move(hi));
}

double g_value(const ConstraintModel& model, std::span<const double> theta, std::span<const double> kappa) {
  if (kappa.size() != model.kappa_dim()) throw ValidationError("kappa", "dimension mismatch");
  double g = -kInf;
  std::size_t off = 0;
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    const std::size_t k = model.block(b).kappa_dim;
    g = std::max(g, model.block_g(b, theta, kappa.subspan(off, k)));
    off += k;
  }
  return g;
}

std::vector<Box> unsafe_boxes(const ConstraintModel& model, const Box& theta_box, std::size_t block) {
  std::vector<Box> out;
  for (std::size_t m = 0; m < model.block(block).n_obs; ++m) {
    if (auto b = model.outer_obstacle(block, m, theta_box)) out.push_back(std::move(*b));
  }
  return out;
}

BoxUnion unsafe_region(const ConstraintModel& model, const Box& theta_box, std::size_t block) {
  auto boxes = unsafe_boxes(model, theta_box, block);
  BoxUnion out = make_disjoint(boxes);
  if (out.empty()) out = BoxUnion(model.block(block).kappa_dim);
  return out;
}

Point kappa_of_state(const Dynamics& dyn, PhiKind phi, const Point& x) {
  return phi == PhiKind::Identity ? x : dyn.position(x);
}

Point kappa_of_control(const Point& u) { return {sq_norm(u)}; }

std::vector<Point> constraint_points(const Task& task, const ConstraintModel& model, std::size_t b,
                                     const Trajectory& traj) {
  const auto& blk = model.block(b);
  std::vector<Point> out;
  if (blk.is_scalar_bound()) {
    for (const auto& u : traj.controls) out.push_back(kappa_of_control(u));
  } else {
    for (const auto& x : traj.states) out.push_back(kappa_of_state(task.dynamics, blk.phi, x));
  }
  return out;
}

std::vector<Point> step_points(const Dynamics& dyn, const ConstraintBlock& block, const Point& x, const Point& u,
                               const Point& x_next, double spacing) {
  if (block.is_scalar_bound()) return {kappa_of_control(u)};
  const Point a = kappa_of_state(dyn, block.phi, x);
  const Point b = kappa_of_state(dyn, block.phi, x_next);
  double dist = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dist = std::max(dist, std::abs(b[i] - a[i]));
  const std::size_t n = spacing > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(dist / spacing - 1e-12))) : 1;
  std::vector<Point> out;
  out.reserve(n);
  for (std::size_t j = 1; j <= n; ++j) {
    const double s = static_cast<double>(j) / static_cast<double>(n);
    Point p(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) p[i] = j == n ? b[i] : a[i] + s * (b[i] - a[i]);
    out.push_back(std::move(p));
  }
  return out;
}

Trajectory rollout(const Dynamics& dyn, const Point& x0, const std::vector<Point>& controls) {
  if (x0.size() != dyn.state_dim()) throw RolloutError(0, "initial state dimension mismatch");
  Trajectory traj;
  traj.states.push_back(x0);
  for (std::size_t t = 0; t < controls.size(); ++t) {
    if (controls[t].size() != dyn.control_dim()) throw RolloutError(t, "control dimension mismatch");
    if (!dyn.control_bounds.contains(controls[t], 1e-9)) throw RolloutError(t, "control outside bounds");
    Point next = dyn.step(traj.states.back(), controls[t]);
    if (!dyn.state_bounds.contains(next, 1e-9)) throw RolloutError(t, "state leaves bounds");
    traj.states.push_back(std::move(next));
    traj.controls.push_back(controls[t]);
  }
  return traj;
}

void check_trajectory(const Dynamics& dyn, const Trajectory& traj, double tol, const std::string& field) {
  if (traj.states.size() < 2) throw ValidationError(field, "needs at least 2 states");
  if (traj.controls.size() + 1 != traj.states.size()) {
    throw ValidationError(field, "expected " + std::to_string(traj.states.size() - 1) + " controls, got " +
                                     std::to_string(traj.controls.size()));
  }
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    const std::string at = field + ".states[" + std::to_string(t) + "]";
    if (traj.states[t].size() != dyn.state_dim()) throw ValidationError(at, "state dimension mismatch");
    if (!dyn.state_bounds.contains(traj.states[t], tol)) throw ValidationError(at, "state outside bounds");
  }
  for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
    const std::string at = field + ".controls[" + std::to_string(t) + "]";
    if (traj.controls[t].size() != dyn.control_dim()) throw ValidationError(at, "control dimension mismatch");
    if (!dyn.control_bounds.contains(traj.controls[t], tol)) throw ValidationError(at, "control outside bounds");
    const Point next = dyn.step(traj.states[t], traj.controls[t]);
    for (std::size_t i = 0; i < next.size(); ++i) {
      if (std::abs(next[i] - traj.states[t + 1][i]) > tol) {
        throw ValidationError(field + " timestep " + std::to_string(t),
                              "dynamics violated by " + std::to_string(std::abs(next[i] - traj.states[t + 1][i])));
      }
    }
  }
}

Box violating_thetas(const ConstraintModel& model, std::size_t b, std::size_t m, std::span<const double> kappa) {
  const auto& blk = model.block(b);
  if (kappa.size() != blk.kappa_dim) throw ValidationError("kappa", "dimension mismatch");
  constexpr double inf = std::numeric_limits<double>::infinity();
  Point lo(model.theta_dim(), -inf), hi(model.theta_dim(), inf);
  if (blk.is_scalar_bound()) {
    hi[blk.theta_index(m, 0, false)] = kappa[0];
  } else {
    for (std::size_t a = 0; a < blk.kappa_dim; ++a) {
      hi[blk.theta_index(m, a, false)] = kappa[a];
      lo[blk.theta_index(m, a, true)] = kappa[a];
    }
  }
  return Box(lo, hi);
}

namespace {

// True if piece reaches the open violating set, i.e. every constrained
// coordinate can move strictly past kappa.
bool reaches_open(const Box& piece, const Box& v) {
  for (std::size_t c = 0; c < piece.dim(); ++c) {
    if (std::isfinite(v.hi(c)) && !(piece.lo(c) < v.hi(c) - kMembershipTol)) return false;
    if (std::isfinite(v.lo(c)) && !(piece.hi(c) > v.lo(c) + kMembershipTol)) return false;
  }
  return true;
}

}  // namespace

BoxUnion remove_violating(const BoxUnion& u, const ConstraintModel& model, std::size_t b,
                          std::span<const double> kappa) {
  BoxUnion cur = u;
  for (std::size_t m = 0; m < model.block(b).n_obs && !cur.empty(); ++m) {
    const Box v = violating_thetas(model, b, m, kappa);
    BoxUnion next(u.dim());
    for (const auto& piece : cur) {
      if (!reaches_open(piece, v)) {
        next.push_back(piece);
        continue;
      }
      for (auto& rest : subtract(piece, v)) next.push_back(std::move(rest));
    }
    cur = std::move(next);
  }
  return cur;
}

BoxUnion keep_violating(const BoxUnion& u, const ConstraintModel& model, std::size_t b,
                        std::span<const double> kappa) {
  std::vector<Box> parts;
  for (const auto& piece : u) {
    for (std::size_t m = 0; m < model.block(b).n_obs; ++m) {
      const Box v = violating_thetas(model, b, m, kappa);
      Box cut;
      if (reaches_open(piece, v) && intersect(piece, v, cut)) parts.push_back(cut);
    }
  }
  if (parts.empty()) return BoxUnion(u.dim());
  return make_disjoint(parts);
}

}  // namespace kktplan
