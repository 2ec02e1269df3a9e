#include "kktplan/kkt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kktplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double KktReport::max_residual() const {
  return std::max({primal_residual, comp_slack_residual, stationarity_residual});
}

DemoKkt::DemoKkt(const Task& task, const ConstraintModel& model, Trajectory demo)
    : task_(task), model_(model), demo_(std::move(demo)) {
  const Dynamics& dyn = task_.dynamics;
  n_ = dyn.state_dim();
  m_ = dyn.control_dim();
  const std::size_t T = demo_.states.size();
  if (T < 2 || demo_.controls.size() + 1 != T) throw ValidationError("demo", "malformed trajectory");
  nz_ = T * n_ + (T - 1) * m_;

  for (std::size_t b = 0; b < model_.blocks().size(); ++b) {
    kappa_.push_back(constraint_points(task_, model_, b, demo_));
    unknown_offset_.push_back(n_unknown_);
    const auto& blk = model_.block(b);
    n_unknown_ += blk.theta_dim() * kappa_.back().size();
  }
  build_cost_gradient();
  build_equalities();
  build_known();
  build_directions();
}

void DemoKkt::build_cost_gradient() {
  const std::size_t T = horizon();
  g0_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nz_));
  if (task_.cost == CostKind::SumSquaredControl) {
    for (std::size_t t = 0; t + 1 < T; ++t) {
      for (std::size_t j = 0; j < m_; ++j) g0_(ui(t, j)) = 2.0 * demo_.controls[t][j];
    }
  } else {
    const std::size_t k = task_.dynamics.dim;
    for (std::size_t t = 0; t + 1 < T; ++t) {
      for (std::size_t j = 0; j < k; ++j) {
        const double d = demo_.states[t + 1][j] - demo_.states[t][j];
        g0_(xi(t + 1, j)) += 2.0 * d;
        g0_(xi(t, j)) -= 2.0 * d;
      }
    }
  }
}

void DemoKkt::build_equalities() {
  const std::size_t T = horizon();
  const Dynamics& dyn = task_.dynamics;
  const std::size_t ne = (T - 1) * n_ + 2 * n_;
  E_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nz_), static_cast<Eigen::Index>(ne));
  std::size_t col = 0;
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t j = 0; j < n_; ++j, ++col) {
      E_(xi(t + 1, j), col) = 1.0;
      E_(xi(t, j), col) = -1.0;
      if (dyn.kind == DynamicsKind::SingleIntegrator) {
        E_(ui(t, j), col) = -dyn.dt;
      } else if (j < dyn.dim) {
        E_(xi(t, dyn.dim + j), col) = -dyn.dt;
      } else {
        E_(ui(t, j - dyn.dim), col) = -dyn.dt;
      }
    }
  }
  for (std::size_t j = 0; j < n_; ++j) E_(xi(0, j), col++) = 1.0;
  for (std::size_t j = 0; j < n_; ++j) E_(xi(T - 1, j), col++) = 1.0;
}

void DemoKkt::build_known() {
  const std::size_t T = horizon();
  const std::size_t k = task_.dynamics.dim;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < n_; ++j) {
      known_.push_back({KnownCon::StateBound, t, j, false, 0});
      known_.push_back({KnownCon::StateBound, t, j, true, 0});
    }
  }
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t j = 0; j < m_; ++j) {
      known_.push_back({KnownCon::ControlBound, t, j, false, 0});
      known_.push_back({KnownCon::ControlBound, t, j, true, 0});
    }
  }
  for (std::size_t kb = 0; kb < task_.known_unsafe.size(); ++kb) {
    for (std::size_t t = 0; t < T; ++t) {
      for (int upper = 0; upper < 2; ++upper) {
        for (std::size_t j = 0; j < k; ++j) known_.push_back({KnownCon::KnownBox, t, j, upper == 1, kb});
      }
    }
  }
  n_known_ = known_.size();

  known_primal_ = 0.0;
  std::vector<Eigen::VectorXd> cols;
  for (std::size_t i = 0; i < n_known_; ++i) {
    double box_g = 0.0;
    const double v = known_value(i, &box_g);
    known_primal_ = std::max(known_primal_, std::max(0.0, box_g));
    if (std::abs(v) <= kActiveTol && std::abs(box_g) <= kActiveTol) {
      known_active_.push_back(i);
      cols.push_back(known_gradient(i));
    }
  }
  G_known_active_.resize(static_cast<Eigen::Index>(nz_), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) G_known_active_.col(static_cast<Eigen::Index>(c)) = cols[c];
}

// Bounds are written as v <= 0. Known boxes: v is the facet value, box_g the
// box-level min over facets, so the point is unsafe iff box_g > 0.
double DemoKkt::known_value(std::size_t i, double* box_g) const {
  const KnownCon& c = known_[i];
  double v = 0.0;
  switch (c.kind) {
    case KnownCon::StateBound: {
      const double x = demo_.states[c.t][c.j];
      v = c.upper ? x - task_.dynamics.state_bounds.hi(c.j) : task_.dynamics.state_bounds.lo(c.j) - x;
      *box_g = v;
      break;
    }
    case KnownCon::ControlBound: {
      const double u = demo_.controls[c.t][c.j];
      v = c.upper ? u - task_.dynamics.control_bounds.hi(c.j) : task_.dynamics.control_bounds.lo(c.j) - u;
      *box_g = v;
      break;
    }
    case KnownCon::KnownBox: {
      const Box& K = task_.known_unsafe[c.box];
      const Point& x = demo_.states[c.t];
      v = c.upper ? K.hi(c.j) - x[c.j] : x[c.j] - K.lo(c.j);
      double g = kInf;
      for (std::size_t a = 0; a < K.dim(); ++a) g = std::min({g, x[a] - K.lo(a), K.hi(a) - x[a]});
      *box_g = g;
      break;
    }
  }
  return v;
}

Eigen::VectorXd DemoKkt::known_gradient(std::size_t i) const {
  const KnownCon& c = known_[i];
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nz_));
  const double s = c.upper ? 1.0 : -1.0;
  switch (c.kind) {
    case KnownCon::StateBound: g(xi(c.t, c.j)) = s; break;
    case KnownCon::ControlBound: g(ui(c.t, c.j)) = s; break;
    case KnownCon::KnownBox: g(xi(c.t, c.j)) = -s; break;
  }
  return g;
}

void DemoKkt::build_directions() {
  std::size_t ndir = 0;
  for (std::size_t b = 0; b < model_.blocks().size(); ++b) {
    dir_offset_.push_back(ndir);
    const auto& blk = model_.block(b);
    ndir += (blk.is_scalar_bound() ? 1 : 2 * blk.kappa_dim) * n_points(b);
  }
  D_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nz_), static_cast<Eigen::Index>(ndir));
  for (std::size_t b = 0; b < model_.blocks().size(); ++b) {
    const auto& blk = model_.block(b);
    for (std::size_t t = 0; t < n_points(b); ++t) {
      if (blk.is_scalar_bound()) {
        const auto col = direction_id(b, 0, false, t);
        for (std::size_t j = 0; j < m_; ++j) D_(ui(t, j), col) = 2.0 * demo_.controls[t][j];
        continue;
      }
      for (int upper = 0; upper < 2; ++upper) {
        for (std::size_t a = 0; a < blk.kappa_dim; ++a) {
          D_(xi(t, a), direction_id(b, a, upper == 1, t)) = upper ? -1.0 : 1.0;
        }
      }
    }
  }
}

std::uint32_t DemoKkt::direction_id(std::size_t block, std::size_t axis, bool upper, std::size_t t) const {
  const auto& blk = model_.block(block);
  if (blk.is_scalar_bound()) return static_cast<std::uint32_t>(dir_offset_[block] + t);
  const std::size_t f = (upper ? blk.kappa_dim : 0) + axis;
  return static_cast<std::uint32_t>(dir_offset_[block] + f * n_points(block) + t);
}

Eigen::VectorXd DemoKkt::direction_gradient(std::size_t block, std::size_t axis, bool upper, std::size_t t) const {
  return D_.col(direction_id(block, axis, upper, t));
}

std::size_t DemoKkt::unknown_index(const FacetRef& f, std::size_t t) const {
  const auto& blk = model_.block(f.block);
  const std::size_t F = blk.facets_per_obstacle();
  const std::size_t fi = blk.is_scalar_bound() ? 0 : (f.upper ? blk.kappa_dim : 0) + f.axis;
  return unknown_offset_[f.block] + (f.obstacle * F + fi) * n_points(f.block) + t;
}

KktReport DemoKkt::residuals(std::span<const double> theta, const Multipliers& mult, double tol) const {
  if (theta.size() != model_.theta_dim()) throw ValidationError("theta", "dimension mismatch");
  if (static_cast<std::size_t>(mult.lambda_known.size()) != n_known_ ||
      static_cast<std::size_t>(mult.lambda_unknown.size()) != n_unknown_ ||
      static_cast<std::size_t>(mult.nu.size()) != n_eq()) {
    throw ValidationError("multipliers", "length does not match the constraint counts");
  }
  KktReport rep;
  Eigen::VectorXd r = g0_ + E_ * mult.nu;

  rep.primal_residual = known_primal_;
  for (std::size_t i = 0; i < n_known_; ++i) {
    const double lam = mult.lambda_known(static_cast<Eigen::Index>(i));
    if (lam == 0.0) continue;
    double box_g = 0.0;
    const double v = known_value(i, &box_g);
    rep.comp_slack_residual = std::max(rep.comp_slack_residual, std::abs(lam) * std::max(std::abs(v), std::abs(box_g)));
    r += lam * known_gradient(i);
  }

  Point lo, hi;
  for (std::size_t b = 0; b < model_.blocks().size(); ++b) {
    const auto facets = model_.facets(b);
    for (std::size_t t = 0; t < n_points(b); ++t) {
      const Point& kap = kappa_[b][t];
      for (std::size_t m = 0; m < model_.block(b).n_obs; ++m) {
        model_.obstacle_bounds(b, m, theta, lo, hi);
        double gm = kInf;
        for (std::size_t a = 0; a < kap.size(); ++a) gm = std::min({gm, kap[a] - lo[a], hi[a] - kap[a]});
        rep.primal_residual = std::max(rep.primal_residual, std::max(0.0, gm));
      }
      for (const auto& f : facets) {
        const double lam = mult.lambda_unknown(static_cast<Eigen::Index>(unknown_index(f, t)));
        if (lam == 0.0) continue;
        model_.obstacle_bounds(b, f.obstacle, theta, lo, hi);
        double gm = kInf;
        for (std::size_t a = 0; a < kap.size(); ++a) gm = std::min({gm, kap[a] - lo[a], hi[a] - kap[a]});
        const double v = model_.facet_value(f, theta, kap);
        rep.comp_slack_residual = std::max(rep.comp_slack_residual, std::abs(lam) * std::max(std::abs(v), std::abs(gm)));
        r += lam * D_.col(direction_id(b, f.axis, f.upper, t));
      }
    }
  }
  double neg = 0.0;
  if (mult.lambda_known.size()) neg = std::max(neg, -mult.lambda_known.minCoeff());
  if (mult.lambda_unknown.size()) neg = std::max(neg, -mult.lambda_unknown.minCoeff());
  rep.comp_slack_residual = std::max(rep.comp_slack_residual, neg);
  rep.stationarity_residual = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  rep.consistent = rep.max_residual() <= tol;
  return rep;
}

ResidualFit DemoKkt::stationarity(const std::vector<std::uint32_t>& dirs) const {
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = cache_.find(dirs);
    if (it != cache_.end()) return it->second;
  }
  const Eigen::Index nk = G_known_active_.cols();
  Eigen::MatrixXd G(static_cast<Eigen::Index>(nz_), nk + static_cast<Eigen::Index>(dirs.size()));
  G.leftCols(nk) = G_known_active_;
  for (std::size_t c = 0; c < dirs.size(); ++c) G.col(nk + static_cast<Eigen::Index>(c)) = D_.col(dirs[c]);
  ResidualFit fit = min_max_residual(g0_, E_, G);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_.emplace(dirs, fit);
  return fit;
}

KktReport DemoKkt::check_box(const Box& theta_box, double tol, Multipliers* witness) const {
  if (theta_box.dim() != model_.theta_dim()) throw ValidationError("theta_box", "dimension mismatch");
  KktReport rep;
  rep.primal_residual = known_primal_;

  // direction id -> facet that may carry its multiplier
  std::vector<std::pair<std::uint32_t, std::size_t>> allowed;
  for (std::size_t b = 0; b < model_.blocks().size(); ++b) {
    const auto& blk = model_.block(b);
    for (std::size_t t = 0; t < n_points(b); ++t) {
      const Point& kap = kappa_[b][t];
      for (std::size_t m = 0; m < blk.n_obs; ++m) {
        if (blk.is_scalar_bound()) {
          const std::size_t idx = blk.theta_index(m, 0, false);
          rep.primal_residual = std::max(rep.primal_residual, kap[0] - theta_box.lo(idx));
          if (theta_box.degenerate(idx) && std::abs(kap[0] - theta_box.lo(idx)) <= kActiveTol) {
            allowed.emplace_back(direction_id(b, 0, false, t), unknown_index({b, m, 0, false}, t));
          }
          continue;
        }
        const std::size_t k = blk.kappa_dim;
        double g_max = kInf;
        // Smallest facet value over the box, per facet: v_lo = kap - lo, v_hi = hi - kap.
        std::vector<double> vmin(2 * k);
        for (std::size_t a = 0; a < k; ++a) {
          const std::size_t il = blk.theta_index(m, a, false), ih = blk.theta_index(m, a, true);
          g_max = std::min({g_max, kap[a] - theta_box.lo(il), theta_box.hi(ih) - kap[a]});
          vmin[a] = kap[a] - theta_box.hi(il);
          vmin[k + a] = theta_box.lo(ih) - kap[a];
        }
        rep.primal_residual = std::max(rep.primal_residual, g_max);
        for (std::size_t f = 0; f < 2 * k; ++f) {
          const bool upper = f >= k;
          const std::size_t a = f % k;
          const std::size_t idx = blk.theta_index(m, a, upper);
          if (!theta_box.degenerate(idx) || std::abs(vmin[f]) > kActiveTol) continue;
          bool on_face = true;
          for (std::size_t o = 0; o < 2 * k && on_face; ++o) {
            if (o != f && vmin[o] < -kActiveTol) on_face = false;
          }
          if (on_face) allowed.emplace_back(direction_id(b, a, upper, t), unknown_index({b, m, a, upper}, t));
        }
      }
    }
  }
  rep.primal_residual = std::max(0.0, rep.primal_residual);
  if (rep.primal_residual > tol && !witness) {
    rep.stationarity_residual = kInf;
    rep.consistent = false;
    return rep;
  }

  std::sort(allowed.begin(), allowed.end());
  std::vector<std::uint32_t> dirs;
  std::vector<std::size_t> carrier;
  for (const auto& [d, u] : allowed) {
    if (dirs.empty() || dirs.back() != d) {
      dirs.push_back(d);
      carrier.push_back(u);
    }
  }
  const ResidualFit fit = stationarity(dirs);
  rep.stationarity_residual = fit.residual;

  // Multipliers only sit on pinned facets the demo point touches, so the
  // complementary slackness residual is zero up to kActiveTol.
  const Eigen::Index nk = G_known_active_.cols();
  if (witness) {
    witness->nu = fit.nu;
    witness->lambda_known = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_known_));
    for (Eigen::Index c = 0; c < nk; ++c) witness->lambda_known(static_cast<Eigen::Index>(known_active_[c])) = fit.lambda(c);
    witness->lambda_unknown = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_unknown_));
    for (std::size_t c = 0; c < dirs.size(); ++c) {
      witness->lambda_unknown(static_cast<Eigen::Index>(carrier[c])) = fit.lambda(nk + static_cast<Eigen::Index>(c));
    }
  }
  rep.consistent = rep.primal_residual <= tol && rep.stationarity_residual <= tol;
  return rep;
}

KktContext::KktContext(const Task& task, const ConstraintModel& model, const std::vector<Trajectory>& demos,
                       double tol)
    : task_(task), model_(model), tol_(tol) {
  for (const auto& d : demos) demos_.push_back(std::make_unique<DemoKkt>(task_, model_, d));
}

bool KktContext::robust_box_consistent(const Box& theta_box) const {
  for (const auto& d : demos_) {
    if (!d->check_box(theta_box, tol_).consistent) return false;
  }
  return true;
}

KktReport kkt_residuals(const Trajectory& traj, std::span<const double> theta, const Multipliers& mult,
                        const Task& task, const ConstraintModel& model, double tol) {
  DemoKkt d(task, model, traj);
  return d.residuals(theta, mult, tol);
}

std::pair<bool, Multipliers> certify_local_opt(const Trajectory& traj, std::span<const double> theta,
                                               const Task& task, const ConstraintModel& model, double tol) {
  DemoKkt d(task, model, traj);
  Multipliers mult;
  const KktReport rep = d.check_box(Box::point(theta), tol, &mult);
  return {rep.consistent, std::move(mult)};
}

bool robust_box_consistent(const Box& theta_box, const std::vector<Trajectory>& demos, const Task& task,
                           const ConstraintModel& model, double tol) {
  KktContext ctx(task, model, demos, tol);
  return ctx.robust_box_consistent(theta_box);
}

}  // namespace kktplan
