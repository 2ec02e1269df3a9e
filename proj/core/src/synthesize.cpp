// Demonstration synthesis: lattice seed, augmented-Lagrangian refinement on
// the convex piece selected by the seed, then an active-set Newton polish.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "kktplan/kkt.hpp"
#include "kktplan/planning.hpp"
#include "kktplan/rng.hpp"

namespace kktplan {

namespace {

// a . z <= rhs, or |u_t|^2 <= rhs when quad_t is set.
struct Ineq {
  std::vector<std::pair<std::size_t, double>> a;
  double rhs = 0.0;
  bool quad = false;
  std::size_t u0 = 0, m = 0;  // control slice for the quadratic form
};

class Problem {
 public:
  Problem(const Task& task, const ConstraintModel& model, std::span<const double> theta)
      : task_(task), dyn_(task.dynamics), T_(task.horizon), n_(dyn_.state_dim()), m_(dyn_.control_dim()) {
    nz_ = T_ * n_ + (T_ - 1) * m_;
    build_equalities();
    build_bounds();
    theta_.assign(theta.begin(), theta.end());
    model_ = &model;
  }

  std::size_t nz() const { return nz_; }
  std::size_t xi(std::size_t t, std::size_t j) const { return t * n_ + j; }
  std::size_t ui(std::size_t t, std::size_t j) const { return T_ * n_ + t * m_ + j; }

  Eigen::VectorXd pack(const Trajectory& tr) const {
    Eigen::VectorXd z(nz_);
    for (std::size_t t = 0; t < T_; ++t) {
      for (std::size_t j = 0; j < n_; ++j) z[xi(t, j)] = tr.states[t][j];
    }
    for (std::size_t t = 0; t + 1 < T_; ++t) {
      for (std::size_t j = 0; j < m_; ++j) z[ui(t, j)] = tr.controls[t][j];
    }
    return z;
  }

  Trajectory unpack(const Eigen::VectorXd& z) const {
    Trajectory tr;
    for (std::size_t t = 0; t < T_; ++t) {
      Point x(n_);
      for (std::size_t j = 0; j < n_; ++j) x[j] = z[xi(t, j)];
      tr.states.push_back(std::move(x));
    }
    for (std::size_t t = 0; t + 1 < T_; ++t) {
      Point u(m_);
      for (std::size_t j = 0; j < m_; ++j) u[j] = z[ui(t, j)];
      tr.controls.push_back(std::move(u));
    }
    return tr;
  }

  // Halfspaces keeping each state on the side of every box the seed is on.
  void choose_sides(const Trajectory& seed) {
    const auto& model = *model_;
    auto add_side = [&](std::size_t t, const Box& box) {
      const Point& x = seed.states[t];
      const std::size_t k = box.dim();
      double best = -std::numeric_limits<double>::infinity();
      std::size_t axis = 0;
      bool upper = false;
      for (std::size_t i = 0; i < k; ++i) {
        if (box.lo(i) - x[i] > best) best = box.lo(i) - x[i], axis = i, upper = false;
        if (x[i] - box.hi(i) > best) best = x[i] - box.hi(i), axis = i, upper = true;
      }
      Ineq c;
      if (upper) {
        c.a = {{xi(t, axis), -1.0}};
        c.rhs = -box.hi(axis);
      } else {
        c.a = {{xi(t, axis), 1.0}};
        c.rhs = box.lo(axis);
      }
      sides_.push_back(static_cast<int>(2 * axis + (upper ? 1 : 0)));
      ineq_.push_back(std::move(c));
    };
    for (std::size_t t = 0; t < T_; ++t) {
      for (const auto& kb : task_.known_unsafe) add_side(t, kb);
    }
    for (std::size_t b = 0; b < model.blocks().size(); ++b) {
      const auto& blk = model.block(b);
      if (blk.is_scalar_bound()) {
        const double cap = theta_[blk.theta_index(0, 0, false)];
        for (std::size_t t = 0; t + 1 < T_; ++t) {
          Ineq c;
          c.quad = true;
          c.u0 = ui(t, 0);
          c.m = m_;
          c.rhs = cap;
          ineq_.push_back(std::move(c));
        }
        continue;
      }
      for (std::size_t mo = 0; mo < blk.n_obs; ++mo) {
        Point lo, hi;
        model.obstacle_bounds(b, mo, theta_, lo, hi);
        bool empty = false;
        for (std::size_t i = 0; i < lo.size(); ++i) empty = empty || !(lo[i] < hi[i]);
        if (empty) continue;
        for (std::size_t t = 0; t < T_; ++t) add_side(t, Box(lo, hi));
      }
    }
  }

  double cost(const Eigen::VectorXd& z) const { return 0.5 * z.dot(H_ * z); }
  Eigen::VectorXd cost_grad(const Eigen::VectorXd& z) const { return H_ * z; }
  const Eigen::MatrixXd& cost_hess() const { return H_; }

  double c_value(const Ineq& c, const Eigen::VectorXd& z) const {
    if (c.quad) {
      double s = 0.0;
      for (std::size_t j = 0; j < c.m; ++j) s += z[c.u0 + j] * z[c.u0 + j];
      return s - c.rhs;
    }
    double s = 0.0;
    for (const auto& [i, a] : c.a) s += a * z[i];
    return s - c.rhs;
  }

  void c_grad(const Ineq& c, const Eigen::VectorXd& z, Eigen::VectorXd& g) const {
    g.setZero(nz_);
    if (c.quad) {
      for (std::size_t j = 0; j < c.m; ++j) g[c.u0 + j] = 2.0 * z[c.u0 + j];
    } else {
      for (const auto& [i, a] : c.a) g[i] += a;
    }
  }

  const std::vector<Ineq>& ineq() const { return ineq_; }
  const std::vector<int>& sides() const { return sides_; }
  const Eigen::MatrixXd& E() const { return E_; }
  const Eigen::VectorXd& e() const { return e_; }

 private:
  void build_equalities() {
    const std::size_t neq = (T_ - 1) * n_ + 2 * n_;
    E_ = Eigen::MatrixXd::Zero(static_cast<long>(nz_), static_cast<long>(neq));
    e_ = Eigen::VectorXd::Zero(static_cast<long>(neq));
    std::size_t r = 0;
    const double dt = dyn_.dt;
    for (std::size_t t = 0; t + 1 < T_; ++t) {
      for (std::size_t j = 0; j < n_; ++j, ++r) {
        E_(xi(t + 1, j), r) = 1.0;
        E_(xi(t, j), r) = -1.0;
        if (dyn_.kind == DynamicsKind::SingleIntegrator) {
          E_(ui(t, j), r) = -dt;
        } else if (j < dyn_.dim) {
          E_(xi(t, dyn_.dim + j), r) = -dt;
        } else {
          E_(ui(t, j - dyn_.dim), r) = -dt;
        }
      }
    }
    for (std::size_t j = 0; j < n_; ++j, ++r) {
      E_(xi(0, j), r) = 1.0;
      e_[r] = task_.start[j];
    }
    for (std::size_t j = 0; j < n_; ++j, ++r) {
      E_(xi(T_ - 1, j), r) = 1.0;
      e_[r] = task_.goal[j];
    }
    // Quadratic cost 0.5 z' H z.
    H_ = Eigen::MatrixXd::Zero(static_cast<long>(nz_), static_cast<long>(nz_));
    if (task_.cost == CostKind::SumSquaredControl) {
      for (std::size_t t = 0; t + 1 < T_; ++t) {
        for (std::size_t j = 0; j < m_; ++j) H_(ui(t, j), ui(t, j)) = 2.0;
      }
    } else {
      for (std::size_t t = 0; t + 1 < T_; ++t) {
        for (std::size_t j = 0; j < dyn_.dim; ++j) {
          const std::size_t a = xi(t, j), b = xi(t + 1, j);
          H_(a, a) += 2.0;
          H_(b, b) += 2.0;
          H_(a, b) -= 2.0;
          H_(b, a) -= 2.0;
        }
      }
    }
  }

  void build_bounds() {
    for (std::size_t t = 0; t < T_; ++t) {
      for (std::size_t j = 0; j < n_; ++j) {
        ineq_.push_back({{{xi(t, j), 1.0}}, dyn_.state_bounds.hi(j)});
        ineq_.push_back({{{xi(t, j), -1.0}}, -dyn_.state_bounds.lo(j)});
      }
    }
    for (std::size_t t = 0; t + 1 < T_; ++t) {
      for (std::size_t j = 0; j < m_; ++j) {
        ineq_.push_back({{{ui(t, j), 1.0}}, dyn_.control_bounds.hi(j)});
        ineq_.push_back({{{ui(t, j), -1.0}}, -dyn_.control_bounds.lo(j)});
      }
    }
  }

  const Task& task_;
  const Dynamics& dyn_;
  const ConstraintModel* model_ = nullptr;
  std::size_t T_, n_, m_, nz_ = 0;
  Point theta_;
  Eigen::MatrixXd E_, H_;
  Eigen::VectorXd e_;
  std::vector<Ineq> ineq_;
  std::vector<int> sides_;
};

// Newton step on the quadratic model with the equalities as hard constraints.
Eigen::VectorXd constrained_newton(const Eigen::MatrixXd& H, const Eigen::VectorXd& g, const Eigen::MatrixXd& A,
                                   const Eigen::VectorXd& resid) {
  const long nz = H.rows(), na = A.cols();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nz + na, nz + na);
  K.topLeftCorner(nz, nz) = H + 1e-10 * Eigen::MatrixXd::Identity(nz, nz);
  K.topRightCorner(nz, na) = A;
  K.bottomLeftCorner(na, nz) = A.transpose();
  Eigen::VectorXd rhs(nz + na);
  rhs << -g, resid;
  const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
  return sol.head(nz);
}

// Augmented Lagrangian on the convex piece, then an active-set polish.
Eigen::VectorXd solve_piece(const Problem& prob, Eigen::VectorXd z, const SynthesisOptions& opts) {
  const auto& cons = prob.ineq();
  const std::size_t nc = cons.size();
  const Eigen::MatrixXd& E = prob.E();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<long>(nc));
  double rho = 10.0;
  Eigen::VectorXd gc;

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    for (int inner = 0; inner < opts.max_inner; ++inner) {
      Eigen::VectorXd g = prob.cost_grad(z);
      Eigen::MatrixXd Hm = prob.cost_hess();
      for (std::size_t i = 0; i < nc; ++i) {
        const double s = mu[i] / rho + prob.c_value(cons[i], z);
        if (s <= 0.0) continue;
        prob.c_grad(cons[i], z, gc);
        g += rho * s * gc;
        Hm += rho * gc * gc.transpose();
        if (cons[i].quad) {
          for (std::size_t j = 0; j < cons[i].m; ++j) Hm(cons[i].u0 + j, cons[i].u0 + j) += 2.0 * rho * s;
        }
      }
      const Eigen::VectorXd dz = constrained_newton(Hm, g, E, prob.e() - E.transpose() * z);
      z += dz;
      if (dz.lpNorm<Eigen::Infinity>() < 1e-13) break;
    }
    double viol = 0.0;
    for (std::size_t i = 0; i < nc; ++i) {
      const double c = prob.c_value(cons[i], z);
      mu[i] = std::max(0.0, mu[i] + rho * c);
      viol = std::max(viol, c);
    }
    if (viol < 1e-10) break;
    rho = std::min(rho * 10.0, 1e12);
  }

  // Active-set polish: solve the KKT system with the active constraints as equalities.
  std::vector<char> active(nc, 0);
  for (std::size_t i = 0; i < nc; ++i) active[i] = mu[i] > 1e-9 || prob.c_value(cons[i], z) > -1e-7;
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<std::size_t> act;
    for (std::size_t i = 0; i < nc; ++i) {
      if (active[i]) act.push_back(i);
    }
    const long nz = static_cast<long>(prob.nz());
    const long ne = E.cols();
    Eigen::VectorXd lam;
    for (int newton = 0; newton < 50; ++newton) {
      Eigen::MatrixXd A(nz, ne + static_cast<long>(act.size()));
      A.leftCols(ne) = E;
      Eigen::VectorXd resid(ne + static_cast<long>(act.size()));
      resid.head(ne) = prob.e() - E.transpose() * z;
      Eigen::MatrixXd Hm = prob.cost_hess();
      for (std::size_t k = 0; k < act.size(); ++k) {
        prob.c_grad(cons[act[k]], z, gc);
        A.col(ne + static_cast<long>(k)) = gc;
        resid[ne + static_cast<long>(k)] = -prob.c_value(cons[act[k]], z);
        if (cons[act[k]].quad && lam.size() == static_cast<long>(act.size())) {
          for (std::size_t j = 0; j < cons[act[k]].m; ++j) Hm(cons[act[k]].u0 + j, cons[act[k]].u0 + j) += 2.0 * lam[static_cast<long>(k)];
        }
      }
      const long na = A.cols();
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nz + na, nz + na);
      K.topLeftCorner(nz, nz) = Hm + 1e-12 * Eigen::MatrixXd::Identity(nz, nz);
      K.topRightCorner(nz, na) = A;
      K.bottomLeftCorner(na, nz) = A.transpose();
      Eigen::VectorXd rhs(nz + na);
      rhs << -prob.cost_grad(z), resid;
      const Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);
      z += sol.head(nz);
      // Stationarity is grad f + A w = 0 with w = multipliers; inequality multipliers are the tail.
      lam = sol.tail(na).tail(static_cast<long>(act.size()));
      if (sol.head(nz).lpNorm<Eigen::Infinity>() < 1e-14) break;
    }
    // Drop the most negative multiplier, else add the most violated constraint.
    std::size_t worst = SIZE_MAX;
    double worst_val = -1e-10;
    for (std::size_t k = 0; k < act.size(); ++k) {
      if (lam[static_cast<long>(k)] < worst_val) worst_val = lam[static_cast<long>(k)], worst = act[k];
    }
    if (worst != SIZE_MAX) {
      active[worst] = 0;
      continue;
    }
    double viol = 1e-10;
    std::size_t add = SIZE_MAX;
    for (std::size_t i = 0; i < nc; ++i) {
      if (active[i]) continue;
      const double c = prob.c_value(cons[i], z);
      if (c > viol) viol = c, add = i;
    }
    if (add == SIZE_MAX) break;
    active[add] = 1;
  }

  return z;
}

}  // namespace

Trajectory synthesize_demo(const Task& task, const ConstraintModel& model, std::span<const double> theta_true,
                           const SynthesisOptions& opts) {
  if (theta_true.size() != model.theta_dim()) throw ValidationError("theta", "dimension mismatch");
  const Dynamics& dyn = task.dynamics;

  // Seed from the lattice under the true constraint.
  double r = opts.lattice_resolution;
  if (!(r > 0.0)) {
    r = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dyn.dim; ++i) r = std::min(r, dyn.state_bounds.width(i) / 20.0);
  }
  ForbiddenSet forbidden(model);
  forbidden.add_theta_box(model, Box::point(theta_true));
  const auto seed = lattice_plan(task, model, forbidden, Lattice::for_dynamics(dyn, r));
  if (!seed) throw InfeasibleError("task is infeasible under the given parameters");

  Trajectory demo = *seed;
  std::vector<int> sides;
  // Re-pick sides from each refined solution until the selection settles.
  for (int round = 0; round < 20; ++round) {
    Problem prob(task, model, theta_true);
    prob.choose_sides(demo);
    if (round > 0 && prob.sides() == sides) break;
    sides = prob.sides();
    Eigen::VectorXd z = prob.pack(demo);
    if (round == 0) {
      // Small deterministic jitter on the controls keeps the refinement off symmetric saddles.
      Rng rng(opts.seed);
      for (long i = static_cast<long>(task.horizon * dyn.state_dim()); i < z.size(); ++i) z[i] += 1e-9 * (rng.uniform() - 0.5);
    }
    demo = prob.unpack(solve_piece(prob, z, opts));
  }
  // Snap the fixed endpoints exactly.
  demo.states.front() = task.start;
  demo.states.back() = task.goal;
  const auto [ok, mult] = certify_local_opt(demo, theta_true, task, model, opts.tol);
  if (!ok) {
    const double res = kkt_residuals(demo, theta_true, mult, task, model, opts.tol).max_residual();
    throw SynthesisError("demonstration synthesis did not reach the KKT tolerance", res);
  }
  return demo;
}

}  // namespace kktplan
