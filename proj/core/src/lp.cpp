#include "kktplan/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace kktplan {

namespace {

constexpr double kPivotTol = 1e-11;

}  // namespace

LpResult simplex_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     int max_iterations) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  const int cols = n + m + 1;  // structural, slack, rhs
  std::vector<double> tab(static_cast<std::size_t>(m + 1) * cols, 0.0);
  auto at = [&](int r, int k) -> double& { return tab[static_cast<std::size_t>(r) * cols + k]; };

  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) at(i, j) = A(i, j);
    at(i, n + i) = 1.0;
    at(i, cols - 1) = std::max(0.0, b(i));
  }
  for (int j = 0; j < n; ++j) at(m, j) = -c(j);

  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;

  LpResult res;
  int stall = 0;
  double last_obj = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    res.iterations = it;
    const bool bland = stall > 50;
    int enter = -1;
    double best = -kPivotTol;
    for (int j = 0; j < n + m; ++j) {
      const double r = at(m, j);
      if (r < best) {
        enter = j;
        if (bland) break;
        best = r;
      }
    }
    if (enter < 0) {
      res.status = LpStatus::Optimal;
      break;
    }
    int leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      const double a = at(i, enter);
      if (a > kPivotTol) {
        const double q = at(i, cols - 1) / a;
        if (q < ratio - 1e-14 || (q <= ratio + 1e-14 && leave >= 0 && basis[i] < basis[leave])) {
          ratio = q;
          leave = i;
        }
      }
    }
    if (leave < 0) {
      res.status = LpStatus::Unbounded;
      break;
    }
    const double piv = at(leave, enter);
    for (int k = 0; k < cols; ++k) at(leave, k) /= piv;
    for (int i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double f = at(i, enter);
      if (f == 0.0) continue;
      double* row = &at(i, 0);
      const double* prow = &at(leave, 0);
      for (int k = 0; k < cols; ++k) row[k] -= f * prow[k];
    }
    basis[leave] = enter;
    const double obj = at(m, cols - 1);
    stall = obj > last_obj + 1e-12 ? 0 : stall + 1;
    last_obj = obj;
  }

  res.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) res.x(basis[i]) = std::max(0.0, at(i, cols - 1));
  }
  res.objective = c.dot(res.x);
  return res;
}

ResidualFit min_max_residual(const Eigen::VectorXd& g0, const Eigen::MatrixXd& E, const Eigen::MatrixXd& G) {
  const Eigen::Index nz = g0.size();
  const Eigen::Index ne = E.cols();
  const Eigen::Index ni = G.cols();
  ResidualFit fit;
  fit.nu = Eigen::VectorXd::Zero(ne);
  fit.lambda = Eigen::VectorXd::Zero(ni);
  const double s0 = nz ? g0.cwiseAbs().maxCoeff() : 0.0;
  fit.residual = s0;
  if (s0 == 0.0 || ne + ni == 0) return fit;

  // Residual r = g0 + M y with y = [nu+, nu-, lambda]. Minimizing s with
  // |r_i| <= s becomes maximizing t = s0 - s, which keeps every rhs >= 0.
  const Eigen::Index ny = 2 * ne + ni;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * nz + 1, ny + 1);
  Eigen::VectorXd b(2 * nz + 1);
  for (Eigen::Index r = 0; r < nz; ++r) {
    for (Eigen::Index j = 0; j < ne; ++j) {
      A(r, j) = E(r, j);
      A(r, ne + j) = -E(r, j);
    }
    for (Eigen::Index j = 0; j < ni; ++j) A(r, 2 * ne + j) = G(r, j);
    A(r, ny) = 1.0;
    b(r) = s0 - g0(r);
    A.row(nz + r).head(ny) = -A.row(r).head(ny);
    A(nz + r, ny) = 1.0;
    b(nz + r) = s0 + g0(r);
  }
  A(2 * nz, ny) = 1.0;
  b(2 * nz) = s0;
  Eigen::VectorXd c = Eigen::VectorXd::Zero(ny + 1);
  c(ny) = 1.0;

  const LpResult lp = simplex_max(c, A, b);
  fit.converged = lp.status == LpStatus::Optimal;
  fit.nu = lp.x.head(ne) - lp.x.segment(ne, ne);
  fit.lambda = lp.x.segment(2 * ne, ni);
  const Eigen::VectorXd r = g0 + E * fit.nu + G * fit.lambda;
  fit.residual = r.cwiseAbs().maxCoeff();
  if (fit.residual > s0) {
    fit.nu.setZero();
    fit.lambda.setZero();
    fit.residual = s0;
  }
  return fit;
}

}  // namespace kktplan
