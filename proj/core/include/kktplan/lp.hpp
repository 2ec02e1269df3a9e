#pragma once

#include <Eigen/Dense>

namespace kktplan {

enum class LpStatus { Optimal, Unbounded, IterationLimit };

struct LpResult {
  LpStatus status = LpStatus::IterationLimit;
  double objective = 0.0;
  Eigen::VectorXd x;
  int iterations = 0;
};

/// maximize c'x subject to A x <= b, x >= 0, with b >= 0 so the origin is feasible.
/// Dense tableau simplex; Dantzig pricing, Bland's rule once progress stalls.
LpResult simplex_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                     int max_iterations = 20000);

struct ResidualFit {
  double residual = 0.0;   ///< || g0 + E nu + G lambda ||_inf at the returned point
  Eigen::VectorXd nu;      ///< free multipliers (columns of E)
  Eigen::VectorXd lambda;  ///< nonnegative multipliers (columns of G)
  bool converged = true;
};

/// min over nu free, lambda >= 0 of || g0 + E nu + G lambda ||_inf.
ResidualFit min_max_residual(const Eigen::VectorXd& g0, const Eigen::MatrixXd& E, const Eigen::MatrixXd& G);

}  // namespace kktplan
