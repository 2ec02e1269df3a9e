#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kktplan/lp.hpp"
#include "kktplan/scenario.hpp"

namespace kktplan {

inline constexpr double kDefaultKktTol = 1e-6;
/// A facet counts as touched when the point lies on it within this distance.
inline constexpr double kActiveTol = 1e-6;

/// Lagrange multipliers for one trajectory.
///   lambda_known:   state bounds (t, j, lo/hi), control bounds, then known box facets (box, t, facet)
///   lambda_unknown: (block, obstacle, facet, point) in ConstraintModel::facets order
///   nu:             dynamics (t, j), then start (j), then goal (j)
struct Multipliers {
  Eigen::VectorXd lambda_known;
  Eigen::VectorXd lambda_unknown;
  Eigen::VectorXd nu;
};

struct KktReport {
  double primal_residual = 0.0;
  double comp_slack_residual = 0.0;
  double stationarity_residual = 0.0;
  bool consistent = false;

  double max_residual() const;
};

/// Precomputed KKT data for one demonstration: flattened decision vector
/// z = [x_0..x_{T-1}, u_0..u_{T-2}], cost gradient, equality Jacobian, known
/// active inequality gradients and one gradient column per unknown facet
/// direction (block, axis, side, point).
class DemoKkt {
 public:
  DemoKkt(const Task& task, const ConstraintModel& model, Trajectory demo);
  DemoKkt(const DemoKkt&) = delete;
  DemoKkt& operator=(const DemoKkt&) = delete;

  const Trajectory& demo() const { return demo_; }
  std::size_t horizon() const { return demo_.states.size(); }
  std::size_t nz() const { return nz_; }
  std::size_t n_points(std::size_t block) const { return kappa_[block].size(); }
  /// Constraint point t of block b.
  const Point& kappa(std::size_t block, std::size_t t) const { return kappa_[block][t]; }

  std::size_t n_known() const { return n_known_; }
  std::size_t n_unknown() const { return n_unknown_; }
  std::size_t n_eq() const { return static_cast<std::size_t>(E_.cols()); }
  std::size_t unknown_index(const FacetRef& f, std::size_t t) const;

  const Eigen::VectorXd& cost_gradient() const { return g0_; }
  const Eigen::MatrixXd& eq_jacobian() const { return E_; }
  Eigen::VectorXd known_gradient(std::size_t k) const;
  Eigen::VectorXd direction_gradient(std::size_t block, std::size_t axis, bool upper, std::size_t t) const;
  std::uint32_t direction_id(std::size_t block, std::size_t axis, bool upper, std::size_t t) const;

  /// Largest violation of the theta-independent constraints (bounds, known boxes).
  double known_primal() const { return known_primal_; }

  KktReport residuals(std::span<const double> theta, const Multipliers& mult, double tol) const;

  /// Best stationarity residual using the known active set plus the given
  /// unknown directions. Memoized per direction set.
  ResidualFit stationarity(const std::vector<std::uint32_t>& dirs) const;

  /// Robust KKT check over a parameter box. Fills the witness when given.
  KktReport check_box(const Box& theta_box, double tol, Multipliers* witness = nullptr) const;

 private:
  struct KnownCon {
    enum Kind { StateBound, ControlBound, KnownBox } kind;
    std::size_t t, j;
    bool upper;
    std::size_t box;
  };

  void build_known();
  void build_equalities();
  void build_cost_gradient();
  void build_directions();
  double known_value(std::size_t k, double* box_g) const;
  std::size_t xi(std::size_t t, std::size_t j) const { return t * n_ + j; }
  std::size_t ui(std::size_t t, std::size_t j) const { return horizon() * n_ + t * m_ + j; }

  const Task& task_;
  const ConstraintModel& model_;
  Trajectory demo_;
  std::size_t n_ = 0, m_ = 0, nz_ = 0;
  std::vector<std::vector<Point>> kappa_;  // per block, per point

  Eigen::VectorXd g0_;
  Eigen::MatrixXd E_;
  std::size_t n_known_ = 0;
  std::size_t n_unknown_ = 0;
  std::vector<std::size_t> unknown_offset_;  // per block
  std::vector<std::size_t> dir_offset_;      // per block
  Eigen::MatrixXd D_;                        // one column per facet direction
  std::vector<KnownCon> known_;
  std::vector<std::size_t> known_active_;
  Eigen::MatrixXd G_known_active_;
  double known_primal_ = 0.0;

  mutable std::mutex cache_mutex_;
  mutable std::map<std::vector<std::uint32_t>, ResidualFit> cache_;
};

/// Shared robust-consistency oracle over a fixed set of demonstrations.
class KktContext {
 public:
  KktContext(const Task& task, const ConstraintModel& model, const std::vector<Trajectory>& demos,
             double tol = kDefaultKktTol);
  KktContext(const KktContext&) = delete;
  KktContext& operator=(const KktContext&) = delete;

  const Task& task() const { return task_; }
  const ConstraintModel& model() const { return model_; }
  double tol() const { return tol_; }
  std::size_t n_demos() const { return demos_.size(); }
  const DemoKkt& demo(std::size_t i) const { return *demos_[i]; }

  bool robust_box_consistent(const Box& theta_box) const;
  bool certify(std::span<const double> theta) const { return robust_box_consistent(Box::point(theta)); }

 private:
  Task task_;
  ConstraintModel model_;
  double tol_;
  std::vector<std::unique_ptr<DemoKkt>> demos_;
};

KktReport kkt_residuals(const Trajectory& traj, std::span<const double> theta, const Multipliers& mult,
                        const Task& task, const ConstraintModel& model, double tol = kDefaultKktTol);

std::pair<bool, Multipliers> certify_local_opt(const Trajectory& traj, std::span<const double> theta,
                                               const Task& task, const ConstraintModel& model,
                                               double tol = kDefaultKktTol);

bool robust_box_consistent(const Box& theta_box, const std::vector<Trajectory>& demos, const Task& task,
                           const ConstraintModel& model, double tol = kDefaultKktTol);

class SynthesisError : public std::runtime_error {
 public:
  SynthesisError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct SynthesisOptions {
  double tol = kDefaultKktTol;
  int max_outer = 50;
  int max_inner = 400;
  double lattice_resolution = 0.0;  ///< 0 picks a default from the state bounds
  std::uint64_t seed = 0;
};

/// Locally optimal trajectory for the task under theta_true, from start to goal.
/// Throws InfeasibleError when the seeding lattice finds no path and
/// SynthesisError when the refined trajectory fails the KKT check.
Trajectory synthesize_demo(const Task& task, const ConstraintModel& model, std::span<const double> theta_true,
                           const SynthesisOptions& opts = {});

}  // namespace kktplan
