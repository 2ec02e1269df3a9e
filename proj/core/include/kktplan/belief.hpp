#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kktplan/extraction.hpp"
#include "kktplan/geometry.hpp"
#include "kktplan/scenario.hpp"

namespace kktplan {

class EmptyBeliefError : public std::runtime_error {
 public:
  EmptyBeliefError() : std::runtime_error("belief has no probability mass") {}
};

enum class MeasurementKind { ExactSafe, ExactUnsafe, AmbiguousUnsafe, AmbiguousSafe };

std::string to_string(MeasurementKind k);
MeasurementKind parse_measurement_kind(const std::string& s);

struct Measurement {
  MeasurementKind kind = MeasurementKind::ExactSafe;
  std::vector<Point> points;  ///< constraint-space points of `block`
  std::size_t block = 0;
};

/// Uniform belief over a union of parameter boxes.
///
/// Mass is measured at a reference rank fixed when the belief is created from
/// extraction: a support made of pinned (lower-rank) pieces still carries a
/// proper uniform distribution over its top-rank pieces.
class Belief {
 public:
  Belief() = default;
  Belief(BoxUnion support, std::size_t reference_rank);

  const BoxUnion& support() const { return support_; }
  std::size_t reference_rank() const { return rank_; }
  double total_volume() const { return total_; }
  /// True when the support carries no mass at the reference rank. The point
  /// set is still kept for guaranteed-set queries.
  bool empty() const { return !(total_ > 0.0); }

  /// Uniform density at a point of the support (0 outside).
  double density(std::span<const double> theta) const;

 private:
  BoxUnion support_;
  std::size_t rank_ = 0;
  double total_ = 0.0;
};

Belief belief_from_extraction(const ExtractionResult& result);
Belief belief_from_support(const BoxUnion& support);

double prob_of(const Belief& belief, const Box& theta_box);
double prob_of(const Belief& belief, const BoxUnion& theta_set);

/// Parameters of the support under which every listed point of block b is safe.
BoxUnion safe_thetas(const BoxUnion& support, const ConstraintModel& model, std::size_t b,
                     const std::vector<Point>& kappas);

/// Constraint points checked for a trajectory: the first state and the
/// interpolated step points of every transition (spacing <= 0 checks states only).
std::vector<Point> trajectory_points(const Task& task, const ConstraintModel& model, std::size_t b,
                                     const Trajectory& traj, double spacing = 0.0);

/// Probability that a trajectory is safe under the belief (exact for box models).
double prob_traj_safe(const Belief& belief, const Task& task, const ConstraintModel& model, const Trajectory& traj,
                      double spacing = 0.0);

Belief update(const Belief& belief, const Measurement& m, const ConstraintModel& model);

/// True if theta is consistent with the measurement.
bool satisfies(const Measurement& m, const ConstraintModel& model, std::span<const double> theta);

std::vector<Point> sample_belief(const Belief& belief, std::size_t n, std::uint64_t seed);

}  // namespace kktplan
