#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "kktplan/belief.hpp"
#include "kktplan/policy.hpp"
#include "kktplan/rng.hpp"

namespace kktplan {

enum class SensorKind { Bump, Lidar, AmbiguousContact };
std::string to_string(SensorKind k);
SensorKind parse_sensor_kind(const std::string& s);

struct SensorSpec {
  SensorKind kind = SensorKind::Bump;
  double range = 0.5;             ///< lidar radius in workspace units
  std::size_t grid = 10;          ///< lidar grid points per range
  std::size_t candidates = 300;   ///< points in an ambiguous contact set
  double contact_radius = 0.05;   ///< decoy ball around the contact point

  void validate() const;
};

/// Exact label of one constraint point under the true parameter.
Measurement sense_point(const ConstraintModel& model, std::size_t block, std::span<const double> theta_true,
                        const Point& kappa);

/// Exact labels of the lattice of spacing range / grid within range of the
/// position, clipped to the block's kappa bounds: safe points first, then
/// unsafe ones (empty groups are dropped). Box blocks over positions only.
std::vector<Measurement> sense_lidar(const SensorSpec& spec, const ConstraintModel& model, std::size_t block,
                                     std::span<const double> theta_true, const Point& position);

/// Ambiguous-unsafe set: the violating point plus decoys drawn uniformly in a
/// ball around it (clipped to the kappa bounds).
Measurement sense_contact(const SensorSpec& spec, const ConstraintModel& model, std::size_t block,
                          const Point& violating, Rng& rng);

struct TraceStep {
  Point state;    ///< state before the step
  Point control;  ///< attempted control
  bool violation = false;
  bool switched = false;
};

struct ExecutionTrace {
  std::vector<TraceStep> steps;
  Point final_state;
  std::vector<Measurement> measurements;
  std::size_t violations = 0;
  std::vector<Point> violation_points;
  std::size_t switches = 0;
  double cost = 0.0;
  bool reached_goal = false;
  std::string failure;
};

struct EpisodeOptions {
  SensorSpec sensor;
  std::size_t max_steps = 0;         ///< 0 = 10 x horizon
  bool keep_measurements = true;
};

/// Closed-loop execution under the true parameter. A step whose constraint
/// points include a truly unsafe one is overridden: it counts one violation,
/// the robot stays put and the policy receives contact feedback. With
/// ambiguous contact the exact-unsafe label becomes "some remaining point of
/// this edge is unsafe" plus the contact set.
ExecutionTrace run_episode(const Task& task, const ConstraintModel& model, std::span<const double> theta_true,
                           PolicyRuntime& policy, const EpisodeOptions& opts, std::uint64_t seed);

/// Convenience: online runtime, or tree runtime when a tree is supplied.
ExecutionTrace run_episode(const Task& task, const ConstraintModel& model, const Belief& belief,
                           std::span<const double> theta_true, const PolicyConfig& config,
                           const EpisodeOptions& opts, std::uint64_t seed,
                           std::shared_ptr<const PolicyTree> tree = nullptr);

void write_trace_csv(std::ostream& os, const ExecutionTrace& trace);

struct NamedPolicy {
  std::string name;
  PolicyConfig config;
};

struct PolicyMetrics {
  std::string name;
  double mean_violations = 0.0;
  double std_violations = 0.0;
  double mean_cost = 0.0;
  double success_rate = 0.0;
  std::vector<std::size_t> violations;  ///< per trial
  std::vector<double> costs;
};

struct BenchmarkOptions {
  std::size_t n_trials = 100;
  std::uint64_t seed = 0;
  EpisodeOptions episode;
  bool use_tree = true;     ///< shared contingency tree per policy (bump sensing)
  std::size_t threads = 0;  ///< 0 = hardware concurrency
};

/// Runs every policy against the same i.i.d. draws theta*_i ~ belief, trial
/// i using Rng::derive_seed(seed, i).
std::vector<PolicyMetrics> benchmark(const Task& task, const ConstraintModel& model, const Belief& belief,
                                     const std::vector<NamedPolicy>& policies, const BenchmarkOptions& opts);

/// Ground-truth draw of trial i.
Point trial_theta(const Belief& belief, std::uint64_t seed, std::size_t trial);

/// Relative frequency of each violation count, index = count.
std::vector<double> violation_histogram(const std::vector<std::size_t>& counts);

void write_metrics_csv(std::ostream& os, const std::vector<PolicyMetrics>& metrics);
/// Histogram rows (count, empirical_freq, theoretical_freq); the theoretical
/// column is empty when no law is given.
void write_histogram_csv(std::ostream& os, const std::vector<double>& empirical, const OverrideLaw* law);

double total_variation(const std::vector<double>& empirical, const OverrideLaw& law);

}  // namespace kktplan
