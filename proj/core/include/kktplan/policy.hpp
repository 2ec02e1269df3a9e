#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kktplan/belief.hpp"
#include "kktplan/planning.hpp"
#include "kktplan/sampled_planners.hpp"

namespace kktplan {

enum class PolicyPlanner { EpsMin, Ratio, ChanceConstrained, GuaranteedSafe, Scenario, Optimistic, Mcr, Btp };
std::string to_string(PolicyPlanner p);
PolicyPlanner parse_policy_planner(const std::string& s);

enum class Trigger { OnUnsafe, OnUnsafeOrImprove };

struct PolicyConfig {
  PolicyPlanner planner = PolicyPlanner::EpsMin;
  Trigger trigger = Trigger::OnUnsafe;
  double rho = 0.0;             ///< improvement factor, > 1 with OnUnsafeOrImprove
  std::size_t tree_depth = 4;
  Lattice lattice;
  CcOptions cc;
  double eps = 0.1;             ///< chance-constrained planner only
  double optimistic_buffer = 0.0;
  std::size_t scenario_samples = 200;
  std::size_t roadmap_samples = 32;  ///< belief samples for mcr and btp
  double btp_beta = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Plans from the task start under the belief with the configured planner.
/// Throws InfeasibleError or EmptyBeliefError.
Plan plan_with(const PolicyConfig& config, const Belief& belief, const Task& task, const ConstraintModel& model);

/// Constraint point of one transition, tagged with its block.
struct TaggedPoint {
  std::size_t block = 0;
  Point kappa;
};

/// Points checked for the transition x -> dyn.step(x, u), blocks in order.
std::vector<TaggedPoint> transition_points(const Task& task, const ConstraintModel& model, const Point& x,
                                           const Point& u, double spacing);

inline constexpr std::size_t kNoPoint = std::numeric_limits<std::size_t>::max();

/// Contact feedback for one attempted transition: exact-safe labels for the
/// points before `first_unsafe` (all points when it is kNoPoint), grouped per
/// block, then exact-unsafe at the first unsafe point.
std::vector<Measurement> bump_measurements(const std::vector<TaggedPoint>& pts, std::size_t first_unsafe);

/// What the robot learned from one attempted step.
struct StepOutcome {
  bool violated = false;  ///< the step was overridden and not executed
  std::size_t first_unsafe = kNoPoint;
  std::vector<Measurement> measurements;
};

/// Execution state shared by the online and tree-backed runtimes.
class PolicyRuntime {
 public:
  virtual ~PolicyRuntime() = default;
  virtual bool done() const = 0;
  virtual bool failed() const = 0;
  virtual const std::string& failure() const = 0;
  virtual Point control() const = 0;
  /// Feeds back the result of the last control; returns true on a plan switch.
  virtual bool observe(const StepOutcome& outcome) = 0;
  virtual const Plan& plan() const = 0;
  virtual const Point& state() const = 0;
  /// Sampling distance used for the constraint points of a transition.
  virtual double spacing() const = 0;
};

/// One contingency: the plan adopted at `start` under `belief`.
struct PolicyNode {
  Point start;
  Belief belief;
  std::optional<Plan> plan;    ///< nullopt marks a terminal
  bool empty_belief = false;   ///< terminal because the outcome is impossible
  std::string failure;         ///< terminal because replanning failed
  double p_safe = 0.0;         ///< probability the whole plan is safe under `belief`
  std::size_t depth = 0;
  /// Step after which an all-safe execution would switch plans (kNoPoint: never).
  std::size_t switch_step = kNoPoint;
  /// Keyed by (step, first unsafe point); point kNoPoint is the all-safe switch.
  std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<PolicyNode>> children;
};

/// Contingency tree for bump sensing. Children beyond the built depth are
/// grown on demand, so execution never runs out of branches.
class PolicyTree {
 public:
  PolicyTree(const Task& task, const ConstraintModel& model, const Belief& belief, PolicyConfig config);
  PolicyTree(const PolicyTree&) = delete;
  PolicyTree& operator=(const PolicyTree&) = delete;

  const PolicyNode& root() const { return *root_; }
  const Task& task() const { return task_; }
  const ConstraintModel& model() const { return model_; }
  const PolicyConfig& config() const { return config_; }

  /// Child of a node, created on first use. Thread safe.
  const PolicyNode& child(const PolicyNode& node, std::size_t step, std::size_t point) const;
  /// Branches with an outcome that can occur from this node.
  std::vector<std::pair<std::size_t, std::size_t>> branch_keys(const PolicyNode& node) const;
  /// Expands every possible branch down to the given depth.
  void expand(std::size_t depth) const;

  std::size_t n_nodes() const;
  std::size_t max_depth() const;

 private:
  std::unique_ptr<PolicyNode> make_node(Point start, Belief belief, std::size_t depth) const;

  Task task_;
  ConstraintModel model_;
  PolicyConfig config_;
  std::unique_ptr<PolicyNode> root_;
  mutable std::mutex mutex_;
};

/// Builds the tree to config.tree_depth. Throws InfeasibleError when the root plan fails.
std::shared_ptr<PolicyTree> build_tree(const Belief& belief, const Task& task, const PolicyConfig& config,
                                       const ConstraintModel& model);

/// Replans whenever the configured trigger fires after a belief update.
std::unique_ptr<PolicyRuntime> make_online_runtime(const Task& task, const ConstraintModel& model,
                                                   const Belief& belief, const PolicyConfig& config);
/// Follows a contingency tree; valid for bump sensing only.
std::unique_ptr<PolicyRuntime> make_tree_runtime(std::shared_ptr<const PolicyTree> tree);

/// Probabilities that a sequential contingency chain ends after 0, 1, ... violations.
struct OverrideLaw {
  std::vector<double> probs;  ///< probs[i] = P(exactly i violations)
  double beyond = 0.0;        ///< mass past the listed plans
};
OverrideLaw theoretical_override_law(const std::vector<double>& p);

/// Per-plan safety probabilities along the override chain of a tree, or
/// nullopt when some node has more than one possible override or any
/// all-safe switch.
std::optional<std::vector<double>> override_chain(const PolicyTree& tree, std::size_t max_len = 16);

}  // namespace kktplan
