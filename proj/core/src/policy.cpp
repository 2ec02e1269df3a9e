#include "kktplan/policy.hpp"

#include <algorithm>
#include <cmath>

namespace kktplan {

namespace {

constexpr double kMassEps = 1e-12;

Task task_from(const Task& task, const Point& start) {
  Task t = task;
  t.start = start;
  return t;
}

bool is_zero(const Point& u) {
  return std::all_of(u.begin(), u.end(), [](double v) { return v == 0.0; });
}

// Remaining controls from k are all zero padding.
bool idle_from(const Plan& plan, std::size_t k) {
  for (std::size_t i = k; i < plan.traj.controls.size(); ++i) {
    if (!is_zero(plan.traj.controls[i])) return false;
  }
  return true;
}

// States reached by applying the plan's controls from `start`.
std::vector<Point> executed_states(const Dynamics& dyn, const Point& start, const std::vector<Point>& controls) {
  std::vector<Point> xs{start};
  for (const auto& u : controls) xs.push_back(dyn.step(xs.back(), u));
  return xs;
}

Trajectory suffix(const Dynamics& dyn, const Point& from, const Plan& plan, std::size_t k) {
  Trajectory tr;
  tr.controls.assign(plan.traj.controls.begin() + static_cast<long>(k), plan.traj.controls.end());
  tr.states = executed_states(dyn, from, tr.controls);
  return tr;
}

// ---- roadmap planners on the lattice grid ------------------------------------

struct GridRoadmap {
  Roadmap rm;
  double dt = 1.0;
};

GridRoadmap lattice_roadmap(const Task& task, const Lattice& lattice) {
  const Dynamics& dyn = task.dynamics;
  if (dyn.kind != DynamicsKind::SingleIntegrator) {
    throw ValidationError("policy", "roadmap planners need single-integrator dynamics");
  }
  const std::size_t d = dyn.dim;
  std::vector<std::size_t> n(d);
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) {
    n[i] = static_cast<std::size_t>(std::floor(dyn.state_bounds.width(i) / lattice.resolution[i] + 1e-9)) + 1;
    total *= n[i];
  }
  auto coord = [&](std::size_t id) {
    std::vector<std::size_t> c(d);
    for (std::size_t i = 0; i < d; ++i) c[i] = id % n[i], id /= n[i];
    return c;
  };
  auto pos = [&](const std::vector<std::size_t>& c) {
    Point p(d);
    for (std::size_t i = 0; i < d; ++i) p[i] = dyn.state_bounds.lo(i) + static_cast<double>(c[i]) * lattice.resolution[i];
    return p;
  };
  auto in_known = [&](const Point& p) {
    for (const auto& b : task.known_unsafe) {
      if (b.contains_strict(p, kStrictTol)) return true;
    }
    return false;
  };

  GridRoadmap g;
  g.dt = dyn.dt;
  std::vector<std::size_t> vid(total, kNoPoint);
  for (std::size_t id = 0; id < total; ++id) {
    const Point p = pos(coord(id));
    if (in_known(p)) continue;
    vid[id] = g.rm.vertices.size();
    g.rm.vertices.push_back(p);
  }
  // Forward neighbour offsets in {-1, 0, 1}^d.
  std::vector<std::vector<int>> offs;
  std::vector<int> o(d, -1);
  while (true) {
    std::size_t nz = 0;
    int first = 0;
    for (int v : o) {
      if (v != 0) {
        if (nz == 0) first = v;
        ++nz;
      }
    }
    if (nz > 0 && first > 0 && (lattice.diagonal || nz == 1)) offs.push_back(o);
    std::size_t i = 0;
    while (i < d && o[i] == 1) o[i++] = -1;
    if (i == d) break;
    ++o[i];
  }
  const double spacing = lattice.spacing();
  for (std::size_t id = 0; id < total; ++id) {
    if (vid[id] == kNoPoint) continue;
    const auto c = coord(id);
    for (const auto& off : offs) {
      std::size_t nid = 0, mul = 1;
      bool inside = true;
      Point u(d);
      for (std::size_t i = 0; i < d; ++i) {
        const long ci = static_cast<long>(c[i]) + off[i];
        if (ci < 0 || ci >= static_cast<long>(n[i])) inside = false;
        nid += static_cast<std::size_t>(std::max(ci, 0L)) * mul;
        mul *= n[i];
        u[i] = off[i] * lattice.resolution[i] / dyn.dt;
      }
      if (!inside || vid[nid] == kNoPoint || !dyn.control_bounds.contains(Box::point(u))) continue;
      const Point& a = g.rm.vertices[vid[id]];
      const Point& b = g.rm.vertices[vid[nid]];
      bool clear = true;
      double len = 0.0;
      for (std::size_t i = 0; i < d; ++i) len += (b[i] - a[i]) * (b[i] - a[i]);
      len = std::sqrt(len);
      const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(len / spacing)));
      for (std::size_t s = 1; s <= k && clear; ++s) {
        const double t = static_cast<double>(s) / static_cast<double>(k);
        Point q(d);
        for (std::size_t i = 0; i < d; ++i) q[i] = a[i] + t * (b[i] - a[i]);
        clear = !in_known(q);
      }
      if (!clear) continue;
      g.rm.edges.push_back({vid[id], vid[nid], task.step_cost(a, u, b)});
    }
  }
  auto vertex_of = [&](const Point& x) {
    std::size_t id = 0, mul = 1;
    for (std::size_t i = 0; i < d; ++i) {
      const double q = std::round((x[i] - dyn.state_bounds.lo(i)) / lattice.resolution[i]);
      id += static_cast<std::size_t>(std::clamp(q, 0.0, static_cast<double>(n[i] - 1))) * mul;
      mul *= n[i];
    }
    if (vid[id] == kNoPoint) throw InfeasibleError("start or goal lies inside a known obstacle");
    return vid[id];
  };
  g.rm.start = vertex_of(task.start);
  g.rm.goal = vertex_of(task.goal);
  return g;
}

Trajectory path_to_trajectory(const Task& task, const Roadmap& rm, const std::vector<std::size_t>& path) {
  if (path.empty()) throw InfeasibleError("no roadmap path to the goal");
  Trajectory tr;
  tr.states.push_back(rm.vertices[path.front()]);
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Point& a = rm.vertices[path[i - 1]];
    const Point& b = rm.vertices[path[i]];
    Point u(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) u[j] = (b[j] - a[j]) / task.dynamics.dt;
    tr.controls.push_back(u);
    tr.states.push_back(b);
  }
  while (tr.states.size() < task.horizon) {
    tr.controls.push_back(Point(task.dynamics.control_dim(), 0.0));
    tr.states.push_back(tr.states.back());
  }
  return tr;
}

Plan finish(const Belief& belief, const Task& task, const ConstraintModel& model, Trajectory traj, double spacing) {
  Plan p;
  p.cost = task.cost_of(traj);
  p.covered_prob = prob_traj_safe(belief, task, model, traj, spacing);
  p.epsilon_achieved = 1.0 - p.covered_prob;
  p.traj = std::move(traj);
  return p;
}

}  // namespace

std::string to_string(PolicyPlanner p) {
  switch (p) {
    case PolicyPlanner::EpsMin: return "epsmin";
    case PolicyPlanner::Ratio: return "ratio";
    case PolicyPlanner::ChanceConstrained: return "cc";
    case PolicyPlanner::GuaranteedSafe: return "safe";
    case PolicyPlanner::Scenario: return "scenario";
    case PolicyPlanner::Optimistic: return "optimistic";
    case PolicyPlanner::Mcr: return "mcr";
    case PolicyPlanner::Btp: return "btp";
  }
  return "?";
}

PolicyPlanner parse_policy_planner(const std::string& s) {
  for (auto p : {PolicyPlanner::EpsMin, PolicyPlanner::Ratio, PolicyPlanner::ChanceConstrained,
                 PolicyPlanner::GuaranteedSafe, PolicyPlanner::Scenario, PolicyPlanner::Optimistic, PolicyPlanner::Mcr,
                 PolicyPlanner::Btp}) {
    if (to_string(p) == s) return p;
  }
  throw ValidationError("policy", "unknown planner '" + s + "'");
}

void PolicyConfig::validate() const {
  if (trigger == Trigger::OnUnsafeOrImprove && !(rho > 1.0)) {
    throw ValidationError("rho", "improvement factor must exceed 1");
  }
  if (lattice.resolution.empty()) throw ValidationError("lattice", "resolution not set");
  if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("eps", "must lie in [0, 1]");
  if (optimistic_buffer < 0.0) throw ValidationError("buffer", "must be non-negative");
  if (btp_beta < 0.0) throw ValidationError("beta", "must be non-negative");
  if ((planner == PolicyPlanner::Mcr || planner == PolicyPlanner::Btp) && roadmap_samples == 0) {
    throw ValidationError("samples", "roadmap planners need at least one sample");
  }
}

Plan plan_with(const PolicyConfig& config, const Belief& belief, const Task& task, const ConstraintModel& model) {
  if (belief.empty()) throw EmptyBeliefError();
  const Lattice& lat = config.lattice;
  const double spacing = lat.spacing();
  switch (config.planner) {
    case PolicyPlanner::EpsMin: return plan_eps_min(belief, task, model, lat, config.cc);
    case PolicyPlanner::Ratio: return plan_ratio(belief, task, model, lat, config.cc);
    case PolicyPlanner::ChanceConstrained: return plan_cc(belief, task, model, config.eps, lat, config.cc);
    case PolicyPlanner::GuaranteedSafe:
      return finish(belief, task, model, plan_guaranteed_safe(belief.support(), task, model, lat), spacing);
    case PolicyPlanner::Scenario: {
      ScenarioOptions so;
      so.seed = config.seed;
      so.max_samples = config.scenario_samples;
      return plan_scenario(belief, task, model, lat, so);
    }
    case PolicyPlanner::Optimistic:
      return finish(belief, task, model, plan_optimistic(belief.support(), task, model, lat, config.optimistic_buffer),
                    spacing);
    case PolicyPlanner::Mcr:
    case PolicyPlanner::Btp: {
      if (model.blocks().size() != 1 || model.block(0).is_scalar_bound()) {
        throw ValidationError("policy", "roadmap planners need a single box block");
      }
      const GridRoadmap g = lattice_roadmap(task, lat);
      const auto samples = sample_belief(belief, config.roadmap_samples, config.seed);
      SampledOptions so;
      so.spacing = spacing;
      std::vector<std::size_t> path;
      if (config.planner == PolicyPlanner::Mcr) {
        path = mcr_plan(g.rm, samples, model, so).path;
      } else {
        path = btp_plan(g.rm, estimate_edge_safety(g.rm, samples, model, so), config.btp_beta);
      }
      return finish(belief, task, model, path_to_trajectory(task, g.rm, path), spacing);
    }
  }
  throw ValidationError("policy", "unknown planner");
}

std::vector<TaggedPoint> transition_points(const Task& task, const ConstraintModel& model, const Point& x,
                                           const Point& u, double spacing) {
  const Point y = task.dynamics.step(x, u);
  std::vector<TaggedPoint> out;
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    for (auto& k : step_points(task.dynamics, model.block(b), x, u, y, spacing)) out.push_back({b, std::move(k)});
  }
  return out;
}

std::vector<Measurement> bump_measurements(const std::vector<TaggedPoint>& pts, std::size_t first_unsafe) {
  std::vector<Measurement> out;
  const std::size_t n_safe = std::min(first_unsafe, pts.size());
  std::size_t n_blocks = 0;
  for (const auto& p : pts) n_blocks = std::max(n_blocks, p.block + 1);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    Measurement m;
    m.kind = MeasurementKind::ExactSafe;
    m.block = b;
    for (std::size_t i = 0; i < n_safe; ++i) {
      if (pts[i].block == b) m.points.push_back(pts[i].kappa);
    }
    if (!m.points.empty()) out.push_back(std::move(m));
  }
  if (first_unsafe < pts.size()) {
    out.push_back({MeasurementKind::ExactUnsafe, {pts[first_unsafe].kappa}, pts[first_unsafe].block});
  }
  return out;
}

namespace {

// Chance-constrained planners halt rather than execute a plan that is certainly unsafe.
bool needs_positive_safety(PolicyPlanner p) {
  return p == PolicyPlanner::EpsMin || p == PolicyPlanner::Ratio || p == PolicyPlanner::ChanceConstrained;
}

constexpr const char* kNoSafePlan = "no plan with positive safety probability";

Belief apply_all(Belief b, const std::vector<Measurement>& ms, const ConstraintModel& model) {
  for (const auto& m : ms) b = update(b, m, model);
  return b;
}

// Trigger shared by the online runtime and tree construction.
bool should_switch(const PolicyConfig& config, const Belief& belief, const Task& task, const ConstraintModel& model,
                   const Plan& plan, std::size_t k, const Point& state, double p_adopted) {
  if (idle_from(plan, k) || belief.empty()) return false;
  const double spacing = config.lattice.spacing();
  const Task here = task_from(task, state);
  const Trajectory rest = suffix(task.dynamics, state, plan, k);
  const double p = prob_traj_safe(belief, here, model, rest, spacing);
  if (p_adopted > kMassEps && p <= kMassEps) return true;
  if (config.trigger != Trigger::OnUnsafeOrImprove) return false;
  try {
    const Plan cand = plan_with(config, belief, here, model);
    const double pc = prob_traj_safe(belief, here, model, cand.traj, spacing);
    if (!(pc > kMassEps)) return false;
    if (!(p > kMassEps)) return true;
    return cand.cost / pc * config.rho < task.cost_of(rest) / p;
  } catch (const InfeasibleError&) {
    return false;
  }
}

class OnlineRuntime final : public PolicyRuntime {
 public:
  OnlineRuntime(const Task& task, const ConstraintModel& model, const Belief& belief, const PolicyConfig& config)
      : task_(task), model_(model), config_(config), belief_(belief), state_(task.start) {
    adopt();
  }

  bool done() const override { return !failed() && idle_from(*plan_, k_); }
  bool failed() const override { return !plan_.has_value(); }
  const std::string& failure() const override { return failure_; }
  Point control() const override { return plan_->traj.controls[k_]; }
  const Plan& plan() const override { return *plan_; }
  const Point& state() const override { return state_; }
  double spacing() const override { return config_.lattice.spacing(); }

  bool observe(const StepOutcome& outcome) override {
    const Point u = control();
    belief_ = apply_all(std::move(belief_), outcome.measurements, model_);
    if (outcome.violated) {
      adopt();
      return true;
    }
    state_ = task_.dynamics.step(state_, u);
    ++k_;
    if (done()) return false;
    if (should_switch(config_, belief_, task_, model_, *plan_, k_, state_, p_adopted_)) {
      adopt();
      return true;
    }
    return false;
  }

 private:
  void adopt() {
    k_ = 0;
    plan_.reset();
    if (belief_.empty()) {
      failure_ = "belief became empty";
      return;
    }
    const Task here = task_from(task_, state_);
    try {
      plan_ = plan_with(config_, belief_, here, model_);
      p_adopted_ = prob_traj_safe(belief_, here, model_, plan_->traj, config_.lattice.spacing());
      if (needs_positive_safety(config_.planner) && p_adopted_ <= kMassEps) {
        plan_.reset();
        failure_ = kNoSafePlan;
      }
    } catch (const InfeasibleError& e) {
      failure_ = e.what();
    } catch (const EmptyBeliefError& e) {
      failure_ = e.what();
    }
  }

  Task task_;
  ConstraintModel model_;
  PolicyConfig config_;
  Belief belief_;
  Point state_;
  std::optional<Plan> plan_;
  std::size_t k_ = 0;
  double p_adopted_ = 0.0;
  std::string failure_;
};

}  // namespace

PolicyTree::PolicyTree(const Task& task, const ConstraintModel& model, const Belief& belief, PolicyConfig config)
    : task_(task), model_(model), config_(std::move(config)) {
  config_.validate();
  root_ = make_node(task.start, belief, 0);
}

std::unique_ptr<PolicyNode> PolicyTree::make_node(Point start, Belief belief, std::size_t depth) const {
  auto node = std::make_unique<PolicyNode>();
  node->start = std::move(start);
  node->belief = std::move(belief);
  node->depth = depth;
  if (node->belief.empty()) {
    node->empty_belief = true;
    return node;
  }
  const Task here = task_from(task_, node->start);
  const double spacing = config_.lattice.spacing();
  try {
    node->plan = plan_with(config_, node->belief, here, model_);
  } catch (const InfeasibleError& e) {
    node->failure = e.what();
    return node;
  }
  node->p_safe = prob_traj_safe(node->belief, here, model_, node->plan->traj, spacing);
  if (needs_positive_safety(config_.planner) && node->p_safe <= kMassEps) {
    node->plan.reset();
    node->failure = kNoSafePlan;
    return node;
  }
  const Plan& plan = *node->plan;
  // Follow the all-safe execution to find where the trigger would fire.
  const auto xs = executed_states(task_.dynamics, node->start, plan.traj.controls);
  Belief b = node->belief;
  for (std::size_t k = 0; k < plan.traj.controls.size() && !idle_from(plan, k); ++k) {
    const auto pts = transition_points(task_, model_, xs[k], plan.traj.controls[k], spacing);
    b = apply_all(std::move(b), bump_measurements(pts, kNoPoint), model_);
    if (idle_from(plan, k + 1)) break;
    if (should_switch(config_, b, task_, model_, plan, k + 1, xs[k + 1], node->p_safe)) {
      node->switch_step = k;
      break;
    }
  }
  return node;
}

const PolicyNode& PolicyTree::child(const PolicyNode& node, std::size_t step, std::size_t point) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = node.children.find({step, point});
    if (it != node.children.end()) return *it->second;
  }
  if (!node.plan) throw std::logic_error("terminal policy node has no children");
  const Plan& plan = *node.plan;
  const double spacing = config_.lattice.spacing();
  const auto xs = executed_states(task_.dynamics, node.start, plan.traj.controls);
  Belief b = node.belief;
  for (std::size_t k = 0; k < step; ++k) {
    b = apply_all(std::move(b), bump_measurements(transition_points(task_, model_, xs[k], plan.traj.controls[k], spacing), kNoPoint), model_);
  }
  const auto pts = transition_points(task_, model_, xs[step], plan.traj.controls[step], spacing);
  b = apply_all(std::move(b), bump_measurements(pts, point), model_);
  auto made = make_node(point == kNoPoint ? xs[step + 1] : xs[step], std::move(b), node.depth + 1);

  std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = const_cast<PolicyNode&>(node).children[{step, point}];
  if (!slot) slot = std::move(made);
  return *slot;
}

std::vector<std::pair<std::size_t, std::size_t>> PolicyTree::branch_keys(const PolicyNode& node) const {
  std::vector<std::pair<std::size_t, std::size_t>> keys;
  if (!node.plan) return keys;
  const Plan& plan = *node.plan;
  const double spacing = config_.lattice.spacing();
  const auto xs = executed_states(task_.dynamics, node.start, plan.traj.controls);
  const std::size_t last = node.switch_step == kNoPoint ? plan.traj.controls.size() : node.switch_step + 1;
  for (std::size_t k = 0; k < last && !idle_from(plan, k); ++k) {
    const auto pts = transition_points(task_, model_, xs[k], plan.traj.controls[k], spacing);
    for (std::size_t j = 0; j < pts.size(); ++j) {
      // Only points the node's belief can find unsafe.
      const BoxUnion hit = keep_violating(node.belief.support(), model_, pts[j].block, pts[j].kappa);
      if (prob_of(node.belief, hit) > kMassEps) keys.emplace_back(k, j);
    }
  }
  if (node.switch_step != kNoPoint) keys.emplace_back(node.switch_step, kNoPoint);
  return keys;
}

void PolicyTree::expand(std::size_t depth) const {
  std::vector<const PolicyNode*> frontier{root_.get()};
  while (!frontier.empty()) {
    const PolicyNode* n = frontier.back();
    frontier.pop_back();
    if (n->depth >= depth) continue;
    for (const auto& [k, j] : branch_keys(*n)) frontier.push_back(&child(*n, k, j));
  }
}

std::size_t PolicyTree::n_nodes() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::size_t count = 0;
  std::vector<const PolicyNode*> st{root_.get()};
  while (!st.empty()) {
    const PolicyNode* n = st.back();
    st.pop_back();
    ++count;
    for (const auto& [key, c] : n->children) st.push_back(c.get());
  }
  return count;
}

std::size_t PolicyTree::max_depth() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::size_t d = 0;
  std::vector<const PolicyNode*> st{root_.get()};
  while (!st.empty()) {
    const PolicyNode* n = st.back();
    st.pop_back();
    d = std::max(d, n->depth);
    for (const auto& [key, c] : n->children) st.push_back(c.get());
  }
  return d;
}

std::shared_ptr<PolicyTree> build_tree(const Belief& belief, const Task& task, const PolicyConfig& config,
                                       const ConstraintModel& model) {
  auto tree = std::make_shared<PolicyTree>(task, model, belief, config);
  const PolicyNode& root = tree->root();
  if (!root.plan) {
    if (root.empty_belief) throw EmptyBeliefError();
    throw InfeasibleError(root.failure);
  }
  tree->expand(config.tree_depth);
  return tree;
}

namespace {

class TreeRuntime final : public PolicyRuntime {
 public:
  explicit TreeRuntime(std::shared_ptr<const PolicyTree> tree) : tree_(std::move(tree)), node_(&tree_->root()) {
    state_ = node_->start;
    set_failure();
  }

  bool done() const override { return !failed() && idle_from(*node_->plan, k_); }
  bool failed() const override { return !node_->plan.has_value(); }
  const std::string& failure() const override { return failure_; }
  Point control() const override { return node_->plan->traj.controls[k_]; }
  const Plan& plan() const override { return *node_->plan; }
  const Point& state() const override { return state_; }
  double spacing() const override { return tree_->config().lattice.spacing(); }

  bool observe(const StepOutcome& outcome) override {
    if (outcome.violated) {
      enter(tree_->child(*node_, k_, outcome.first_unsafe));
      return true;
    }
    const Point u = control();
    state_ = tree_->task().dynamics.step(state_, u);
    if (k_ == node_->switch_step) {
      enter(tree_->child(*node_, k_, kNoPoint));
      return true;
    }
    ++k_;
    return false;
  }

 private:
  void enter(const PolicyNode& n) {
    node_ = &n;
    k_ = 0;
    state_ = n.start;
    set_failure();
  }
  void set_failure() {
    if (node_->plan) return;
    failure_ = node_->empty_belief ? "belief became empty" : node_->failure;
  }

  std::shared_ptr<const PolicyTree> tree_;
  const PolicyNode* node_;
  Point state_;
  std::size_t k_ = 0;
  std::string failure_;
};

}  // namespace

std::unique_ptr<PolicyRuntime> make_online_runtime(const Task& task, const ConstraintModel& model,
                                                   const Belief& belief, const PolicyConfig& config) {
  config.validate();
  return std::make_unique<OnlineRuntime>(task, model, belief, config);
}

std::unique_ptr<PolicyRuntime> make_tree_runtime(std::shared_ptr<const PolicyTree> tree) {
  return std::make_unique<TreeRuntime>(std::move(tree));
}

OverrideLaw theoretical_override_law(const std::vector<double>& p) {
  OverrideLaw law;
  double reach = 1.0;  // probability of getting to plan i
  for (double pi : p) {
    if (!(pi >= 0.0 && pi <= 1.0)) throw ValidationError("p", "probabilities must lie in [0, 1]");
    law.probs.push_back(reach * pi);
    reach *= 1.0 - pi;
  }
  law.beyond = reach;
  return law;
}

std::optional<std::vector<double>> override_chain(const PolicyTree& tree, std::size_t max_len) {
  std::vector<double> p;
  const PolicyNode* n = &tree.root();
  while (n && n->plan && p.size() < max_len) {
    if (n->switch_step != kNoPoint) return std::nullopt;
    p.push_back(n->p_safe);
    // The live override outcomes: children whose belief is non-empty.
    const PolicyNode* next = nullptr;
    for (const auto& [k, j] : tree.branch_keys(*n)) {
      const PolicyNode& c = tree.child(*n, k, j);
      if (c.empty_belief) continue;
      if (next) return std::nullopt;
      next = &c;
    }
    n = next;
  }
  return p;
}

}  // namespace kktplan
