#include "kktplan/sim.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <thread>

namespace kktplan {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool truly_unsafe(const ConstraintModel& model, std::size_t block, std::span<const double> theta, const Point& kappa) {
  return model.block_g(block, theta, kappa) > kStrictTol;
}

Point clip(const Box& bounds, Point p) {
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], bounds.lo(i), bounds.hi(i));
  return p;
}

}  // namespace

std::string to_string(SensorKind k) {
  switch (k) {
    case SensorKind::Bump: return "bump";
    case SensorKind::Lidar: return "lidar";
    case SensorKind::AmbiguousContact: return "contact";
  }
  return "?";
}

SensorKind parse_sensor_kind(const std::string& s) {
  for (auto k : {SensorKind::Bump, SensorKind::Lidar, SensorKind::AmbiguousContact}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("sensor", "unknown sensor kind '" + s + "'");
}

void SensorSpec::validate() const {
  if (kind == SensorKind::Lidar && !(range > 0.0)) throw ValidationError("range", "must be positive");
  if (grid < 1 || candidates < 1) throw ValidationError("sensor", "counts must be at least 1");
  if (!(contact_radius >= 0.0)) throw ValidationError("contact_radius", "must be non-negative");
}

Measurement sense_point(const ConstraintModel& model, std::size_t block, std::span<const double> theta_true,
                        const Point& kappa) {
  Measurement m;
  m.block = block;
  m.points = {kappa};
  m.kind = truly_unsafe(model, block, theta_true, kappa) ? MeasurementKind::ExactUnsafe : MeasurementKind::ExactSafe;
  return m;
}

std::vector<Measurement> sense_lidar(const SensorSpec& spec, const ConstraintModel& model, std::size_t block,
                                     std::span<const double> theta_true, const Point& position) {
  const ConstraintBlock& blk = model.block(block);
  if (blk.phi != PhiKind::StateProjection) throw ValidationError("sensor", "lidar needs a position block");
  const std::size_t d = position.size();
  const double h = spec.range / static_cast<double>(spec.grid);
  Measurement safe{MeasurementKind::ExactSafe, {}, block};
  Measurement unsafe{MeasurementKind::ExactUnsafe, {}, block};
  std::vector<long> lo(d), hi(d), idx(d);
  for (std::size_t i = 0; i < d; ++i) {
    lo[i] = static_cast<long>(std::ceil(std::max(position[i] - spec.range, blk.kappa_bounds.lo(i)) / h - 1e-9));
    hi[i] = static_cast<long>(std::floor(std::min(position[i] + spec.range, blk.kappa_bounds.hi(i)) / h + 1e-9));
    if (lo[i] > hi[i]) return {};
    idx[i] = lo[i];
  }
  while (true) {
    Point p(d);
    double r2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      p[i] = static_cast<double>(idx[i]) * h;
      r2 += (p[i] - position[i]) * (p[i] - position[i]);
    }
    if (r2 <= spec.range * spec.range * (1 + 1e-12)) {
      (truly_unsafe(model, block, theta_true, p) ? unsafe : safe).points.push_back(std::move(p));
    }
    std::size_t i = 0;
    while (i < d && idx[i] == hi[i]) idx[i] = lo[i], ++i;
    if (i == d) break;
    ++idx[i];
  }
  std::vector<Measurement> out;
  if (!safe.points.empty()) out.push_back(std::move(safe));
  if (!unsafe.points.empty()) out.push_back(std::move(unsafe));
  return out;
}

Measurement sense_contact(const SensorSpec& spec, const ConstraintModel& model, std::size_t block,
                          const Point& violating, Rng& rng) {
  const Box& bounds = model.block(block).kappa_bounds;
  const std::size_t d = violating.size();
  Measurement m{MeasurementKind::AmbiguousUnsafe, {violating}, block};
  const double r = spec.contact_radius;
  while (m.points.size() < spec.candidates) {
    Point q(d);
    double r2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double o = rng.uniform(-r, r);
      q[i] = violating[i] + o;
      r2 += o * o;
    }
    if (r2 > r * r) continue;
    m.points.push_back(clip(bounds, std::move(q)));
  }
  return m;
}

ExecutionTrace run_episode(const Task& task, const ConstraintModel& model, std::span<const double> theta_true,
                           PolicyRuntime& policy, const EpisodeOptions& opts, std::uint64_t seed) {
  opts.sensor.validate();
  if (theta_true.size() != model.theta_dim()) throw ValidationError("theta", "dimension mismatch");
  if (!model.theta_prior().contains(Box::point(theta_true))) throw ValidationError("theta", "outside the prior");
  const Dynamics& dyn = task.dynamics;
  const std::size_t max_steps = opts.max_steps ? opts.max_steps : 10 * task.horizon;
  const double spacing = policy.spacing();
  Rng rng(seed);

  ExecutionTrace tr;
  Point x = policy.state();
  while (!policy.done() && !policy.failed() && tr.steps.size() < max_steps) {
    const Point u = policy.control();
    const auto pts = transition_points(task, model, x, u, spacing);
    StepOutcome out;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (truly_unsafe(model, pts[j].block, theta_true, pts[j].kappa)) {
        out.first_unsafe = j;
        break;
      }
    }
    out.violated = out.first_unsafe != kNoPoint;
    out.measurements = bump_measurements(pts, out.first_unsafe);
    TraceStep row{x, u, out.violated, false};
    if (out.violated) {
      const TaggedPoint& hit = pts[out.first_unsafe];
      ++tr.violations;
      tr.violation_points.push_back(hit.kappa);
      if (opts.sensor.kind == SensorKind::AmbiguousContact) {
        // The robot knows it was stopped on this edge, not which point did it.
        Measurement blocked{MeasurementKind::AmbiguousUnsafe, {}, hit.block};
        for (std::size_t j = out.first_unsafe; j < pts.size(); ++j) {
          if (pts[j].block == hit.block) blocked.points.push_back(pts[j].kappa);
        }
        out.measurements.back() = std::move(blocked);
        out.measurements.push_back(sense_contact(opts.sensor, model, hit.block, hit.kappa, rng));
      }
    } else {
      const Point y = dyn.step(x, u);
      tr.cost += task.step_cost(x, u, y);
      x = y;
      if (opts.sensor.kind == SensorKind::Lidar) {
        for (std::size_t b = 0; b < model.blocks().size(); ++b) {
          if (model.block(b).phi != PhiKind::StateProjection) continue;
          for (auto& m : sense_lidar(opts.sensor, model, b, theta_true, dyn.position(x))) {
            out.measurements.push_back(std::move(m));
          }
        }
      }
    }
    if (opts.keep_measurements) {
      tr.measurements.insert(tr.measurements.end(), out.measurements.begin(), out.measurements.end());
    }
    row.switched = policy.observe(out);
    if (row.switched) ++tr.switches;
    tr.steps.push_back(std::move(row));
  }
  tr.final_state = x;
  tr.reached_goal = policy.done();
  if (policy.failed()) {
    tr.failure = policy.failure();
  } else if (!tr.reached_goal) {
    tr.failure = "step limit reached";
  }
  return tr;
}

ExecutionTrace run_episode(const Task& task, const ConstraintModel& model, const Belief& belief,
                           std::span<const double> theta_true, const PolicyConfig& config,
                           const EpisodeOptions& opts, std::uint64_t seed, std::shared_ptr<const PolicyTree> tree) {
  if (tree) {
    if (opts.sensor.kind != SensorKind::Bump) throw ValidationError("sensor", "contingency trees need bump sensing");
    auto rt = make_tree_runtime(std::move(tree));
    return run_episode(task, model, theta_true, *rt, opts, seed);
  }
  auto rt = make_online_runtime(task, model, belief, config);
  return run_episode(task, model, theta_true, *rt, opts, seed);
}

void write_trace_csv(std::ostream& os, const ExecutionTrace& trace) {
  const std::size_t n = trace.final_state.size();
  const std::size_t m = trace.steps.empty() ? 0 : trace.steps.front().control.size();
  os << "step";
  for (std::size_t i = 0; i < n; ++i) os << ",x" << i;
  for (std::size_t i = 0; i < m; ++i) os << ",u" << i;
  os << ",event,violation_flag\n";
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const TraceStep& s = trace.steps[k];
    os << k;
    for (double v : s.state) os << ',' << num(v);
    for (double v : s.control) os << ',' << num(v);
    os << ',' << (s.violation ? "override" : s.switched ? "switch" : "move") << ',' << (s.violation ? 1 : 0) << '\n';
  }
  os << trace.steps.size();
  for (double v : trace.final_state) os << ',' << num(v);
  for (std::size_t i = 0; i < m; ++i) os << ',';
  os << ',' << (trace.reached_goal ? "goal" : "halt") << ",0\n";
}

Point trial_theta(const Belief& belief, std::uint64_t seed, std::size_t trial) {
  return sample_belief(belief, 1, Rng::derive_seed(seed, trial)).front();
}

std::vector<PolicyMetrics> benchmark(const Task& task, const ConstraintModel& model, const Belief& belief,
                                     const std::vector<NamedPolicy>& policies, const BenchmarkOptions& opts) {
  if (opts.n_trials < 1) throw ValidationError("trials", "must be at least 1");
  if (belief.empty()) throw EmptyBeliefError();
  std::vector<Point> thetas;
  thetas.reserve(opts.n_trials);
  for (std::size_t i = 0; i < opts.n_trials; ++i) thetas.push_back(trial_theta(belief, opts.seed, i));

  EpisodeOptions ep = opts.episode;
  ep.keep_measurements = false;
  const bool tree_mode = opts.use_tree && ep.sensor.kind == SensorKind::Bump;
  std::size_t n_threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min(n_threads, opts.n_trials);

  std::vector<PolicyMetrics> out;
  for (const auto& pol : policies) {
    PolicyMetrics pm;
    pm.name = pol.name;
    pm.violations.assign(opts.n_trials, 0);
    pm.costs.assign(opts.n_trials, 0.0);
    std::vector<char> ok(opts.n_trials, 0);
    std::shared_ptr<const PolicyTree> tree;
    if (tree_mode) tree = std::make_shared<PolicyTree>(task, model, belief, pol.config);

    auto work = [&](std::size_t t0) {
      for (std::size_t i = t0; i < opts.n_trials; i += n_threads) {
        const std::uint64_t s = Rng::derive_seed(opts.seed, i);
        const auto tr = run_episode(task, model, belief, thetas[i], pol.config, ep, s, tree);
        pm.violations[i] = tr.violations;
        pm.costs[i] = tr.cost;
        ok[i] = tr.reached_goal ? 1 : 0;
      }
    };
    if (n_threads == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }

    const double n = static_cast<double>(opts.n_trials);
    double sv = 0.0, sc = 0.0, ns = 0.0;
    for (std::size_t i = 0; i < opts.n_trials; ++i) {
      sv += static_cast<double>(pm.violations[i]);
      sc += pm.costs[i];
      ns += ok[i];
    }
    pm.mean_violations = sv / n;
    pm.mean_cost = sc / n;
    pm.success_rate = ns / n;
    double var = 0.0;
    for (auto v : pm.violations) var += (static_cast<double>(v) - pm.mean_violations) * (static_cast<double>(v) - pm.mean_violations);
    pm.std_violations = opts.n_trials > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    out.push_back(std::move(pm));
  }
  return out;
}

std::vector<double> violation_histogram(const std::vector<std::size_t>& counts) {
  std::vector<double> h;
  for (auto c : counts) {
    if (c >= h.size()) h.resize(c + 1, 0.0);
    h[c] += 1.0;
  }
  for (auto& v : h) v /= static_cast<double>(counts.size());
  return h;
}

void write_metrics_csv(std::ostream& os, const std::vector<PolicyMetrics>& metrics) {
  os << "policy,mean_viol,std_viol,mean_cost,success_rate\n";
  for (const auto& m : metrics) {
    os << m.name << ',' << num(m.mean_violations) << ',' << num(m.std_violations) << ',' << num(m.mean_cost) << ','
       << num(m.success_rate) << '\n';
  }
}

void write_histogram_csv(std::ostream& os, const std::vector<double>& empirical, const OverrideLaw* law) {
  os << "count,empirical_freq,theoretical_freq\n";
  const std::size_t n = std::max(empirical.size(), law ? law->probs.size() : 0);
  for (std::size_t i = 0; i < n; ++i) {
    os << i << ',' << num(i < empirical.size() ? empirical[i] : 0.0) << ',';
    if (law) os << num(i < law->probs.size() ? law->probs[i] : 0.0);
    os << '\n';
  }
  if (law) os << ">=" << law->probs.size() << ",," << num(law->beyond) << '\n';
}

double total_variation(const std::vector<double>& empirical, const OverrideLaw& law) {
  // Counts past the law's support are lumped into its remainder bucket.
  const std::size_t k = law.probs.size();
  double tv = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < std::max(k, empirical.size()); ++i) {
    const double e = i < empirical.size() ? empirical[i] : 0.0;
    if (i < k) {
      tv += std::abs(e - law.probs[i]);
    } else {
      tail += e;
    }
  }
  tv += std::abs(tail - law.beyond);
  return 0.5 * tv;
}

}  // namespace kktplan
