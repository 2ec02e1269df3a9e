#include "kktplan/belief.hpp"

namespace kktplan {

std::string to_string(MeasurementKind k) {
  switch (k) {
    case MeasurementKind::ExactSafe: return "exact-safe";
    case MeasurementKind::ExactUnsafe: return "exact-unsafe";
    case MeasurementKind::AmbiguousUnsafe: return "ambiguous-unsafe";
    case MeasurementKind::AmbiguousSafe: return "ambiguous-safe";
  }
  return "?";
}

MeasurementKind parse_measurement_kind(const std::string& s) {
  for (auto k : {MeasurementKind::ExactSafe, MeasurementKind::ExactUnsafe, MeasurementKind::AmbiguousUnsafe,
                 MeasurementKind::AmbiguousSafe}) {
    if (to_string(k) == s) return k;
  }
  throw ParseError("kind", "unknown measurement kind '" + s + "'");
}

Belief::Belief(BoxUnion support, std::size_t reference_rank)
    : support_(std::move(support)), rank_(reference_rank), total_(relative_volume(support_, reference_rank)) {}

double Belief::density(std::span<const double> theta) const {
  if (empty() || !support_.contains(theta)) return 0.0;
  return 1.0 / total_;
}

Belief belief_from_support(const BoxUnion& support) { return Belief(support, top_rank(support)); }

Belief belief_from_extraction(const ExtractionResult& result) { return belief_from_support(result.f_theta); }

double prob_of(const Belief& belief, const Box& theta_box) {
  if (belief.empty()) throw EmptyBeliefError();
  const double p = relative_volume(intersect(belief.support(), theta_box), belief.reference_rank()) /
                   belief.total_volume();
  return std::clamp(p, 0.0, 1.0);
}

double prob_of(const Belief& belief, const BoxUnion& theta_set) {
  if (belief.empty()) throw EmptyBeliefError();
  const double p = relative_volume(intersect(belief.support(), theta_set), belief.reference_rank()) /
                   belief.total_volume();
  return std::clamp(p, 0.0, 1.0);
}

BoxUnion safe_thetas(const BoxUnion& support, const ConstraintModel& model, std::size_t b,
                     const std::vector<Point>& kappas) {
  BoxUnion u = support;
  for (const auto& k : kappas) {
    if (u.empty()) break;
    u = remove_violating(u, model, b, k);
  }
  return u;
}

std::vector<Point> trajectory_points(const Task& task, const ConstraintModel& model, std::size_t b,
                                     const Trajectory& traj, double spacing) {
  const auto& blk = model.block(b);
  std::vector<Point> out;
  if (blk.is_scalar_bound()) {
    for (const auto& u : traj.controls) out.push_back(kappa_of_control(u));
    return out;
  }
  if (traj.states.empty()) return out;
  out.push_back(kappa_of_state(task.dynamics, blk.phi, traj.states.front()));
  for (std::size_t t = 0; t + 1 < traj.states.size(); ++t) {
    for (auto& p : step_points(task.dynamics, blk, traj.states[t], traj.controls[t], traj.states[t + 1], spacing)) {
      out.push_back(std::move(p));
    }
  }
  return out;
}

double prob_traj_safe(const Belief& belief, const Task& task, const ConstraintModel& model, const Trajectory& traj,
                      double spacing) {
  if (belief.empty()) throw EmptyBeliefError();
  BoxUnion u = belief.support();
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    u = safe_thetas(u, model, b, trajectory_points(task, model, b, traj, spacing));
  }
  return std::clamp(relative_volume(u, belief.reference_rank()) / belief.total_volume(), 0.0, 1.0);
}

namespace {

// Parameters of u under which every point is unsafe.
BoxUnion all_unsafe(const BoxUnion& u, const Measurement& m, const ConstraintModel& model) {
  BoxUnion cur = u;
  for (const auto& p : m.points) {
    if (cur.empty()) break;
    cur = keep_violating(cur, model, m.block, p);
  }
  return cur;
}

}  // namespace

Belief update(const Belief& belief, const Measurement& m, const ConstraintModel& model) {
  if (m.points.empty()) throw ValidationError("points", "measurement needs at least one point");
  const BoxUnion& s = belief.support();
  BoxUnion next(s.dim());
  switch (m.kind) {
    case MeasurementKind::ExactSafe:
      next = safe_thetas(s, model, m.block, m.points);
      break;
    case MeasurementKind::ExactUnsafe:
      next = all_unsafe(s, m, model);
      break;
    case MeasurementKind::AmbiguousUnsafe: {
      // One case per point, unioned. Support pieces are disjoint, so each is
      // handled alone; a point that condemns the whole piece ends the search.
      for (const auto& piece : s) {
        const BoxUnion one{piece};
        std::vector<Box> parts;
        bool whole = false;
        for (const auto& p : m.points) {
          for (const auto& b : keep_violating(one, model, m.block, p)) {
            if (b.contains(piece, 0.0)) {
              whole = true;
              break;
            }
            parts.push_back(b);
          }
          if (whole) break;
        }
        if (whole) {
          next.push_back(piece);
          continue;
        }
        // Drop parts inside another part; duplicates keep their first copy.
        std::vector<Box> kept;
        for (std::size_t i = 0; i < parts.size(); ++i) {
          bool inside = false;
          for (std::size_t j = 0; j < parts.size() && !inside; ++j) {
            if (i == j || !parts[j].contains(parts[i], 0.0)) continue;
            inside = !parts[i].contains(parts[j], 0.0) || j < i;
          }
          if (!inside) kept.push_back(parts[i]);
        }
        for (const auto& b : make_disjoint(kept)) next.push_back(b);
      }
      break;
    }
    case MeasurementKind::AmbiguousSafe: {
      // Complement of "every point unsafe" within the support.
      const BoxUnion bad = all_unsafe(s, m, model);
      next = s;
      for (const auto& b : bad) {
        if (next.empty()) break;
        next = subtract(next, b);
      }
      break;
    }
  }
  return Belief(next, belief.reference_rank());
}

bool satisfies(const Measurement& m, const ConstraintModel& model, std::span<const double> theta) {
  std::size_t unsafe = 0;
  for (const auto& p : m.points) {
    if (model.block_g(m.block, theta, p) > kStrictTol) ++unsafe;
  }
  switch (m.kind) {
    case MeasurementKind::ExactSafe: return unsafe == 0;
    case MeasurementKind::ExactUnsafe: return unsafe == m.points.size();
    case MeasurementKind::AmbiguousUnsafe: return unsafe > 0;
    case MeasurementKind::AmbiguousSafe: return unsafe < m.points.size();
  }
  return false;
}

std::vector<Point> sample_belief(const Belief& belief, std::size_t n, std::uint64_t seed) {
  if (belief.empty()) throw EmptyBeliefError();
  return sample_uniform_relative(belief.support(), belief.reference_rank(), n, seed);
}

}  // namespace kktplan
