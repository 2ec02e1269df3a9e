#include "kktplan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "kktplan/rng.hpp"

namespace kktplan {

Box::Box(Point lo, Point hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) {
    throw GeometryError("box bounds have different lengths");
  }
  for (std::size_t i = 0; i < lo_.size(); ++i) {
    if (!(lo_[i] <= hi_[i])) {
      throw GeometryError("box has lo > hi in dimension " + std::to_string(i));
    }
  }
}

Box Box::from_center(std::span<const double> center, std::span<const double> scale) {
  if (center.size() != scale.size()) throw GeometryError("center/scale length mismatch");
  Point lo(center.size()), hi(center.size());
  for (std::size_t i = 0; i < center.size(); ++i) {
    lo[i] = center[i] - scale[i];
    hi[i] = center[i] + scale[i];
  }
  return Box(std::move(lo), std::move(hi));
}

Box Box::point(std::span<const double> p) { return Box(Point(p.begin(), p.end()), Point(p.begin(), p.end())); }

Point Box::center() const {
  Point c(dim());
  for (std::size_t i = 0; i < dim(); ++i) c[i] = 0.5 * (lo_[i] + hi_[i]);
  return c;
}

Point Box::scale() const {
  Point s(dim());
  for (std::size_t i = 0; i < dim(); ++i) s[i] = 0.5 * (hi_[i] - lo_[i]);
  return s;
}

std::size_t Box::rank() const {
  std::size_t r = 0;
  for (std::size_t i = 0; i < dim(); ++i) r += degenerate(i) ? 0 : 1;
  return r;
}

bool Box::contains(std::span<const double> p, double tol) const {
  if (p.size() != dim()) throw GeometryError("point dimension mismatch");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (p[i] < lo_[i] - tol || p[i] > hi_[i] + tol) return false;
  }
  return true;
}

bool Box::contains_strict(std::span<const double> p, double tol) const {
  if (p.size() != dim()) throw GeometryError("point dimension mismatch");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(p[i] > lo_[i] + tol && p[i] < hi_[i] - tol)) return false;
  }
  return true;
}

bool Box::contains(const Box& other, double tol) const {
  if (other.dim() != dim()) throw GeometryError("box dimension mismatch");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (other.lo_[i] < lo_[i] - tol || other.hi_[i] > hi_[i] + tol) return false;
  }
  return true;
}

BoxUnion::BoxUnion(std::vector<Box> boxes) : boxes_(std::move(boxes)) {
  if (!boxes_.empty()) dim_ = boxes_.front().dim();
  for (const auto& b : boxes_) {
    if (b.dim() != dim_) throw GeometryError("box union has mixed dimensions");
  }
}

void BoxUnion::push_back(Box b) {
  if (boxes_.empty() && dim_ == 0) dim_ = b.dim();
  if (b.dim() != dim_) throw GeometryError("box union dimension mismatch");
  boxes_.push_back(std::move(b));
}

void BoxUnion::add_disjoint(const Box& b) {
  if (boxes_.empty() && dim_ == 0) dim_ = b.dim();
  std::vector<Box> pieces{b};
  for (const auto& existing : boxes_) {
    std::vector<Box> next;
    for (const auto& p : pieces) {
      auto rest = subtract(p, existing);
      next.insert(next.end(), rest.begin(), rest.end());
    }
    pieces = std::move(next);
    if (pieces.empty()) return;
  }
  for (auto& p : pieces) push_back(std::move(p));
}

bool BoxUnion::contains(std::span<const double> p, double tol) const {
  return std::any_of(boxes_.begin(), boxes_.end(), [&](const Box& b) { return b.contains(p, tol); });
}

Box BoxUnion::hull() const {
  if (boxes_.empty()) throw GeometryError("hull of empty union");
  Point lo = boxes_.front().lo(), hi = boxes_.front().hi();
  for (const auto& b : boxes_) {
    for (std::size_t i = 0; i < dim_; ++i) {
      lo[i] = std::min(lo[i], b.lo(i));
      hi[i] = std::max(hi[i], b.hi(i));
    }
  }
  return Box(std::move(lo), std::move(hi));
}

double box_volume(const Box& b) {
  double v = 1.0;
  for (std::size_t i = 0; i < b.dim(); ++i) v *= b.width(i);
  return v;
}

double union_volume(const BoxUnion& u) {
  double v = 0.0;
  for (const auto& b : u) v += box_volume(b);
  return v;
}

double relative_volume(const Box& b, std::size_t rank) {
  if (b.rank() != rank) return 0.0;
  double v = 1.0;
  for (std::size_t i = 0; i < b.dim(); ++i) {
    if (!b.degenerate(i)) v *= b.width(i);
  }
  return v;
}

double relative_volume(const BoxUnion& u, std::size_t rank) {
  double v = 0.0;
  for (const auto& b : u) v += relative_volume(b, rank);
  return v;
}

std::size_t top_rank(const BoxUnion& u) {
  std::size_t r = 0;
  for (const auto& b : u) r = std::max(r, b.rank());
  return r;
}

bool intersect(const Box& a, const Box& b, Box& out) {
  if (a.dim() != b.dim()) throw GeometryError("box dimension mismatch");
  Point lo(a.dim()), hi(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) {
    lo[i] = std::max(a.lo(i), b.lo(i));
    hi[i] = std::min(a.hi(i), b.hi(i));
    if (lo[i] > hi[i]) {
      if (lo[i] - hi[i] > kMembershipTol) return false;
      hi[i] = lo[i];
    }
  }
  out = Box(std::move(lo), std::move(hi));
  return true;
}

BoxUnion intersect(const BoxUnion& u, const Box& b) {
  BoxUnion out(b.dim());
  Box tmp;
  for (const auto& m : u) {
    if (intersect(m, b, tmp)) out.push_back(tmp);
  }
  return out;
}

BoxUnion intersect(const BoxUnion& u, const BoxUnion& v) {
  BoxUnion out(std::max(u.dim(), v.dim()));
  Box tmp;
  for (const auto& a : u) {
    for (const auto& b : v) {
      if (intersect(a, b, tmp)) out.push_back(tmp);
    }
  }
  return out;
}

namespace {

// Overlap in a's own affine span: degenerate dims use closed membership,
// the others need positive-width overlap.
bool overlaps_relative(const Box& a, const Box& b) {
  for (std::size_t i = 0; i < a.dim(); ++i) {
    if (a.degenerate(i)) {
      if (a.lo(i) < b.lo(i) - kMembershipTol || a.lo(i) > b.hi(i) + kMembershipTol) return false;
    } else {
      const double w = std::min(a.hi(i), b.hi(i)) - std::max(a.lo(i), b.lo(i));
      if (w <= kDegenerateWidth) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<Box> subtract(const Box& a, const Box& b) {
  if (a.dim() != b.dim()) throw GeometryError("subtract: dimension mismatch");
  if (!overlaps_relative(a, b)) return {a};
  std::vector<Box> out;
  Point lo = a.lo(), hi = a.hi();
  for (std::size_t i = 0; i < a.dim(); ++i) {
    if (a.degenerate(i)) continue;
    if (b.lo(i) > lo[i]) {
      Point plo = lo, phi = hi;
      phi[i] = b.lo(i);
      out.emplace_back(std::move(plo), std::move(phi));
      lo[i] = b.lo(i);
    }
    if (b.hi(i) < hi[i]) {
      Point plo = lo, phi = hi;
      plo[i] = b.hi(i);
      out.emplace_back(std::move(plo), std::move(phi));
      hi[i] = b.hi(i);
    }
  }
  return out;
}

BoxUnion subtract(const BoxUnion& u, const Box& b) {
  if (!u.empty() && u.dim() != b.dim()) throw GeometryError("subtract: dimension mismatch");
  BoxUnion out(b.dim());
  for (const auto& m : u) {
    for (auto& piece : subtract(m, b)) out.push_back(std::move(piece));
  }
  return out;
}

BoxUnion subtract(const BoxUnion& u, const BoxUnion& v) {
  BoxUnion out = u;
  for (const auto& b : v) out = subtract(out, b);
  return out;
}

BoxUnion make_disjoint(std::span<const Box> boxes) {
  BoxUnion out(boxes.empty() ? 0 : boxes.front().dim());
  for (const auto& b : boxes) out.add_disjoint(b);
  return out;
}

namespace {

std::vector<Point> sample_weighted(const BoxUnion& u, const std::vector<double>& weights, std::size_t n,
                                   std::uint64_t seed) {
  std::vector<double> cumulative(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
  const double total = cumulative.empty() ? 0.0 : cumulative.back();
  std::vector<Point> out;
  out.reserve(n);
  Rng rng(seed);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
    const std::size_t idx = std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1);
    const Box& b = u[idx];
    Point p(b.dim());
    for (std::size_t i = 0; i < b.dim(); ++i) p[i] = b.lo(i) + rng.uniform() * b.width(i);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::vector<Point> sample_uniform(const BoxUnion& u, std::size_t n, std::uint64_t seed) {
  if (n == 0) return {};
  std::vector<double> w;
  w.reserve(u.size());
  for (const auto& b : u) w.push_back(box_volume(b));
  if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) {
    throw GeometryError("sample_uniform: union has zero volume");
  }
  return sample_weighted(u, w, n, seed);
}

std::vector<Point> sample_uniform_relative(const BoxUnion& u, std::size_t rank, std::size_t n,
                                           std::uint64_t seed) {
  if (n == 0) return {};
  std::vector<double> w;
  w.reserve(u.size());
  for (const auto& b : u) w.push_back(relative_volume(b, rank));
  if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) {
    throw GeometryError("sample_uniform_relative: union has zero measure");
  }
  return sample_weighted(u, w, n, seed);
}

std::string to_string(const Box& b) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < b.dim(); ++i) {
    os << (i ? " x " : "") << "[" << b.lo(i) << ", " << b.hi(i) << "]";
  }
  os << "]";
  return os.str();
}

}  // namespace kktplan
