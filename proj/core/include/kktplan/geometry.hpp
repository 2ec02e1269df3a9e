#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kktplan {

using Point = std::vector<double>;

/// Tolerance used for closed membership tests.
inline constexpr double kMembershipTol = 1e-12;
/// Widths at or below this are treated as degenerate (pinned) dimensions.
inline constexpr double kDegenerateWidth = 1e-12;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Closed axis-aligned box [lo, hi] in R^d. Zero-width dimensions are allowed.
class Box {
 public:
  Box() = default;
  Box(Point lo, Point hi);

  static Box from_center(std::span<const double> center, std::span<const double> scale);
  static Box point(std::span<const double> p);

  std::size_t dim() const { return lo_.size(); }
  const Point& lo() const { return lo_; }
  const Point& hi() const { return hi_; }
  double lo(std::size_t i) const { return lo_[i]; }
  double hi(std::size_t i) const { return hi_[i]; }
  double width(std::size_t i) const { return hi_[i] - lo_[i]; }

  Point center() const;
  Point scale() const;

  /// Number of dimensions with positive width.
  std::size_t rank() const;
  bool degenerate(std::size_t i) const { return width(i) <= kDegenerateWidth; }

  bool contains(std::span<const double> p, double tol = kMembershipTol) const;
  /// True when p lies strictly inside in every dimension.
  bool contains_strict(std::span<const double> p, double tol = 0.0) const;
  bool contains(const Box& other, double tol = kMembershipTol) const;

  bool operator==(const Box& other) const = default;

 private:
  Point lo_;
  Point hi_;
};

/// Interior-disjoint list of boxes with a common dimension.
class BoxUnion {
 public:
  BoxUnion() = default;
  explicit BoxUnion(std::size_t dim) : dim_(dim) {}
  explicit BoxUnion(std::vector<Box> boxes);
  BoxUnion(std::initializer_list<Box> boxes) : BoxUnion(std::vector<Box>(boxes)) {}

  std::size_t dim() const { return dim_; }
  bool empty() const { return boxes_.empty(); }
  std::size_t size() const { return boxes_.size(); }
  const std::vector<Box>& boxes() const { return boxes_; }
  const Box& operator[](std::size_t i) const { return boxes_[i]; }
  auto begin() const { return boxes_.begin(); }
  auto end() const { return boxes_.end(); }

  /// Appends a box the caller guarantees is interior-disjoint from the members.
  void push_back(Box b);
  /// Appends a box, first removing whatever part is already covered.
  void add_disjoint(const Box& b);

  bool contains(std::span<const double> p, double tol = kMembershipTol) const;
  /// Smallest box enclosing every member. Throws on an empty union.
  Box hull() const;

 private:
  std::size_t dim_ = 0;
  std::vector<Box> boxes_;
};

double box_volume(const Box& b);
double union_volume(const BoxUnion& u);

/// Product of the positive widths of b when b.rank() == rank, otherwise 0.
/// This is the rank-dimensional Hausdorff measure of an axis-aligned box.
double relative_volume(const Box& b, std::size_t rank);
double relative_volume(const BoxUnion& u, std::size_t rank);
std::size_t top_rank(const BoxUnion& u);

/// Closed intersection; empty optional semantics via bool return.
bool intersect(const Box& a, const Box& b, Box& out);
BoxUnion intersect(const BoxUnion& u, const Box& b);
BoxUnion intersect(const BoxUnion& u, const BoxUnion& v);

/// Closure of a \ b, relative to the affine span of a. Dimensions along which a
/// is degenerate are tested with closed comparison; all other dimensions are
/// split into at most two slabs each, swept in order 0..d-1.
std::vector<Box> subtract(const Box& a, const Box& b);
BoxUnion subtract(const BoxUnion& u, const Box& b);
BoxUnion subtract(const BoxUnion& u, const BoxUnion& v);

/// Disjoint decomposition of an arbitrary (possibly overlapping) list of boxes.
BoxUnion make_disjoint(std::span<const Box> boxes);

/// Uniform samples over the union, weighted by box volume. Throws GeometryError
/// when the union has zero volume.
std::vector<Point> sample_uniform(const BoxUnion& u, std::size_t n, std::uint64_t seed);

/// Uniform samples with respect to the rank-dimensional measure; pinned
/// coordinates are reproduced exactly.
std::vector<Point> sample_uniform_relative(const BoxUnion& u, std::size_t rank, std::size_t n,
                                           std::uint64_t seed);

std::string to_string(const Box& b);

}  // namespace kktplan
