#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kktplan/geometry.hpp"
#include "kktplan/kkt.hpp"
#include "kktplan/scenario.hpp"

namespace kktplan {

enum class Engine { Enumerate, Carve, Grid };

std::string to_string(Engine e);
Engine parse_engine(const std::string& s);

class ExtractionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExtractionOptions {
  double tol = kDefaultKktTol;
  Engine engine = Engine::Enumerate;
  /// Keep zero-measure pieces (pinned parameters); they carry no probability
  /// mass but shape the guaranteed-unsafe set.
  bool keep_degenerate = true;
  std::size_t iteration_cap = 10000;
  std::size_t node_cap = 200000;  ///< activation-pattern search nodes per demo
  double grid_h = 0.05;           ///< resolution for the grid engine
  std::size_t grid_cell_cap = 2000000;
};

struct ExtractionResult {
  BoxUnion f_theta;
  std::size_t iterations = 0;
  Engine engine = Engine::Enumerate;
  double wall_time = 0.0;
};

struct GuaranteedSets {
  BoxUnion g_safe;
  BoxUnion g_unsafe;
  BoxUnion possibly_unsafe;
};

/// Extraction over a fixed set of demonstrations. Holds the KKT oracle and a
/// memoized exact consistent set per parameter region.
class Extractor {
 public:
  Extractor(const Task& task, const ConstraintModel& model, const std::vector<Trajectory>& demos,
            ExtractionOptions opts = {});

  const KktContext& kkt() const { return ctx_; }
  const ExtractionOptions& options() const { return opts_; }

  /// Exact consistent set inside `region` from activation-pattern enumeration.
  BoxUnion enumerate(const Box& region, std::size_t* nodes = nullptr) const;

  /// Largest robustly consistent box inside `remaining`, grown from the exact
  /// pieces. Ranking: higher rank first, then relative volume, then lexicographic lo.
  std::optional<Box> max_box(const BoxUnion& remaining) const;

  ExtractionResult extract(const Box& region) const;
  ExtractionResult extract() const { return extract(ctx_.model().theta_prior()); }

  /// Union of grid cells (resolution h) whose centers pass certify_local_opt.
  BoxUnion grid_oracle(double h, const Box& region) const;

 private:
  BoxUnion enumerate_demo(std::size_t j, const Box& region, std::size_t* nodes) const;
  BoxUnion carve_primal(const Box& region, std::size_t j) const;
  ExtractionResult carve(const Box& region) const;

  KktContext ctx_;
  ExtractionOptions opts_;
};

ExtractionResult extract(const std::vector<Trajectory>& demos, const Task& task, const ConstraintModel& model,
                         const ExtractionOptions& opts = {});

/// Splits the prior along its longest dimensions into `partitions` boxes and
/// extracts each on its own thread.
ExtractionResult extract_partitioned(const std::vector<Trajectory>& demos, const Task& task,
                                     const ConstraintModel& model, std::size_t partitions,
                                     const ExtractionOptions& opts = {});

std::vector<Box> split_longest(const Box& region, std::size_t parts);

std::optional<Box> max_box(const BoxUnion& remaining, const std::vector<Trajectory>& demos, const Task& task,
                           const ConstraintModel& model, double tol = kDefaultKktTol);

BoxUnion grid_oracle(const std::vector<Trajectory>& demos, const Task& task, const ConstraintModel& model,
                     double tol, double h);

/// Guaranteed safe / unsafe and possibly-unsafe sets of one constraint block
/// for the parameter set `f_theta`. Throws on an empty set.
GuaranteedSets guaranteed_sets(const BoxUnion& f_theta, const ConstraintModel& model, std::size_t block = 0);
inline GuaranteedSets guaranteed_sets(const ExtractionResult& r, const ConstraintModel& model, std::size_t block = 0) {
  return guaranteed_sets(r.f_theta, model, block);
}

/// Number of cells of the irregular grid spanned by the piece boundaries of u.
double irregular_grid_cells(const BoxUnion& u);

/// Drops pieces of lower rank that lie inside another piece.
BoxUnion prune_dominated(const BoxUnion& u);

}  // namespace kktplan
