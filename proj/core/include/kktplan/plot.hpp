#pragma once

#include <string>
#include <vector>

#include "kktplan/extraction.hpp"
#include "kktplan/scenario.hpp"

namespace kktplan {

struct PlotInput {
  const Scenario* scenario = nullptr;  ///< required
  /// Parameter set for the guaranteed / possibly-unsafe shading; may be empty.
  BoxUnion f_theta;
  std::vector<Trajectory> plans;
  std::vector<Trajectory> contingencies;
  /// Executed states, and the positions where a step was overridden.
  std::vector<Point> trace;
  std::vector<Point> violations;
  std::string title;
};

/// SVG of a 2-D workspace; other dimensions get one position-vs-step panel
/// per coordinate. Plans and contingencies are the only <path> elements.
/// Output depends only on the input.
std::string render_svg(const PlotInput& in);

}  // namespace kktplan
