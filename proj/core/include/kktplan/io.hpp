#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "kktplan/geometry.hpp"
#include "kktplan/planning.hpp"
#include "kktplan/sampled_planners.hpp"
#include "kktplan/scenario.hpp"

namespace kktplan {

inline constexpr int kScenarioVersion = 1;

/// Parses and validates a scenario document. Throws ParseError or ValidationError.
Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const Scenario& sc);

Scenario load_scenario(const std::string& path);
void save_scenario(const std::string& path, const Scenario& sc);

nlohmann::json box_to_json(const Box& b);
Box box_from_json(const nlohmann::json& j, const std::string& field);

/// {"dim": d, "boxes": [{"lo": [...], "hi": [...]}, ...]}
nlohmann::json boxes_to_json(const BoxUnion& u);
BoxUnion boxes_from_json(const nlohmann::json& j, const std::string& field = "boxes");

/// One row per box: lo_0..lo_{d-1}, hi_0..hi_{d-1}, volume.
std::string boxes_to_csv(const BoxUnion& u);

nlohmann::json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j, const std::string& field);
/// Columns t, x..., u...; the final row leaves the controls empty.
std::string trajectory_to_csv(const Trajectory& traj);

/// {"vertices": [[...]], "edges": [[i, j, cost]], "start": i, "goal": j}
nlohmann::json roadmap_to_json(const Roadmap& rm);
Roadmap roadmap_from_json(const nlohmann::json& j);

/// Trajectory plus chosen boxes, coverage, cost and any scenario samples.
nlohmann::json plan_to_json(const Plan& plan);
Plan plan_from_json(const nlohmann::json& j);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace kktplan
