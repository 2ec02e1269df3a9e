#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "kktplan/io.hpp"

using namespace kktplan;

namespace {

std::string shipped(const std::string& name) { return std::string(KKTPLAN_SCENARIO_DIR) + "/" + name; }

}  // namespace

// The shipped files are the test fixtures, serialized.
TEST(ScenarioFiles, MatchFixtures) {
  const std::vector<std::pair<std::string, Scenario>> cases{
      {"toy_t1.json", fixtures::toy_t1()},
      {"scalar_bound.json", fixtures::scalar_bound()},
      {"gate_wall.json", fixtures::gate_wall()},
      {"gate_mixed.json", fixtures::gate_wall_mixed()},
      {"maze_shortcut.json", fixtures::maze_shortcut()},
  };
  for (const auto& [file, sc] : cases) {
    SCOPED_TRACE(file);
    const Scenario loaded = load_scenario(shipped(file));
    EXPECT_EQ(scenario_to_json(loaded), scenario_to_json(sc));
  }
}
