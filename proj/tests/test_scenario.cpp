#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "medevac/scenario.hpp"
#include "test_util.hpp"

using namespace medevac;
using namespace medevac::testing;

namespace {

nlohmann::json minimal_doc() {
  return nlohmann::json::parse(R"({
    "name": "mini",
    "origin_lat_lon": [0, 0],
    "facilities": [
      {"id": "a", "role": "Role2", "island": "Forward", "location": {"x": 0, "y": 0}},
      {"id": "b", "role": "Role2", "island": "Rear", "location": {"x": 50, "y": 0}},
      {"id": "c", "role": "Role3", "island": "Rear", "location": {"x": 60, "y": 0}}
    ],
    "watercraft": [
      {"id": "w", "speed": 10, "waypoints": [{"x": 0, "y": 10, "t": 0}, {"x": 10, "y": 10, "t": 1}]}
    ],
    "land_axps": ["b"],
    "aircraft": {"cruise_speed": 150, "cabin_capacity": 6},
    "bases": {"forward": "a", "rear": "b"}
  })");
}

}  // namespace

TEST(Scenario, DefaultScenarioHasThreeWatercraftAtStatedSpeeds) {
  const Scenario s = load_scenario_file(data_path("scenarios/default_hawaii.json"));
  ASSERT_EQ(s.watercraft.size(), 3u);
  EXPECT_DOUBLE_EQ(s.watercraft[0].speed, 10.0);
  EXPECT_DOUBLE_EQ(s.watercraft[1].speed, 8.0);
  EXPECT_DOUBLE_EQ(s.watercraft[2].speed, 43.0);
  EXPECT_EQ(s.facilities[s.role3].role, FacilityRole::Role3);
}

TEST(Scenario, DuplicateFacilityIdIsRejected) {
  auto doc = minimal_doc();
  doc["facilities"][1]["id"] = "a";
  try {
    scenario_from_json(doc);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.invariant(), "facility-id-unique");
  }
}

TEST(Scenario, RouteSpeedMismatchIsRejected) {
  auto doc = minimal_doc();
  // 10 nm in 1 h is 10 kn; a stated 15 kn is off by 50%.
  doc["watercraft"][0]["speed"] = 15;
  try {
    scenario_from_json(doc);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.invariant(), "route-segment-speed");
  }
}

TEST(Scenario, MissingFieldReportsPath) {
  auto doc = minimal_doc();
  doc["aircraft"].erase("cruise_speed");
  try {
    scenario_from_json(doc);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.path(), "/aircraft/cruise_speed");
  }
}

TEST(Scenario, RoundTripIsIdentity) {
  const Scenario s = load_scenario_file(data_path("scenarios/default_hawaii.json"));
  EXPECT_EQ(load_scenario(serialize(s)), s);
  const Scenario mini = scenario_from_json(minimal_doc());
  EXPECT_EQ(load_scenario(serialize(mini)), mini);
}

TEST(WatercraftPosition, EndpointsAndMidpoint) {
  const WatercraftRoute r{"w", 10.0, {{{0, 0}, 0.0}, {{10, 0}, 1.0}}};
  auto at0 = watercraft_position(r, 0.0);
  EXPECT_DOUBLE_EQ(at0.position.x, 0.0);
  auto mid = watercraft_position(r, 0.5);
  EXPECT_NEAR(mid.position.x, 5.0, 1e-12);
  EXPECT_NEAR(norm(mid.velocity), 10.0, 1e-12);
  auto after = watercraft_position(r, 3.0);
  EXPECT_DOUBLE_EQ(after.position.x, 10.0);
  EXPECT_DOUBLE_EQ(norm(after.velocity), 0.0);
}

TEST(WatercraftPosition, SegmentDistanceMatchesSpeed) {
  const Scenario s = load_scenario_file(data_path("scenarios/default_hawaii.json"));
  std::mt19937_64 gen(11);
  for (const auto& r : s.watercraft) {
    for (std::size_t k = 1; k < r.waypoints.size(); ++k) {
      const double t0 = r.waypoints[k - 1].time, t1 = r.waypoints[k].time;
      std::uniform_real_distribution<double> u(t0, t1);
      double a = u(gen), b = u(gen);
      if (a > b) std::swap(a, b);
      const double d = distance(watercraft_position(r, a).position, watercraft_position(r, b).position);
      EXPECT_NEAR(d, r.speed * (b - a), 1e-9 * std::max(1.0, r.speed * (b - a)));
    }
  }
}
