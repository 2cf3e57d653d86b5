#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "medevac/errors.hpp"
#include "medevac/geo.hpp"

namespace medevac {

enum class FacilityRole { Role1, Role2, Role3 };
enum class Island { Forward, Rear };

inline std::string_view to_string(FacilityRole r) {
  switch (r) {
    case FacilityRole::Role1: return "Role1";
    case FacilityRole::Role2: return "Role2";
    case FacilityRole::Role3: return "Role3";
  }
  return "?";
}
inline std::string_view to_string(Island i) { return i == Island::Forward ? "Forward" : "Rear"; }

struct Facility {
  std::string id;
  FacilityRole role = FacilityRole::Role1;
  Island island = Island::Forward;
  GeoPoint location;

  friend bool operator==(const Facility&, const Facility&) = default;
};

struct Waypoint {
  GeoPoint position;
  double time = 0.0;  ///< hours from scenario start

  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

/// Published track of an underway watercraft. Constant speed between waypoints.
struct WatercraftRoute {
  std::string id;
  double speed = 0.0;  ///< knots
  std::vector<Waypoint> waypoints;

  friend bool operator==(const WatercraftRoute&, const WatercraftRoute&) = default;
};

struct AircraftSpec {
  double cruise_speed = 150.0;     ///< knots
  int cabin_capacity = 6;          ///< patients
  double handoff_duration = 0.17;  ///< hours; patient lowered or hoisted at an exchange point
  double refuel_duration = 0.25;   ///< hours
  double pickup_duration = 0.10;   ///< hours on the ground at the pickup site
  double max_leg_range = 400.0;    ///< nm; any single transit leg longer than this is infeasible

  friend bool operator==(const AircraftSpec&, const AircraftSpec&) = default;
};

/// Position and velocity of a watercraft at one instant.
struct WatercraftFix {
  GeoPoint position;
  GeoPoint velocity;
};

/// Piecewise-linear position along the route. Before the first waypoint and
/// after the last one the craft holds station with zero velocity.
inline WatercraftFix watercraft_position(const WatercraftRoute& route, double t) {
  const auto& wps = route.waypoints;
  if (wps.empty()) return {};
  if (t <= wps.front().time) return {wps.front().position, {}};
  if (t >= wps.back().time) return {wps.back().position, {}};
  const auto it = std::upper_bound(wps.begin(), wps.end(), t,
                                   [](double value, const Waypoint& w) { return value < w.time; });
  const Waypoint& b = *it;
  const Waypoint& a = *(it - 1);
  const GeoPoint delta = b.position - a.position;
  const double len = norm(delta);
  const GeoPoint dir = len > 0.0 ? delta * (1.0 / len) : GeoPoint{};
  const double frac = (t - a.time) / (b.time - a.time);
  return {a.position + delta * frac, dir * route.speed};
}

class Scenario {
 public:
  std::string name;
  double origin_lat = 0.0;
  double origin_lon = 0.0;
  std::vector<Facility> facilities;
  std::vector<WatercraftRoute> watercraft;
  std::vector<std::size_t> land_axps;  ///< indices into facilities
  std::size_t forward_base = 0;
  std::size_t rear_base = 0;
  std::size_t role3 = 0;
  AircraftSpec aircraft;

  const Facility& facility(std::size_t index) const { return facilities.at(index); }

  std::optional<std::size_t> find_facility(std::string_view id) const {
    for (std::size_t i = 0; i < facilities.size(); ++i)
      if (facilities[i].id == id) return i;
    return std::nullopt;
  }

  std::size_t facility_index(std::string_view id) const {
    if (auto i = find_facility(id)) return *i;
    throw ValidationError("facility-reference", "unknown facility id '" + std::string(id) + "'");
  }

  std::optional<std::size_t> find_watercraft(std::string_view id) const {
    for (std::size_t i = 0; i < watercraft.size(); ++i)
      if (watercraft[i].id == id) return i;
    return std::nullopt;
  }

  GeoPoint base_location(Island island) const {
    return facilities[island == Island::Forward ? forward_base : rear_base].location;
  }

  /// Throws ValidationError naming the first broken invariant.
  void validate() const;

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

namespace detail {

inline void require(bool ok, const char* invariant, const std::string& what) {
  if (!ok) throw ValidationError(invariant, what);
}

}  // namespace detail

inline void Scenario::validate() const {
  using detail::require;
  std::set<std::string> ids;
  std::size_t role3_count = 0;
  for (const auto& f : facilities) {
    require(!f.id.empty(), "facility-id", "facility id must be non-empty");
    require(ids.insert(f.id).second, "facility-id-unique", "duplicate facility id '" + f.id + "'");
    require(within_scenario_bounds(f.location), "geopoint-bounds",
            "facility '" + f.id + "' lies outside the +/-1000 nm scenario bound");
    if (f.role == FacilityRole::Role3) ++role3_count;
  }
  require(role3_count == 1, "single-role3", "scenario must contain exactly one Role3 facility");
  require(forward_base < facilities.size() && rear_base < facilities.size() && role3 < facilities.size(),
          "facility-reference", "base or role3 index out of range");
  require(facilities[role3].role == FacilityRole::Role3, "single-role3", "role3 reference is not a Role3");
  require(facilities[forward_base].island == Island::Forward, "forward-base-island",
          "forward base '" + facilities[forward_base].id + "' is not on the Forward island");
  require(facilities[rear_base].island == Island::Rear, "rear-base-island",
          "rear base '" + facilities[rear_base].id + "' is not on the Rear island");
  for (auto idx : land_axps)
    require(idx < facilities.size(), "facility-reference", "land AXP index out of range");

  std::set<std::string> craft_ids;
  for (const auto& r : watercraft) {
    require(!r.id.empty(), "watercraft-id", "watercraft id must be non-empty");
    require(craft_ids.insert(r.id).second, "watercraft-id-unique", "duplicate watercraft id '" + r.id + "'");
    require(std::isfinite(r.speed) && r.speed > 0.0, "watercraft-speed", "route '" + r.id + "' speed must be positive");
    require(!r.waypoints.empty(), "route-waypoints", "route '" + r.id + "' has no waypoints");
    for (std::size_t i = 0; i < r.waypoints.size(); ++i) {
      const auto& w = r.waypoints[i];
      require(within_scenario_bounds(w.position) && std::isfinite(w.time), "geopoint-bounds",
              "route '" + r.id + "' waypoint " + std::to_string(i) + " out of bounds");
      if (i == 0) continue;
      const auto& prev = r.waypoints[i - 1];
      require(w.time > prev.time, "route-times-increasing",
              "route '" + r.id + "' waypoint " + std::to_string(i) + " time does not increase");
      const double seg_speed = distance(prev.position, w.position) / (w.time - prev.time);
      require(std::abs(seg_speed - r.speed) <= 1e-6 * r.speed, "route-segment-speed",
              "route '" + r.id + "' segment " + std::to_string(i - 1) + " implies " + std::to_string(seg_speed) +
                  " kn but route speed is " + std::to_string(r.speed) + " kn");
    }
  }

  const auto& a = aircraft;
  require(std::isfinite(a.cruise_speed) && a.cruise_speed > 0.0, "aircraft-speed", "cruise_speed must be positive");
  require(a.cabin_capacity >= 1, "aircraft-capacity", "cabin_capacity must be at least 1");
  require(a.handoff_duration >= 0.0 && a.refuel_duration >= 0.0 && a.pickup_duration >= 0.0,
          "aircraft-durations", "service durations must be non-negative");
  require(a.max_leg_range > 0.0, "aircraft-range", "max_leg_range must be positive");
  for (const auto& r : watercraft)
    require(r.speed < a.cruise_speed, "watercraft-slower-than-aircraft",
            "route '" + r.id + "' is not slower than the aircraft cruise speed");
}

// ---------------------------------------------------------------------------
// JSON schema

namespace detail {

using nlohmann::json;

inline const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(path + "/" + key, "missing required field");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  return j.get<double>();
}

inline double number_field(const json& j, const char* key, const std::string& path) {
  return number(field(j, key, path), path + "/" + key);
}

inline double number_or(const json& j, const char* key, double fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  return number(j.at(key), path + "/" + key);
}

inline std::string string_field(const json& j, const char* key, const std::string& path) {
  const auto& v = field(j, key, path);
  if (!v.is_string()) throw ParseError(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

inline const json& array_field(const json& j, const char* key, const std::string& path) {
  const auto& v = field(j, key, path);
  if (!v.is_array()) throw ParseError(path + "/" + key, "expected an array");
  return v;
}

inline FacilityRole parse_role(const std::string& s, const std::string& path) {
  if (s == "Role1") return FacilityRole::Role1;
  if (s == "Role2") return FacilityRole::Role2;
  if (s == "Role3") return FacilityRole::Role3;
  throw ParseError(path, "unknown role '" + s + "' (expected Role1, Role2 or Role3)");
}

inline Island parse_island(const std::string& s, const std::string& path) {
  if (s == "Forward") return Island::Forward;
  if (s == "Rear") return Island::Rear;
  throw ParseError(path, "unknown island '" + s + "' (expected Forward or Rear)");
}

/// Accepts either {"x","y"} in nm or {"lat","lon"} in degrees.
inline GeoPoint parse_point(const json& j, const Scenario& s, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  if (j.contains("x") || j.contains("y"))
    return {number_field(j, "x", path), number_field(j, "y", path)};
  if (j.contains("lat") || j.contains("lon"))
    return project_equirectangular(number_field(j, "lat", path), number_field(j, "lon", path), s.origin_lat,
                                   s.origin_lon);
  throw ParseError(path, "expected {x, y} or {lat, lon}");
}

inline std::size_t resolve(const Scenario& s, const std::string& id, const std::string& path) {
  if (auto i = s.find_facility(id)) return *i;
  throw ParseError(path, "unknown facility id '" + id + "'");
}

}  // namespace detail

/// Parses and validates a scenario document.
inline Scenario scenario_from_json(const nlohmann::json& doc) {
  using namespace detail;
  Scenario s;
  if (!doc.is_object()) throw ParseError("", "scenario document must be a JSON object");
  s.name = doc.value("name", std::string{});

  const auto& origin = field(doc, "origin_lat_lon", "");
  if (!origin.is_array() || origin.size() != 2) throw ParseError("/origin_lat_lon", "expected [lat, lon]");
  s.origin_lat = number(origin[0], "/origin_lat_lon/0");
  s.origin_lon = number(origin[1], "/origin_lat_lon/1");

  const auto& facs = array_field(doc, "facilities", "");
  for (std::size_t i = 0; i < facs.size(); ++i) {
    const std::string p = "/facilities/" + std::to_string(i);
    Facility f;
    f.id = string_field(facs[i], "id", p);
    f.role = parse_role(string_field(facs[i], "role", p), p + "/role");
    f.island = parse_island(string_field(facs[i], "island", p), p + "/island");
    f.location = parse_point(field(facs[i], "location", p), s, p + "/location");
    s.facilities.push_back(std::move(f));
  }
  // Duplicate ids are an invariant violation, reported before references are resolved.
  {
    std::set<std::string> seen;
    for (const auto& f : s.facilities)
      if (!seen.insert(f.id).second)
        throw ValidationError("facility-id-unique", "duplicate facility id '" + f.id + "'");
  }

  const auto& craft = array_field(doc, "watercraft", "");
  for (std::size_t i = 0; i < craft.size(); ++i) {
    const std::string p = "/watercraft/" + std::to_string(i);
    WatercraftRoute r;
    r.id = string_field(craft[i], "id", p);
    r.speed = number_field(craft[i], "speed", p);
    const auto& wps = array_field(craft[i], "waypoints", p);
    for (std::size_t k = 0; k < wps.size(); ++k) {
      const std::string wp = p + "/waypoints/" + std::to_string(k);
      r.waypoints.push_back({parse_point(wps[k], s, wp), number_field(wps[k], "t", wp)});
    }
    s.watercraft.push_back(std::move(r));
  }

  const auto& axps = array_field(doc, "land_axps", "");
  for (std::size_t i = 0; i < axps.size(); ++i) {
    const std::string p = "/land_axps/" + std::to_string(i);
    if (!axps[i].is_string()) throw ParseError(p, "expected a facility id");
    s.land_axps.push_back(resolve(s, axps[i].get<std::string>(), p));
  }

  const auto& ac = field(doc, "aircraft", "");
  AircraftSpec spec;
  spec.cruise_speed = number_field(ac, "cruise_speed", "/aircraft");
  const auto& cap = field(ac, "cabin_capacity", "/aircraft");
  if (!cap.is_number_integer()) throw ParseError("/aircraft/cabin_capacity", "expected an integer");
  spec.cabin_capacity = cap.get<int>();
  spec.handoff_duration = number_or(ac, "handoff_duration", spec.handoff_duration, "/aircraft");
  spec.refuel_duration = number_or(ac, "refuel_duration", spec.refuel_duration, "/aircraft");
  spec.pickup_duration = number_or(ac, "pickup_duration", spec.pickup_duration, "/aircraft");
  spec.max_leg_range = number_or(ac, "max_leg_range", spec.max_leg_range, "/aircraft");
  s.aircraft = spec;

  const auto& bases = field(doc, "bases", "");
  s.forward_base = resolve(s, string_field(bases, "forward", "/bases"), "/bases/forward");
  s.rear_base = resolve(s, string_field(bases, "rear", "/bases"), "/bases/rear");
  if (bases.contains("role3")) {
    s.role3 = resolve(s, string_field(bases, "role3", "/bases"), "/bases/role3");
  } else {
    auto it = std::find_if(s.facilities.begin(), s.facilities.end(),
                           [](const Facility& f) { return f.role == FacilityRole::Role3; });
    if (it == s.facilities.end()) throw ValidationError("single-role3", "scenario has no Role3 facility");
    s.role3 = static_cast<std::size_t>(it - s.facilities.begin());
  }

  s.validate();
  return s;
}

inline Scenario load_scenario(std::string_view document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("", std::string("invalid JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open scenario file");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario(ss.str());
}

/// Canonical form: planar coordinates only, every aircraft field explicit.
inline nlohmann::json to_json(const Scenario& s) {
  using nlohmann::json;
  json doc;
  doc["name"] = s.name;
  doc["origin_lat_lon"] = {s.origin_lat, s.origin_lon};
  doc["facilities"] = json::array();
  for (const auto& f : s.facilities)
    doc["facilities"].push_back({{"id", f.id},
                                 {"role", to_string(f.role)},
                                 {"island", to_string(f.island)},
                                 {"location", {{"x", f.location.x}, {"y", f.location.y}}}});
  doc["watercraft"] = json::array();
  for (const auto& r : s.watercraft) {
    json wps = json::array();
    for (const auto& w : r.waypoints) wps.push_back({{"x", w.position.x}, {"y", w.position.y}, {"t", w.time}});
    doc["watercraft"].push_back({{"id", r.id}, {"speed", r.speed}, {"waypoints", wps}});
  }
  doc["land_axps"] = json::array();
  for (auto i : s.land_axps) doc["land_axps"].push_back(s.facilities[i].id);
  const auto& a = s.aircraft;
  doc["aircraft"] = {{"cruise_speed", a.cruise_speed},         {"cabin_capacity", a.cabin_capacity},
                     {"handoff_duration", a.handoff_duration}, {"refuel_duration", a.refuel_duration},
                     {"pickup_duration", a.pickup_duration},   {"max_leg_range", a.max_leg_range}};
  doc["bases"] = {{"forward", s.facilities[s.forward_base].id},
                  {"rear", s.facilities[s.rear_base].id},
                  {"role3", s.facilities[s.role3].id}};
  return doc;
}

inline std::string serialize(const Scenario& s) { return to_json(s).dump(2); }

}  // namespace medevac
