#pragma once

#include <cmath>
#include <numbers>

namespace medevac {

/// Planar position or displacement in nautical miles (x east, y north).
/// Also used for velocities in knots (nm per hour).
struct GeoPoint {
  double x = 0.0;
  double y = 0.0;

  friend constexpr GeoPoint operator+(GeoPoint a, GeoPoint b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr GeoPoint operator-(GeoPoint a, GeoPoint b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr GeoPoint operator*(GeoPoint a, double s) { return {a.x * s, a.y * s}; }
  friend constexpr GeoPoint operator*(double s, GeoPoint a) { return {a.x * s, a.y * s}; }
  friend constexpr bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline constexpr double kScenarioBoundNm = 1000.0;
inline constexpr double kNmPerDegreeLatitude = 60.0;

constexpr double dot(GeoPoint a, GeoPoint b) { return a.x * b.x + a.y * b.y; }
inline double norm(GeoPoint a) { return std::hypot(a.x, a.y); }
inline double distance(GeoPoint a, GeoPoint b) { return norm(b - a); }

inline bool within_scenario_bounds(GeoPoint p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::abs(p.x) <= kScenarioBoundNm &&
         std::abs(p.y) <= kScenarioBoundNm;
}

/// Equirectangular projection about (origin_lat, origin_lon); accurate to well
/// under a percent at inter-island scale.
inline GeoPoint project_equirectangular(double lat, double lon, double origin_lat, double origin_lon) {
  const double cos_lat = std::cos(origin_lat * std::numbers::pi / 180.0);
  return {(lon - origin_lon) * kNmPerDegreeLatitude * cos_lat, (lat - origin_lat) * kNmPerDegreeLatitude};
}

}  // namespace medevac
