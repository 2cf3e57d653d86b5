#pragma once

#include <algorithm>
#include <cmath>
#include <string_view>
#include <vector>

#include "medevac/errors.hpp"
#include "medevac/rng.hpp"
#include "medevac/scenario.hpp"

namespace medevac {

enum class Platoon { FSMP, ASMP };

inline std::string_view to_string(Platoon p) { return p == Platoon::FSMP ? "FSMP" : "ASMP"; }
inline Platoon platoon_for(Island i) { return i == Island::Forward ? Platoon::FSMP : Platoon::ASMP; }
inline Island island_of(Platoon p) { return p == Platoon::FSMP ? Island::Forward : Island::Rear; }

/// Interval during which an aircraft is employed (flying, on station, refueling).
struct Commitment {
  double start = 0.0;
  double end = 0.0;

  friend bool operator==(const Commitment&, const Commitment&) = default;
};

struct MaintenanceConfig {
  double fault_rate = 0.002;       ///< per flight hour
  double replacement_delay = 2.0;  ///< hours added to busy_until on a fault
};

struct AircraftState {
  Platoon platoon = Platoon::FSMP;
  std::vector<Commitment> schedule;  ///< sorted by start, non-overlapping
  double busy_until = 0.0;           ///< end of the last commitment
  double cumulative_flight_hours = 0.0;
  double fault_probability = 0.0;
  bool replaced = false;
  int replacements = 0;

  bool operator==(const AircraftState&) const = default;

  /// Fraction of [clock - window, clock] spent employed.
  double utilization(double clock, double window) const {
    if (window <= 0.0) return 0.0;
    const double lo = clock - window;
    double busy = 0.0;
    for (const auto& c : schedule) busy += std::max(0.0, std::min(c.end, clock) - std::max(c.start, lo));
    return std::clamp(busy / window, 0.0, 1.0);
  }

  /// Earliest start >= ready at which a mission of duration `duration(start)`
  /// fits between existing commitments.
  template <class DurationFn>
  double earliest_slot(double ready, DurationFn&& duration) const {
    double s = schedule.empty() ? std::max(ready, busy_until) : ready;
    for (const auto& c : schedule) {
      if (c.end <= s) continue;
      if (s + duration(s) <= c.start + 1e-9) return s;
      s = std::max(s, c.end);
    }
    return s;
  }

  void commit(double start, double end) {
    if (end < start) throw ContractViolation("commit: end before start");
    const Commitment c{start, end};
    auto it = std::upper_bound(schedule.begin(), schedule.end(), c,
                               [](const Commitment& a, const Commitment& b) { return a.start < b.start; });
    schedule.insert(it, c);
    busy_until = std::max(busy_until, end);
  }

  /// Extends the commitment that ends last by `hours`.
  void extend_last(double hours) {
    if (schedule.empty()) return;
    auto it = std::max_element(schedule.begin(), schedule.end(),
                               [](const Commitment& a, const Commitment& b) { return a.end < b.end; });
    it->end += hours;
    busy_until = std::max(busy_until, it->end);
  }

  /// Drops commitments that no longer affect scheduling or the utilization window.
  void prune(double clock, double window) {
    const double horizon = clock - window;
    std::erase_if(schedule, [&](const Commitment& c) { return c.end < horizon; });
  }
};

/// Accrues `employment` flight hours and samples a maintenance fault for this
/// sortie under an exponential hazard. A fault replaces the airframe (hours
/// reset) and delays its availability by the replacement delay.
inline AircraftState maintenance_update(AircraftState aircraft, double employment, CounterRng& rng,
                                        const MaintenanceConfig& cfg = {}) {
  if (employment < 0.0) throw ContractViolation("maintenance_update: employment must be >= 0");
  aircraft.cumulative_flight_hours += employment;
  const double p_sortie = 1.0 - std::exp(-cfg.fault_rate * employment);
  if (rng.uniform() < p_sortie) {
    aircraft.replaced = true;
    ++aircraft.replacements;
    aircraft.cumulative_flight_hours = 0.0;
    if (aircraft.schedule.empty())
      aircraft.busy_until += cfg.replacement_delay;
    else
      aircraft.extend_last(cfg.replacement_delay);
  }
  aircraft.fault_probability = 1.0 - std::exp(-cfg.fault_rate * aircraft.cumulative_flight_hours);
  return aircraft;
}

/// Default fleet: `per_platoon` aircraft for each platoon, idle.
inline std::vector<AircraftState> make_fleet(int per_platoon = 1) {
  std::vector<AircraftState> fleet;
  for (Platoon p : {Platoon::FSMP, Platoon::ASMP})
    for (int i = 0; i < per_platoon; ++i) {
      AircraftState a;
      a.platoon = p;
      fleet.push_back(std::move(a));
    }
  return fleet;
}

}  // namespace medevac
