#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>

#include "medevac/actions.hpp"
#include "medevac/aircraft.hpp"
#include "medevac/errors.hpp"
#include "medevac/geo.hpp"
#include "medevac/request.hpp"
#include "medevac/scenario.hpp"

namespace medevac {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr std::size_t kNoAircraft = std::numeric_limits<std::size_t>::max();

namespace detail {

/// Earliest u in [lo, hi] (lo >= 0) at which a chaser of speed `s` leaving the
/// origin at u = 0 can stand on a target at relative position q + v*u.
inline std::optional<double> earliest_reach(GeoPoint q, GeoPoint v, double s, double lo, double hi) {
  lo = std::max(lo, 0.0);
  if (lo > hi) return std::nullopt;
  const double gap_at_lo = norm(q + v * lo) - s * lo;
  if (gap_at_lo <= 1e-12 * (1.0 + norm(q))) return lo;

  // |q + v u|^2 - s^2 u^2 = a u^2 + b u + c; reachable where it is <= 0.
  const double a = dot(v, v) - s * s;
  const double b = 2.0 * dot(q, v);
  const double c = dot(q, q);
  double root;
  if (std::abs(a) <= 1e-12 * std::max(dot(v, v), s * s)) {
    if (b >= 0.0) return std::nullopt;
    root = -c / b;
  } else {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return std::nullopt;
    const double sq = std::sqrt(disc);
    const double qq = -0.5 * (b + std::copysign(sq, b));
    double r1 = qq / a;
    double r2 = qq != 0.0 ? c / qq : r1;
    if (r1 > r2) std::swap(r1, r2);
    // Outside the reachable set at lo: a > 0 means lo precedes [r1, r2];
    // a < 0 means lo sits between the roots and reach begins at r2.
    root = a > 0.0 ? r1 : r2;
  }
  if (root < lo || root > hi) return std::nullopt;
  return root;
}

}  // namespace detail

/// Smallest t >= 0 at which a chaser at `chaser_pos` flying `chaser_speed`
/// meets a target at `target_pos` moving with constant `target_vel`.
/// Returns nullopt when no such t exists.
inline std::optional<double> intercept_time(GeoPoint chaser_pos, double chaser_speed, GeoPoint target_pos,
                                            GeoPoint target_vel) {
  if (!(chaser_speed > 0.0)) throw ContractViolation("intercept_time: chaser speed must be positive");
  return detail::earliest_reach(target_pos - chaser_pos, target_vel, chaser_speed, 0.0, kInfinity);
}

struct RouteIntercept {
  double time = 0.0;  ///< absolute hours
  GeoPoint position;
};

/// Earliest meeting with a watercraft following its published route, for a
/// chaser leaving `chaser_pos` at absolute time `depart`.
inline std::optional<RouteIntercept> intercept_route(const WatercraftRoute& route, GeoPoint chaser_pos,
                                                     double chaser_speed, double depart) {
  const auto& wps = route.waypoints;
  if (wps.empty()) return std::nullopt;
  auto solve_piece = [&](GeoPoint p0, double t0, GeoPoint vel, double w0, double w1) -> std::optional<RouteIntercept> {
    const GeoPoint q = p0 - chaser_pos + vel * (depart - t0);
    auto u = detail::earliest_reach(q, vel, chaser_speed, w0 - depart, w1 - depart);
    if (!u) return std::nullopt;
    return RouteIntercept{depart + *u, p0 + vel * (depart + *u - t0)};
  };

  if (depart < wps.front().time)
    if (auto hit = solve_piece(wps.front().position, depart, {}, depart, wps.front().time)) return hit;

  auto it = std::upper_bound(wps.begin(), wps.end(), depart,
                             [](double value, const Waypoint& w) { return value < w.time; });
  std::size_t k = it == wps.begin() ? 0 : static_cast<std::size_t>(it - wps.begin()) - 1;
  for (; k + 1 < wps.size(); ++k) {
    const auto& a = wps[k];
    const auto& b = wps[k + 1];
    const GeoPoint vel = (b.position - a.position) * (1.0 / (b.time - a.time));
    if (auto hit = solve_piece(a.position, a.time, vel, std::max(a.time, depart), b.time)) return hit;
  }
  return solve_piece(wps.back().position, wps.back().time, {}, std::max(wps.back().time, depart), kInfinity);
}

/// Watercraft position at time t, consistent with intercept_route.
inline GeoPoint route_position(const WatercraftRoute& route, double t) { return watercraft_position(route, t).position; }

/// Leg decomposition of one mission. Forward legs F1..F3 belong to the aircraft
/// that picks the patient up; rear legs A1..A5 to the aircraft that completes
/// delivery after an exchange (all zero for direct missions).
struct MissionTimeline {
  ExchangeAction action;
  std::array<double, 3> legs_forward{};
  std::array<double, 5> legs_rear{};
  double injury_time = 0.0;
  double forward_dispatch = 0.0;
  double pickup_time = 0.0;  ///< patient aboard the forward aircraft
  std::optional<double> rear_dispatch;
  double handoff_time = 0.0;  ///< patient leaves the forward aircraft (delivery time for direct)
  double rear_arrival = 0.0;  ///< rear aircraft on station at the exchange point
  double delivery_time = 0.0;
  GeoPoint exchange_position;
  std::size_t forward_aircraft = kNoAircraft;
  std::size_t rear_aircraft = kNoAircraft;

  double predicted_handoff_gap() const { return rear_dispatch ? std::max(0.0, rear_arrival - handoff_time) : 0.0; }
};

/// Incident response time T by exchange category.
inline double response_time(const MissionTimeline& m) {
  const auto& f = m.legs_forward;
  const auto& a = m.legs_rear;
  switch (m.action.kind) {
    case ExchangeAction::Kind::Watercraft: return f[0] + f[1] + a[1] + a[2];
    case ExchangeAction::Kind::LandAxp: return f[0] + f[1] + a[0] + a[1];
    case ExchangeAction::Kind::Direct: return f[0];
  }
  return 0.0;
}

struct EmploymentTimes {
  double forward = 0.0;  ///< T_h1
  double rear = 0.0;     ///< T_h2
};

inline EmploymentTimes employment_times(const MissionTimeline& m) {
  const auto& f = m.legs_forward;
  const auto& a = m.legs_rear;
  EmploymentTimes e{f[0] + f[1] + f[2], 0.0};
  switch (m.action.kind) {
    case ExchangeAction::Kind::Watercraft: e.rear = a[0] + a[1] + a[2] + a[3] + a[4]; break;
    case ExchangeAction::Kind::LandAxp: e.rear = a[0] + a[1] + a[2]; break;
    case ExchangeAction::Kind::Direct: break;
  }
  return e;
}

namespace detail {

struct ForwardPlan {
  std::array<double, 3> legs{};
  double pickup = 0.0;
  double handoff = 0.0;  ///< drop-off complete (delivery for direct)
  GeoPoint exchange;
  double employment() const { return legs[0] + legs[1] + legs[2]; }
};

struct RearPlan {
  std::array<double, 5> legs{};
  double arrival = 0.0;
  double delivery = 0.0;
  double employment = 0.0;
};

class LegPlanner {
 public:
  LegPlanner(const Scenario& s, const EvacRequest& r, ExchangeAction action)
      : s_(s), r_(r), action_(action), v_(s.aircraft.cruise_speed), range_(s.aircraft.max_leg_range) {
    const Island island = pickup_island(s, r);
    pickup_base_ = s.base_location(island);
    rear_base_ = s.base_location(Island::Rear);
    pickup_ = s.facilities[r.origin].location;
    destination_ = s.facilities[r.destination].location;
  }

  /// Legs for the pickup aircraft dispatched at fd; nullopt if a leg is out of range.
  std::optional<ForwardPlan> forward(double fd) const {
    const auto& ac = s_.aircraft;
    ForwardPlan p;
    double d0 = distance(pickup_base_, pickup_);
    if (d0 > range_) return std::nullopt;
    p.legs[0] = d0 / v_ + ac.pickup_duration;
    const double at_pickup_done = fd + p.legs[0];
    p.pickup = at_pickup_done;
    switch (action_.kind) {
      case ExchangeAction::Kind::Direct: {
        const double d1 = distance(pickup_, destination_);
        const double d2 = distance(destination_, pickup_base_);
        if (d1 > range_ || d2 > range_) return std::nullopt;
        p.legs[0] += d1 / v_;
        p.legs[2] = d2 / v_ + ac.refuel_duration;
        p.handoff = fd + p.legs[0];
        p.exchange = destination_;
        return p;
      }
      case ExchangeAction::Kind::LandAxp: {
        const GeoPoint axp = s_.facilities[s_.land_axps[action_.index]].location;
        const double d1 = distance(pickup_, axp);
        const double d2 = distance(axp, pickup_base_);
        if (d1 > range_ || d2 > range_) return std::nullopt;
        p.legs[1] = d1 / v_ + ac.handoff_duration;
        p.legs[2] = d2 / v_ + ac.refuel_duration;
        p.handoff = at_pickup_done + p.legs[1];
        p.exchange = axp;
        return p;
      }
      case ExchangeAction::Kind::Watercraft: {
        const auto& route = s_.watercraft[action_.index];
        auto hit = intercept_route(route, pickup_, v_, at_pickup_done);
        if (!hit || distance(pickup_, hit->position) > range_) return std::nullopt;
        p.legs[1] = (hit->time - at_pickup_done) + ac.handoff_duration;
        p.handoff = hit->time + ac.handoff_duration;
        p.exchange = route_position(route, p.handoff);
        const double d2 = distance(p.exchange, pickup_base_);
        if (d2 > range_) return std::nullopt;
        p.legs[2] = d2 / v_ + ac.refuel_duration;
        return p;
      }
    }
    return std::nullopt;
  }

  /// Dispatch time that puts the rear aircraft on station exactly at `handoff`.
  double desired_rear_dispatch(const ForwardPlan& f) const {
    if (action_.is_land()) return f.handoff;  // departs on handoff notification
    const GeoPoint meet = route_position(s_.watercraft[action_.index], f.handoff);
    return f.handoff - distance(rear_base_, meet) / v_;
  }

  /// Legs for the rear aircraft dispatched at rd, given the forward drop-off.
  std::optional<RearPlan> rear(double rd, const ForwardPlan& f) const {
    const auto& ac = s_.aircraft;
    const GeoPoint role3 = s_.facilities[s_.role3].location;
    RearPlan p;
    if (action_.is_land()) {
      const double d0 = distance(rear_base_, f.exchange);
      const double d1 = distance(f.exchange, role3);
      const double d2 = distance(role3, rear_base_);
      if (d0 > range_ || d1 > range_ || d2 > range_) return std::nullopt;
      p.legs[0] = d0 / v_;
      p.legs[1] = ac.handoff_duration + d1 / v_;
      p.legs[2] = d2 / v_ + ac.refuel_duration;
      p.arrival = rd + p.legs[0];
      p.delivery = p.arrival + p.legs[1];
      p.employment = p.legs[0] + p.legs[1] + p.legs[2];
      return p;
    }
    const auto& route = s_.watercraft[action_.index];
    auto hit = intercept_route(route, rear_base_, v_, rd);
    if (!hit || distance(rear_base_, hit->position) > range_) return std::nullopt;
    const double hoist_start = std::max(hit->time, f.handoff);
    const double hoist_end = hoist_start + ac.handoff_duration;
    const GeoPoint depart_pos = route_position(route, hoist_end);
    const double d2 = distance(depart_pos, role3);
    const double d3 = distance(role3, rear_base_);
    if (d2 > range_ || d3 > range_) return std::nullopt;
    p.legs[0] = hit->time - rd;
    p.legs[1] = (hoist_start - hit->time) + ac.handoff_duration;
    p.legs[2] = d2 / v_;
    p.legs[3] = d3 / v_;
    p.legs[4] = ac.refuel_duration;
    p.arrival = hit->time;
    p.delivery = hoist_end + p.legs[2];
    p.employment = p.legs[0] + p.legs[1] + p.legs[2] + p.legs[3] + p.legs[4];
    return p;
  }

 private:
  const Scenario& s_;
  const EvacRequest& r_;
  ExchangeAction action_;
  double v_;
  double range_;
  GeoPoint pickup_base_;
  GeoPoint rear_base_;
  GeoPoint pickup_;
  GeoPoint destination_;
};

}  // namespace detail

/// Builds the mission timeline for `action` decided at `now`, scheduling each
/// aircraft into the earliest gap of its commitments. The pickup aircraft
/// leaves as soon as it is free; the rear aircraft is timed to reach the
/// exchange point when the patient drop-off completes. Returns nullopt when
/// the action is infeasible (leg beyond range, no intercept, no aircraft).
inline std::optional<MissionTimeline> build_timeline(const Scenario& s, std::span<const AircraftState> fleet,
                                                     const EvacRequest& request, ExchangeAction action, double now) {
  if (!request.is_transfer() && !action.is_direct())
    throw ContractViolation("build_timeline: exchange actions apply only to interisland transfers");
  detail::LegPlanner legs(s, request, action);
  const Platoon pickup_platoon = platoon_for(pickup_island(s, request));

  MissionTimeline m;
  m.action = action;
  m.injury_time = request.injury_time;
  std::optional<detail::ForwardPlan> best_fwd;
  double best_fd = kInfinity;
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    if (fleet[i].platoon != pickup_platoon) continue;
    bool ok = true;
    const double fd = fleet[i].earliest_slot(now, [&](double t) {
      auto f = legs.forward(t);
      if (!f) ok = false;
      return f ? f->employment() : 0.0;
    });
    if (!ok) continue;
    auto f = legs.forward(fd);
    if (!f) continue;
    if (!best_fwd || f->handoff < best_fwd->handoff) {
      best_fwd = f;
      best_fd = fd;
      m.forward_aircraft = i;
    }
  }
  if (!best_fwd) return std::nullopt;
  m.forward_dispatch = best_fd;
  m.pickup_time = best_fwd->pickup;
  m.legs_forward = best_fwd->legs;
  m.handoff_time = best_fwd->handoff;
  m.exchange_position = best_fwd->exchange;

  if (action.is_direct()) {
    m.rear_arrival = m.handoff_time;
    m.delivery_time = m.handoff_time;
    return m;
  }

  const double desired = std::max(legs.desired_rear_dispatch(*best_fwd), now);
  std::optional<detail::RearPlan> best_rear;
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    if (fleet[i].platoon != Platoon::ASMP) continue;
    bool ok = true;
    const double rd = fleet[i].earliest_slot(desired, [&](double t) {
      auto r = legs.rear(t, *best_fwd);
      if (!r) ok = false;
      return r ? r->employment : 0.0;
    });
    if (!ok) continue;
    auto r = legs.rear(rd, *best_fwd);
    if (!r) continue;
    if (!best_rear || r->delivery < best_rear->delivery) {
      best_rear = r;
      m.rear_dispatch = rd;
      m.rear_aircraft = i;
    }
  }
  if (!best_rear) return std::nullopt;
  m.legs_rear = best_rear->legs;
  m.rear_arrival = best_rear->arrival;
  m.delivery_time = best_rear->delivery;
  return m;
}

/// Timeline with both aircraft free at `now`: geometry only.
inline std::optional<MissionTimeline> estimate_timeline(const Scenario& s, const EvacRequest& request,
                                                        ExchangeAction action, double now) {
  static const std::vector<AircraftState> idle = make_fleet(1);
  return build_timeline(s, idle, request, action, now);
}

/// Timeline after the pickup aircraft is held `delay` hours before the
/// drop-off. The exchange and everything downstream slide by the same amount,
/// so the rear dispatch moves commensurately and the handoff gap is unchanged.
inline MissionTimeline delay_forward(MissionTimeline m, double delay) {
  if (delay < 0.0) throw ContractViolation("delay_forward: delay must be >= 0");
  if (m.action.is_direct())
    m.legs_forward[0] += delay;
  else
    m.legs_forward[1] += delay;
  m.handoff_time += delay;
  m.rear_arrival += delay;
  m.delivery_time += delay;
  if (m.rear_dispatch) *m.rear_dispatch += delay;
  return m;
}

struct DispatchSchedule {
  double forward_dispatch = 0.0;
  std::optional<double> rear_dispatch;
  double predicted_handoff_gap = 0.0;

  friend bool operator==(const DispatchSchedule&, const DispatchSchedule&) = default;
};

inline DispatchSchedule dispatch_schedule(const MissionTimeline& m) {
  return {m.forward_dispatch, m.rear_dispatch, m.predicted_handoff_gap()};
}

/// Dispatch times for `action`, optionally after a forward delay (hours).
inline std::optional<DispatchSchedule> compute_dispatch_schedule(const Scenario& s, std::span<const AircraftState> fleet,
                                                                 const EvacRequest& request, ExchangeAction action,
                                                                 double now, double forward_delay = 0.0) {
  auto m = build_timeline(s, fleet, request, action, now);
  if (!m) return std::nullopt;
  return dispatch_schedule(forward_delay > 0.0 ? delay_forward(*m, forward_delay) : *m);
}

}  // namespace medevac
