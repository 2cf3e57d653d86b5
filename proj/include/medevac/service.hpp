#pragma once

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "medevac/config.hpp"
#include "medevac/harness.hpp"
#include "medevac/planner.hpp"

namespace medevac {

// ---------------------------------------------------------------------------
// Errors surfaced to API clients

/// Bad request payload; `field` names the offending member.
class RequestError : public std::runtime_error {
 public:
  RequestError(std::string field, const std::string& what) : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Conflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation not allowed in the mission's current status.
class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Time

/// Converts simulated hours to ISO-8601 UTC timestamps relative to an epoch.
class IsoClock {
 public:
  explicit IsoClock(const std::string& epoch = "2023-10-15T08:00:00Z") : epoch_(parse_utc(epoch, "epoch")) {}

  std::string format(double sim_hours) const {
    const double total_ms = std::round(sim_hours * 3600.0 * 1000.0);
    const auto ms = static_cast<long long>(total_ms);
    long long secs = ms / 1000;
    long long frac = ms % 1000;
    if (frac < 0) {
      frac += 1000;
      --secs;
    }
    const std::time_t t = epoch_ + static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03lldZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
    return buf;
  }

  /// Simulated hours for an ISO-8601 UTC timestamp ("...Z" or "+00:00").
  double parse(const std::string& iso, const std::string& field = "time") const {
    double frac = 0.0;
    const std::time_t t = parse_utc(iso, field, &frac);
    return (static_cast<double>(t - epoch_) + frac) / 3600.0;
  }

 private:
  static std::time_t parse_utc(const std::string& s, const std::string& field, double* frac_out = nullptr) {
    std::tm tm{};
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                    &tm.tm_min, &tm.tm_sec, &consumed) != 6)
      throw RequestError(field, "expected an ISO-8601 UTC timestamp, got '" + s + "'");
    std::string_view rest(s.c_str() + consumed);
    double frac = 0.0;
    if (!rest.empty() && rest.front() == '.') {
      std::size_t i = 1;
      double scale = 0.1;
      while (i < rest.size() && std::isdigit(static_cast<unsigned char>(rest[i]))) {
        frac += (rest[i] - '0') * scale;
        scale /= 10.0;
        ++i;
      }
      rest.remove_prefix(i);
    }
    if (rest != "Z" && rest != "+00:00") throw RequestError(field, "timestamp must be UTC ('Z'), got '" + s + "'");
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    if (frac_out) *frac_out = frac;
    return timegm(&tm);
  }

  std::time_t epoch_;
};

/// Simulation clock in hours: stepped (advanced explicitly), scaled, or realtime.
class SimClock {
 public:
  explicit SimClock(ClockMode mode = ClockMode::Stepped, double scale = 1.0)
      : mode_(mode), scale_(mode == ClockMode::Realtime ? 1.0 : scale), start_(std::chrono::steady_clock::now()) {}

  ClockMode mode() const { return mode_; }

  double now() const {
    if (mode_ == ClockMode::Stepped) return offset_;
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    return offset_ + wall * scale_ / 3600.0;
  }

  void advance(double hours) {
    if (mode_ != ClockMode::Stepped) throw StateError("the clock can only be advanced in stepped mode");
    if (hours < 0.0) throw RequestError("minutes", "clock cannot move backwards");
    offset_ += hours;
  }

  /// Moves the clock forward to at least `hours` (used when replaying a log).
  void catch_up(double hours) {
    if (hours > now()) offset_ += hours - now();
  }

 private:
  ClockMode mode_;
  double scale_;
  std::chrono::steady_clock::time_point start_;
  double offset_ = 0.0;
};

// ---------------------------------------------------------------------------
// Missions

enum class MissionStatus { Planned, ForwardEnroute, Handoff, RearEnroute, Delivered, Aborted };

inline std::string_view to_string(MissionStatus s) {
  switch (s) {
    case MissionStatus::Planned: return "Planned";
    case MissionStatus::ForwardEnroute: return "ForwardEnroute";
    case MissionStatus::Handoff: return "Handoff";
    case MissionStatus::RearEnroute: return "RearEnroute";
    case MissionStatus::Delivered: return "Delivered";
    case MissionStatus::Aborted: return "Aborted";
  }
  return "?";
}

inline MissionStatus parse_mission_status(std::string_view s) {
  for (auto st : {MissionStatus::Planned, MissionStatus::ForwardEnroute, MissionStatus::Handoff,
                  MissionStatus::RearEnroute, MissionStatus::Delivered, MissionStatus::Aborted})
    if (to_string(st) == s) return st;
  throw ParseError("/status", "unknown mission status '" + std::string(s) + "'");
}

/// Status implied by the timeline at `now`. Direct missions skip Handoff and RearEnroute.
inline MissionStatus status_at(const MissionTimeline& m, double handoff_duration, double now) {
  if (now < m.forward_dispatch) return MissionStatus::Planned;
  if (m.action.is_direct()) return now < m.delivery_time ? MissionStatus::ForwardEnroute : MissionStatus::Delivered;
  if (now < m.handoff_time - handoff_duration) return MissionStatus::ForwardEnroute;
  if (now < m.handoff_time) return MissionStatus::Handoff;
  if (now < m.delivery_time) return MissionStatus::RearEnroute;
  return MissionStatus::Delivered;
}

struct InjectedDelay {
  std::string cause;
  double minutes = 0.0;
  double at = 0.0;  ///< sim hours

  friend bool operator==(const InjectedDelay&, const InjectedDelay&) = default;
};

struct ServiceEvent {
  std::uint64_t seq = 0;  ///< global, strictly increasing
  std::uint64_t mission_seq = 0;
  std::string mission;
  std::string type;  ///< plan.created, plan.updated, mission.status
  double sim_time = 0.0;
  nlohmann::json payload;
};

struct MissionRecord {
  EvacRequest request;
  PlanResult plan;  ///< schedule and timeline reflect injected delays
  DispatchSchedule planned_schedule;
  MissionStatus status = MissionStatus::Planned;
  std::vector<ServiceEvent> actual_events;
  std::vector<InjectedDelay> injected_delays;
  std::uint64_t search_seed = 0;

  double total_delay_minutes() const {
    double d = 0.0;
    for (const auto& x : injected_delays) d += x.minutes;
    return d;
  }
};

struct ServiceOptions {
  Policy policy = Policy::OptimalA1;
  SearchConfig search;
  ModelConfig model;
  ExperimentPoint point;  ///< generator parameters for planner casualty threads
  ClockMode clock = ClockMode::Stepped;
  double time_scale = 1.0;
  std::string epoch = "2023-10-15T08:00:00Z";
  std::string event_log;
  std::uint64_t seed = 0;
  unsigned workers = 0;

  static ServiceOptions from(const AppConfig& c) {
    ServiceOptions o;
    o.policy = c.service.policy;
    o.search = c.experiment.search;
    o.model = c.experiment.model;
    if (auto g = c.experiment.grid(); !g.empty()) o.point = g.front();
    o.clock = c.service.clock;
    o.time_scale = c.service.time_scale;
    o.epoch = c.service.epoch;
    o.event_log = c.service.event_log;
    o.seed = c.seed;
    o.workers = c.experiment.workers;
    return o;
  }
};

// ---------------------------------------------------------------------------
// JSON views. The API form uses ISO timestamps and minutes; the decision
// block in events keeps exact hours so a log replays bit for bit.

namespace detail {

inline nlohmann::json iso_or_null(const IsoClock& iso, const std::optional<double>& h) {
  return h ? nlohmann::json(iso.format(*h)) : nlohmann::json(nullptr);
}

inline nlohmann::json schedule_api(const IsoClock& iso, const DispatchSchedule& d) {
  return {{"forward_dispatch", iso.format(d.forward_dispatch)},
          {"rear_dispatch", iso_or_null(iso, d.rear_dispatch)},
          {"predicted_handoff_gap_min", d.predicted_handoff_gap * 60.0}};
}

inline nlohmann::json timeline_api(const Scenario& s, const IsoClock& iso, const MissionTimeline& m) {
  nlohmann::json legs_f = nlohmann::json::array(), legs_r = nlohmann::json::array();
  for (double x : m.legs_forward) legs_f.push_back(x * 60.0);
  for (double x : m.legs_rear) legs_r.push_back(x * 60.0);
  const auto emp = employment_times(m);
  nlohmann::json j{{"action", action_label(s, m.action)},
                   {"injury_time", iso.format(m.injury_time)},
                   {"forward_dispatch", iso.format(m.forward_dispatch)},
                   {"pickup_time", iso.format(m.pickup_time)},
                   {"rear_dispatch", iso_or_null(iso, m.rear_dispatch)},
                   {"handoff_time", iso.format(m.handoff_time)},
                   {"rear_arrival", iso.format(m.rear_arrival)},
                   {"delivery_time", iso.format(m.delivery_time)},
                   {"legs_forward_min", legs_f},
                   {"legs_rear_min", legs_r},
                   {"employment_min", {{"forward", emp.forward * 60.0}, {"rear", emp.rear * 60.0}}},
                   {"exchange_position", {{"x", m.exchange_position.x}, {"y", m.exchange_position.y}}},
                   {"forward_aircraft", m.forward_aircraft},
                   {"response_time_min", response_time(m) * 60.0}};
  j["rear_aircraft"] = m.rear_dispatch ? nlohmann::json(m.rear_aircraft) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json request_api(const Scenario& s, const IsoClock& iso, const EvacRequest& r) {
  auto j = to_json(s, r);
  j["injury_time"] = iso.format(r.injury_time);
  return j;
}

inline nlohmann::json event_api(const IsoClock& iso, const ServiceEvent& e) {
  return {{"seq", e.seq},   {"mission_seq", e.mission_seq}, {"mission", e.mission},
          {"type", e.type}, {"time", iso.format(e.sim_time)}, {"payload", e.payload}};
}

}  // namespace detail

inline nlohmann::json mission_json(const Scenario& s, const IsoClock& iso, const MissionRecord& m) {
  using namespace detail;
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& sc : m.plan.per_action_scores) {
    nlohmann::json row{{"action", action_label(s, sc.action)}, {"score", sc.score}, {"visits", sc.visits}};
    row["predicted_response_time_min"] =
        sc.predicted_response_time ? nlohmann::json(*sc.predicted_response_time * 60.0) : nlohmann::json(nullptr);
    scores.push_back(std::move(row));
  }
  nlohmann::json delays = nlohmann::json::array();
  for (const auto& d : m.injected_delays) delays.push_back({{"cause", d.cause}, {"minutes", d.minutes}, {"at", iso.format(d.at)}});
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : m.actual_events)
    events.push_back({{"seq", e.seq}, {"mission_seq", e.mission_seq}, {"type", e.type}, {"time", iso.format(e.sim_time)}});
  return {{"id", m.request.id},
          {"status", to_string(m.status)},
          {"request", request_api(s, iso, m.request)},
          {"plan",
           {{"chosen", action_label(s, m.plan.chosen)},
            {"predicted_response_time_min", m.plan.predicted_response_time * 60.0},
            {"per_action_scores", scores},
            {"schedule", schedule_api(iso, m.plan.schedule)},
            {"planned_schedule", schedule_api(iso, m.planned_schedule)},
            {"timeline", timeline_api(s, iso, m.plan.timeline)}}},
          {"injected_delays", delays},
          {"events", events}};
}

// ---------------------------------------------------------------------------
// Planning entry point shared by the service and the CLI

/// Decides the pending request of `root` under `policy`. Point-of-injury
/// requests are flown direct. `pinned` overrides the chosen action (scores
/// are still reported for every action). Tree diagnostics are kept only for
/// the search policies.
inline PlanResult plan_with_policy(const SmdpModel& model, const SmdpState& root, const ExperimentPoint& point,
                                   const SearchConfig& search, Policy policy, std::optional<ExchangeAction> pinned,
                                   unsigned workers = 0) {
  if (!root.pending) throw ContractViolation("plan_with_policy: state has no pending request");
  const Scenario& s = model.scenario();
  const EvacRequest& req = *root.pending;
  if (pinned && !req.is_transfer() && !pinned->is_direct())
    throw RequestError("exchange", "point-of-injury requests are flown direct");
  PlanResult out;
  if (!req.is_transfer()) {
    auto tl = build_timeline(s, root.fleet, req, ExchangeAction::direct(), root.clock);
    if (!tl) throw InfeasibleRequest("request '" + req.id + "' cannot be flown direct");
    out.chosen = ExchangeAction::direct();
    out.per_action_scores.push_back({out.chosen, 0.0, 0, response_time(*tl)});
  } else if (policy == Policy::Greedy) {
    out.chosen = greedy_policy(model, root, ActionSpace::A1);
    for (auto a : model.legal_actions(root, ActionSpace::A1))
      out.per_action_scores.push_back({a, 0.0, 0, response_time(*build_timeline(s, root.fleet, req, a, root.clock))});
  } else {
    const auto gen = generator_config(point, search.thread_duration, 0);
    const auto space = policy == Policy::OptimalA2 ? ActionSpace::A2 : ActionSpace::A1;
    out = plan(model, root, gen, search, space, workers);
  }
  if (pinned) out.chosen = *pinned;
  auto tl = build_timeline(s, root.fleet, req, out.chosen, root.clock);
  if (!tl) throw InfeasibleRequest("exchange '" + action_label(s, out.chosen) + "' is infeasible for '" + req.id + "'");
  out.timeline = *tl;
  out.schedule = dispatch_schedule(*tl);
  out.predicted_response_time = response_time(*tl);
  return out;
}

// ---------------------------------------------------------------------------
// Service

/// Live planning service. All mutations take one lock, so planning is
/// serialized against the world state; events are appended under the same
/// lock and fanned out to readers through a separate feed.
class DispatchService {
 public:
  DispatchService(Scenario scenario, ServiceOptions opt)
      : scenario_(std::move(scenario)),
        opt_(std::move(opt)),
        model_(scenario_, opt_.model),
        iso_(opt_.epoch),
        clock_(opt_.clock, opt_.time_scale),
        fleet_(make_fleet(opt_.model.aircraft_per_platoon)) {
    opt_.search.validate();
    if (!opt_.event_log.empty()) {
      log_.open(opt_.event_log, std::ios::app);
      if (!log_) throw ParseError(opt_.event_log, "cannot open event log for appending");
    }
  }

  /// Rebuilds a service from a JSON-lines event log. New events are appended
  /// to `opt.event_log` if set (which may be the same file).
  static std::unique_ptr<DispatchService> replay(Scenario scenario, ServiceOptions opt, std::istream& log) {
    std::vector<nlohmann::json> lines;
    std::string line;
    std::size_t n = 0;
    while (std::getline(log, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ParseError("line " + std::to_string(n), "invalid JSON in event log");
      lines.push_back(std::move(j));
    }
    auto svc = std::make_unique<DispatchService>(std::move(scenario), std::move(opt));
    std::lock_guard lock(svc->mutex_);
    for (const auto& j : lines) svc->apply_logged(j);
    return svc;
  }

  const Scenario& scenario() const { return scenario_; }
  const IsoClock& iso() const { return iso_; }

  double now() const {
    std::lock_guard lock(mutex_);
    return clock_.now();
  }

  /// Stepped mode only. Emits status events for missions that progressed.
  void advance_clock(double hours) {
    std::lock_guard lock(mutex_);
    clock_.advance(hours);
    refresh_locked();
  }

  /// Parses an API request payload into a request stamped at `now`.
  EvacRequest parse_request(const nlohmann::json& j, double now) const {
    if (!j.is_object()) throw RequestError("", "request body must be a JSON object");
    auto str = [&](const char* key, bool required) -> std::optional<std::string> {
      if (!j.contains(key)) {
        if (required) throw RequestError(key, std::string("missing required field '") + key + "'");
        return std::nullopt;
      }
      if (!j.at(key).is_string()) throw RequestError(key, std::string("'") + key + "' must be a string");
      return j.at(key).get<std::string>();
    };
    EvacRequest r;
    r.id = *str("id", true);
    if (r.id.empty()) throw RequestError("id", "'id' must be non-empty");
    const std::string kind = str("kind", false).value_or("InterislandTransfer");
    if (kind == "InterislandTransfer")
      r.kind = RequestKind::InterislandTransfer;
    else if (kind == "PointOfInjury")
      r.kind = RequestKind::PointOfInjury;
    else
      throw RequestError("kind", "'kind' must be InterislandTransfer or PointOfInjury");

    const std::string origin = *str("origin", true);
    auto o = scenario_.find_facility(origin);
    if (!o) throw RequestError("origin", "unknown facility '" + origin + "'");
    r.origin = *o;
    if (auto d = str("destination", false)) {
      auto di = scenario_.find_facility(*d);
      if (!di) throw RequestError("destination", "unknown facility '" + *d + "'");
      r.destination = *di;
    } else {
      r.destination = r.is_transfer() ? scenario_.role3 : OriginPools(scenario_).poi_destination[r.origin];
    }

    if (!j.contains("patients") || !j.at("patients").is_number_integer())
      throw RequestError("patients", "'patients' must be an integer");
    r.patients = j.at("patients").get<int>();
    if (r.patients < 1 || r.patients > scenario_.aircraft.cabin_capacity)
      throw RequestError("patients", "'patients' must be between 1 and " + std::to_string(scenario_.aircraft.cabin_capacity));

    r.injury_time = now;
    if (auto t = str("injury_time", false)) {
      r.injury_time = iso_.parse(*t, "injury_time");
      if (r.injury_time > now + 1e-9) throw RequestError("injury_time", "'injury_time' lies in the future");
    }
    try {
      validate_request(scenario_, r);
    } catch (const ValidationError& e) {
      const std::string& inv = e.invariant();
      const char* field = inv == "transfer-destination" || inv == "poi-same-island" ? "destination" : "origin";
      throw RequestError(field, e.what());
    }
    return r;
  }

  /// Plans and records a new mission. Optional `exchange` pins the action
  /// (an operator override); scores are still computed for every action.
  MissionRecord submit_request(const nlohmann::json& payload) {
    std::lock_guard lock(mutex_);
    const double now = clock_.now();
    const EvacRequest req = parse_request(payload, now);
    if (missions_.count(req.id)) throw Conflict("mission '" + req.id + "' already exists");
    std::optional<ExchangeAction> pinned;
    if (payload.contains("exchange") && !payload.at("exchange").is_null()) {
      if (!payload.at("exchange").is_string()) throw RequestError("exchange", "'exchange' must be an action label");
      try {
        pinned = parse_action_label(scenario_, payload.at("exchange").get<std::string>());
      } catch (const ParseError& e) {
        throw RequestError("exchange", e.what());
      }
    }

    const std::uint64_t seed = derive_seed(opt_.seed, submissions_);
    PlanResult result = plan_for(req, now, seed, pinned);
    result.trees.clear();
    ++submissions_;

    MissionRecord rec;
    rec.request = req;
    rec.plan = std::move(result);
    rec.planned_schedule = rec.plan.schedule;
    rec.search_seed = seed;
    commit(rec.plan.timeline);
    auto& stored = missions_[req.id] = std::move(rec);
    order_.push_back(req.id);

    nlohmann::json payload_out{{"mission", mission_json(scenario_, iso_, stored)}, {"decision", decision_json(stored, now)}};
    emit(stored, "plan.created", now, std::move(payload_out));
    refresh_locked();
    return stored;
  }

  /// Holds the forward aircraft `minutes` longer before drop-off; the rear
  /// dispatch and everything after the exchange move by the same amount.
  MissionRecord inject_delay(const std::string& id, const std::string& cause, double minutes) {
    std::lock_guard lock(mutex_);
    if (!std::isfinite(minutes) || minutes < 0.0) throw RequestError("minutes", "'minutes' must be a non-negative number");
    refresh_locked();
    auto it = missions_.find(id);
    if (it == missions_.end()) throw NotFound("mission '" + id + "' not found");
    MissionRecord& m = it->second;
    if (m.status > MissionStatus::Handoff)
      throw StateError("mission '" + id + "' is " + std::string(to_string(m.status)) + "; delays apply only up to Handoff");
    const double now = clock_.now();
    const DispatchSchedule old = m.plan.schedule;
    apply_delay(m, cause, minutes, now);
    emit(m, "plan.updated", now,
         {{"cause", cause},
          {"minutes", minutes},
          {"old_schedule", detail::schedule_api(iso_, old)},
          {"new_schedule", detail::schedule_api(iso_, m.plan.schedule)},
          {"mission", mission_json(scenario_, iso_, m)}});
    refresh_locked();
    return m;
  }

  MissionRecord get_mission(const std::string& id) {
    std::lock_guard lock(mutex_);
    refresh_locked();
    auto it = missions_.find(id);
    if (it == missions_.end()) throw NotFound("mission '" + id + "' not found");
    return it->second;
  }

  std::vector<MissionRecord> missions() {
    std::lock_guard lock(mutex_);
    refresh_locked();
    std::vector<MissionRecord> out;
    for (const auto& id : order_) out.push_back(missions_.at(id));
    return out;
  }

  /// World snapshot: clock, watercraft positions, aircraft status, missions.
  nlohmann::json get_state() {
    std::lock_guard lock(mutex_);
    refresh_locked();
    const double now = clock_.now();
    nlohmann::json craft = nlohmann::json::array();
    for (const auto& r : scenario_.watercraft) {
      const auto fix = watercraft_position(r, now);
      craft.push_back({{"id", r.id},
                       {"position", {{"x", fix.position.x}, {"y", fix.position.y}}},
                       {"velocity", {{"x", fix.velocity.x}, {"y", fix.velocity.y}}},
                       {"speed_kn", norm(fix.velocity)}});
    }
    nlohmann::json aircraft = nlohmann::json::array();
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
      const auto& a = fleet_[i];
      const bool employed = std::any_of(a.schedule.begin(), a.schedule.end(),
                                        [&](const Commitment& c) { return c.start <= now && now < c.end; });
      aircraft.push_back({{"index", i},
                          {"platoon", to_string(a.platoon)},
                          {"status", employed ? "employed" : "available"},
                          {"available_at", iso_.format(std::max(now, a.busy_until))},
                          {"utilization", a.utilization(now, opt_.model.utilization_window)}});
    }
    nlohmann::json missions = nlohmann::json::array();
    for (const auto& id : order_) {
      const auto& m = missions_.at(id);
      missions.push_back({{"id", id},
                          {"status", to_string(m.status)},
                          {"chosen", action_label(scenario_, m.plan.chosen)},
                          {"schedule", detail::schedule_api(iso_, m.plan.schedule)},
                          {"delivery_time", iso_.format(m.plan.timeline.delivery_time)}});
    }
    return {{"time", iso_.format(now)},
            {"clock", to_string(clock_.mode())},
            {"last_seq", last_seq_},
            {"watercraft", craft},
            {"aircraft", aircraft},
            {"missions", missions}};
  }

  /// Events with seq > `after`, waiting up to `timeout` for at least one.
  std::vector<ServiceEvent> events_since(std::uint64_t after, std::chrono::milliseconds timeout = {}) {
    {
      std::lock_guard lock(mutex_);
      refresh_locked();
    }
    std::unique_lock lock(feed_mutex_);
    auto ready = [&] { return stopping_ || (!feed_.empty() && feed_.back().seq > after); };
    if (timeout.count() > 0) feed_cv_.wait_for(lock, timeout, ready);
    std::vector<ServiceEvent> out;
    auto it = std::upper_bound(feed_.begin(), feed_.end(), after,
                               [](std::uint64_t v, const ServiceEvent& e) { return v < e.seq; });
    out.assign(it, feed_.end());
    return out;
  }

  /// Wakes blocked event readers; used on shutdown.
  void stop_feed() {
    std::lock_guard lock(feed_mutex_);
    stopping_ = true;
    feed_cv_.notify_all();
  }
  bool stopping() const {
    std::lock_guard lock(feed_mutex_);
    return stopping_;
  }

 private:
  PlanResult plan_for(const EvacRequest& req, double now, std::uint64_t seed, std::optional<ExchangeAction> pinned) {
    SmdpState root;
    root.clock = now;
    root.fleet = fleet_;
    root.pending = req;
    SearchConfig sc = opt_.search;
    sc.seed = seed;
    return plan_with_policy(model_, root, opt_.point, sc, opt_.policy, pinned, opt_.workers);
  }

  nlohmann::json decision_json(const MissionRecord& m, double now) const {
    nlohmann::json scores = nlohmann::json::array();
    for (const auto& sc : m.plan.per_action_scores) {
      nlohmann::json row{{"action", action_label(scenario_, sc.action)}, {"score", sc.score}, {"visits", sc.visits}};
      row["predicted_response_time"] =
          sc.predicted_response_time ? nlohmann::json(*sc.predicted_response_time) : nlohmann::json(nullptr);
      scores.push_back(std::move(row));
    }
    return {{"request", to_json(scenario_, m.request)},
            {"clock", now},
            {"chosen", action_label(scenario_, m.plan.chosen)},
            {"scores", scores},
            {"search_seed", m.search_seed}};
  }

  void commit(const MissionTimeline& tl) {
    const auto emp = employment_times(tl);
    fleet_[tl.forward_aircraft].commit(tl.forward_dispatch, tl.forward_dispatch + emp.forward);
    if (tl.rear_dispatch) fleet_[tl.rear_aircraft].commit(*tl.rear_dispatch, *tl.rear_dispatch + emp.rear);
  }

  static void move_commitment(AircraftState& a, Commitment from, Commitment to) {
    auto it = std::find(a.schedule.begin(), a.schedule.end(), from);
    if (it == a.schedule.end()) throw ContractViolation("move_commitment: commitment not found");
    a.schedule.erase(it);
    a.busy_until = 0.0;
    for (const auto& c : a.schedule) a.busy_until = std::max(a.busy_until, c.end);
    a.commit(to.start, to.end);
  }

  void apply_delay(MissionRecord& m, const std::string& cause, double minutes, double now) {
    const MissionTimeline old = m.plan.timeline;
    const MissionTimeline next = delay_forward(old, minutes / 60.0);
    const auto e_old = employment_times(old);
    const auto e_new = employment_times(next);
    move_commitment(fleet_[old.forward_aircraft], {old.forward_dispatch, old.forward_dispatch + e_old.forward},
                    {next.forward_dispatch, next.forward_dispatch + e_new.forward});
    if (old.rear_dispatch)
      move_commitment(fleet_[old.rear_aircraft], {*old.rear_dispatch, *old.rear_dispatch + e_old.rear},
                      {*next.rear_dispatch, *next.rear_dispatch + e_new.rear});
    m.plan.timeline = next;
    m.plan.schedule = dispatch_schedule(next);
    m.plan.predicted_response_time = response_time(next);
    m.injected_delays.push_back({cause, minutes, now});
  }

  void emit(MissionRecord& m, std::string type, double sim_time, nlohmann::json payload) {
    ServiceEvent e;
    e.seq = ++last_seq_;
    e.mission_seq = m.actual_events.empty() ? 1 : m.actual_events.back().mission_seq + 1;
    e.mission = m.request.id;
    e.type = std::move(type);
    e.sim_time = sim_time;
    e.payload = std::move(payload);
    if (log_.is_open()) {
      nlohmann::json line = detail::event_api(iso_, e);
      line["sim_time"] = e.sim_time;
      log_ << line.dump() << '\n';
      log_.flush();
    }
    ServiceEvent summary = e;
    summary.payload = nullptr;
    m.actual_events.push_back(std::move(summary));
    {
      std::lock_guard lock(feed_mutex_);
      feed_.push_back(std::move(e));
    }
    feed_cv_.notify_all();
  }

  void refresh_locked() {
    const double now = clock_.now();
    for (const auto& id : order_) {
      auto& m = missions_.at(id);
      if (m.status == MissionStatus::Aborted || m.status == MissionStatus::Delivered) continue;
      const auto s = status_at(m.plan.timeline, scenario_.aircraft.handoff_duration, now);
      if (s > m.status) {
        m.status = s;
        emit(m, "mission.status", now, {{"status", to_string(s)}});
      }
    }
  }

  /// Re-applies one logged event. Decisions are taken from the log; the
  /// timeline is rebuilt from the replayed fleet, so it matches exactly.
  void apply_logged(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    const std::string id = j.at("mission").get<std::string>();
    const double t = j.at("sim_time").get<double>();
    const auto& p = j.at("payload");
    clock_.catch_up(t);
    MissionRecord* m = nullptr;
    if (type == "plan.created") {
      const auto& d = p.at("decision");
      MissionRecord rec;
      rec.request = request_from_json(scenario_, d.at("request"));
      rec.search_seed = d.at("search_seed").get<std::uint64_t>();
      rec.plan.chosen = parse_action_label(scenario_, d.at("chosen").get<std::string>());
      for (const auto& row : d.at("scores")) {
        ActionScore sc{parse_action_label(scenario_, row.at("action").get<std::string>()), row.at("score").get<double>(),
                       row.at("visits").get<long>(), std::nullopt};
        if (!row.at("predicted_response_time").is_null()) sc.predicted_response_time = row.at("predicted_response_time").get<double>();
        rec.plan.per_action_scores.push_back(sc);
      }
      auto tl = build_timeline(scenario_, fleet_, rec.request, rec.plan.chosen, d.at("clock").get<double>());
      if (!tl) throw ParseError("/payload/decision", "logged decision is infeasible on the replayed fleet");
      rec.plan.timeline = *tl;
      rec.plan.schedule = rec.planned_schedule = dispatch_schedule(*tl);
      rec.plan.predicted_response_time = response_time(*tl);
      commit(*tl);
      missions_[id] = std::move(rec);
      order_.push_back(id);
      ++submissions_;
      m = &missions_.at(id);
    } else {
      auto it = missions_.find(id);
      if (it == missions_.end()) throw ParseError("/mission", "event for unknown mission '" + id + "'");
      m = &it->second;
      if (type == "plan.updated")
        apply_delay(*m, p.at("cause").get<std::string>(), p.at("minutes").get<double>(), t);
      else if (type == "mission.status")
        m->status = parse_mission_status(p.at("status").get<std::string>());
      else
        throw ParseError("/type", "unknown event type '" + type + "'");
    }
    ServiceEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.mission_seq = j.at("mission_seq").get<std::uint64_t>();
    e.mission = id;
    e.type = type;
    e.sim_time = t;
    e.payload = p;
    last_seq_ = std::max(last_seq_, e.seq);
    ServiceEvent summary = e;
    summary.payload = nullptr;
    m->actual_events.push_back(std::move(summary));
    std::lock_guard lock(feed_mutex_);
    feed_.push_back(std::move(e));
  }

  Scenario scenario_;
  ServiceOptions opt_;
  SmdpModel model_;
  IsoClock iso_;
  SimClock clock_;
  std::vector<AircraftState> fleet_;
  std::map<std::string, MissionRecord> missions_;
  std::vector<std::string> order_;
  std::uint64_t last_seq_ = 0;
  std::uint64_t submissions_ = 0;
  std::ofstream log_;
  mutable std::mutex mutex_;

  std::vector<ServiceEvent> feed_;
  mutable std::mutex feed_mutex_;
  std::condition_variable feed_cv_;
  bool stopping_ = false;
};

}  // namespace medevac
