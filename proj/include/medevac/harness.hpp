#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "medevac/casualty_gen.hpp"
#include "medevac/planner.hpp"
#include "medevac/smdp.hpp"
#include "medevac/stats.hpp"

namespace medevac {

enum class Policy { Greedy, OptimalA1, OptimalA2 };

inline std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::Greedy: return "Greedy";
    case Policy::OptimalA1: return "OptimalA1";
    case Policy::OptimalA2: return "OptimalA2";
  }
  return "?";
}

inline Policy parse_policy(std::string_view s) {
  if (s == "Greedy" || s == "greedy") return Policy::Greedy;
  if (s == "OptimalA1" || s == "optimal-a1") return Policy::OptimalA1;
  if (s == "OptimalA2" || s == "optimal-a2") return Policy::OptimalA2;
  throw ValidationError("policy", "unknown policy '" + std::string(s) + "'");
}

/// One point of the environmental parameter grid.
struct ExperimentPoint {
  double magnitude = 1.0;
  double platoon_ratio = 1.4;
  double transfer_proportion = 0.25;
  double airspeed = 150.0;  ///< knots
  int patients_per_request = 3;

  friend bool operator==(const ExperimentPoint&, const ExperimentPoint&) = default;
};

struct ExperimentConfig {
  std::vector<double> magnitudes{1.0};
  std::vector<double> platoon_ratios{1.4};
  std::vector<double> transfer_proportions{0.25};
  std::vector<double> airspeeds{150.0};
  std::vector<int> patients_per_request{3};
  std::vector<Policy> policies{Policy::Greedy, Policy::OptimalA1, Policy::OptimalA2};
  int replications = 20;
  double episode_duration = 24.0;  ///< hours
  std::uint64_t master_seed = 0;
  SearchConfig search;
  ModelConfig model;
  unsigned workers = 0;  ///< 0 = hardware concurrency

  /// Grid points in output order (magnitude varies slowest).
  std::vector<ExperimentPoint> grid() const {
    std::vector<ExperimentPoint> out;
    for (double m : magnitudes)
      for (double r : platoon_ratios)
        for (double t : transfer_proportions)
          for (double v : airspeeds)
            for (int p : patients_per_request) out.push_back({m, r, t, v, p});
    return out;
  }

  void validate() const {
    if (grid().empty() || policies.empty()) throw ValidationError("sweep-grid", "parameter grid is empty");
    if (replications < 1) throw ValidationError("replications", "replications must be >= 1");
    if (!(episode_duration > 0.0)) throw ValidationError("episode-duration", "episode_duration must be > 0");
    search.validate();
  }
};

inline CasualtyGenConfig generator_config(const ExperimentPoint& p, double horizon, std::uint64_t seed) {
  CasualtyGenConfig g;
  g.magnitude_multiplier = p.magnitude;
  g.platoon_ratio = p.platoon_ratio;
  g.transfer_proportion = p.transfer_proportion;
  g.patients_per_request = p.patients_per_request;
  g.horizon = horizon;
  g.seed = seed;
  return g;
}

/// Scenario with the point's cruise airspeed applied.
inline Scenario scenario_at(const Scenario& base, const ExperimentPoint& p) {
  Scenario s = base;
  s.aircraft.cruise_speed = p.airspeed;
  s.validate();
  return s;
}

/// Metrics of one replication. Means are absent when nothing was measured.
struct EpisodeMetrics {
  double total_reward = 0.0;
  std::optional<double> fsmp_response;  ///< minutes
  std::optional<double> asmp_response;  ///< minutes
  std::optional<double> mean_response;  ///< minutes, all requests
  std::optional<double> watercraft_ratio;
  std::optional<double> response_disparity;  ///< FSMP minus ASMP mean, minutes
  int requests = 0;
  int patients = 0;
  int transfers = 0;
  int watercraft_transfers = 0;
};

struct Decision {
  std::string request_id;
  double clock = 0.0;
  ExchangeAction action;
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  std::vector<ServiceRecord> services;
  std::vector<Decision> decisions;
};

inline EpisodeMetrics compute_metrics(const Scenario& s, std::span<const ServiceRecord> services) {
  EpisodeMetrics m;
  double sum_f = 0.0, sum_a = 0.0;
  int n_f = 0, n_a = 0;
  for (const auto& r : services) {
    m.total_reward += r.reward;
    ++m.requests;
    m.patients += r.request.patients;
    if (pickup_island(s, r.request) == Island::Forward) {
      sum_f += r.t_minutes;
      ++n_f;
    } else {
      sum_a += r.t_minutes;
      ++n_a;
    }
    if (r.request.is_transfer()) {
      ++m.transfers;
      if (r.timeline.action.is_watercraft()) ++m.watercraft_transfers;
    }
  }
  if (n_f) m.fsmp_response = sum_f / n_f;
  if (n_a) m.asmp_response = sum_a / n_a;
  if (n_f + n_a) m.mean_response = (sum_f + sum_a) / (n_f + n_a);
  if (m.transfers) m.watercraft_ratio = static_cast<double>(m.watercraft_transfers) / m.transfers;
  if (n_f && n_a) m.response_disparity = *m.fsmp_response - *m.asmp_response;
  return m;
}

/// One seeded 24 h episode under `policy`. The casualty thread depends only on
/// `seed` and the point, so policies compared at one seed see the same requests.
inline EpisodeResult run_episode(const Scenario& base, const ExperimentPoint& point, Policy policy, std::uint64_t seed,
                                 const ExperimentConfig& cfg) {
  const Scenario s = scenario_at(base, point);
  const auto thread = sample_thread(s, generator_config(point, cfg.episode_duration, derive_seed(seed, 0)));
  const SmdpModel model(s, cfg.model);
  const CasualtyGenConfig planner_gen = generator_config(point, cfg.search.thread_duration, 0);
  const ActionSpace space = policy == Policy::OptimalA2 ? ActionSpace::A2 : ActionSpace::A1;
  CounterRng rng(derive_seed(seed, 1));

  EpisodeResult result;
  auto out = model.advance(model.initial_state(0.0), thread, rng, true);
  std::size_t pos = out.consumed;
  for (auto& r : out.log) result.services.push_back(std::move(r));
  SmdpState state = std::move(out.next_state);
  bool terminal = out.terminal;
  std::uint64_t epoch = 0;
  while (!terminal) {
    ExchangeAction action;
    if (policy == Policy::Greedy) {
      action = greedy_policy(model, state, space);
    } else {
      SearchConfig sc = cfg.search;
      sc.seed = derive_seed(derive_seed(seed, 2), epoch);
      action = plan(model, state, planner_gen, sc, space, 1).chosen;
    }
    result.decisions.push_back({state.pending->id, state.clock, action});
    out = model.step(state, action, std::span(thread).subspan(pos), rng, true);
    pos += out.consumed;
    for (auto& r : out.log) result.services.push_back(std::move(r));
    state = std::move(out.next_state);
    terminal = out.terminal;
    ++epoch;
  }
  result.metrics = compute_metrics(s, result.services);
  return result;
}

/// Aggregate of one metric over replications where it was defined.
struct MetricSummary {
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> ci95;
};

inline MetricSummary summarize_metric(const std::vector<std::optional<double>>& values) {
  std::vector<double> xs;
  for (const auto& v : values)
    if (v) xs.push_back(*v);
  MetricSummary m;
  m.n = xs.size();
  if (xs.empty()) return m;
  const auto s = stats::summarize(xs);
  m.mean = s.mean;
  if (xs.size() >= 2) m.ci95 = s.ci95;
  return m;
}

struct MetricsRecord {
  MetricSummary total_reward;
  MetricSummary fsmp_response;
  MetricSummary asmp_response;
  MetricSummary mean_response;
  MetricSummary watercraft_ratio;
  MetricSummary response_disparity;
};

struct SweepRow {
  ExperimentPoint point;
  Policy policy = Policy::Greedy;
  int replications = 0;
  std::optional<std::string> error;  ///< set when a replication failed; metrics are then empty
  MetricsRecord metrics;
  std::vector<EpisodeMetrics> episodes;  ///< replication order
};

inline MetricsRecord aggregate(std::span<const EpisodeMetrics> eps) {
  auto collect = [&](auto field) {
    std::vector<std::optional<double>> v;
    for (const auto& e : eps) v.push_back(field(e));
    return summarize_metric(v);
  };
  MetricsRecord r;
  r.total_reward = collect([](const EpisodeMetrics& e) { return std::optional<double>(e.total_reward); });
  r.fsmp_response = collect([](const EpisodeMetrics& e) { return e.fsmp_response; });
  r.asmp_response = collect([](const EpisodeMetrics& e) { return e.asmp_response; });
  r.mean_response = collect([](const EpisodeMetrics& e) { return e.mean_response; });
  r.watercraft_ratio = collect([](const EpisodeMetrics& e) { return e.watercraft_ratio; });
  r.response_disparity = collect([](const EpisodeMetrics& e) { return e.response_disparity; });
  return r;
}

/// Runs every (grid point, policy, replication). Replication k uses seed
/// derive_seed(master_seed, k) at every grid point and for every policy.
inline std::vector<SweepRow> run_sweep(const Scenario& base, const ExperimentConfig& cfg) {
  cfg.validate();
  const auto grid = cfg.grid();
  const std::size_t n_rows = grid.size() * cfg.policies.size();
  const std::size_t reps = static_cast<std::size_t>(cfg.replications);
  std::vector<EpisodeMetrics> slots(n_rows * reps);
  std::vector<std::string> failures(n_rows);
  std::mutex failure_mutex;
  parallel_for(
      slots.size(),
      [&](std::size_t job) {
        const std::size_t row = job / reps;
        const std::size_t rep = job % reps;
        const auto& point = grid[row / cfg.policies.size()];
        const Policy policy = cfg.policies[row % cfg.policies.size()];
        try {
          slots[job] = run_episode(base, point, policy, derive_seed(cfg.master_seed, rep), cfg).metrics;
        } catch (const std::exception& e) {
          std::lock_guard lock(failure_mutex);
          if (failures[row].empty()) failures[row] = "replication " + std::to_string(rep) + ": " + e.what();
        }
      },
      cfg.workers);

  std::vector<SweepRow> rows;
  for (std::size_t row = 0; row < n_rows; ++row) {
    SweepRow r;
    r.point = grid[row / cfg.policies.size()];
    r.policy = cfg.policies[row % cfg.policies.size()];
    r.replications = cfg.replications;
    if (!failures[row].empty()) {
      r.error = failures[row];
      rows.push_back(std::move(r));
      continue;
    }
    r.episodes.assign(slots.begin() + static_cast<std::ptrdiff_t>(row * reps),
                      slots.begin() + static_cast<std::ptrdiff_t>((row + 1) * reps));
    r.metrics = aggregate(r.episodes);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace detail {

inline std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string fmt(const std::optional<double>& v, int digits = 6) { return v ? fmt(*v, digits) : std::string(); }

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace detail

inline constexpr std::string_view kSweepCsvHeader =
    "magnitude,platoon_ratio,transfer_proportion,airspeed,patients_per_request,policy,replications,"
    "total_reward,total_reward_ci95,fsmp_response_min,fsmp_response_ci95,asmp_response_min,asmp_response_ci95,"
    "mean_response_min,mean_response_ci95,watercraft_ratio,watercraft_ratio_ci95,response_disparity_min,"
    "response_disparity_ci95";

inline void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  using detail::fmt;
  out << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << fmt(r.point.magnitude, 2) << ',' << fmt(r.point.platoon_ratio, 2) << ',' << fmt(r.point.transfer_proportion, 2)
        << ',' << fmt(r.point.airspeed, 1) << ',' << r.point.patients_per_request << ',' << to_string(r.policy) << ','
        << r.replications;
    for (const auto* s : {&m.total_reward, &m.fsmp_response, &m.asmp_response, &m.mean_response, &m.watercraft_ratio,
                          &m.response_disparity})
      out << ',' << fmt(s->mean) << ',' << fmt(s->ci95);
    out << '\n';
  }
}

inline nlohmann::json to_json(const EpisodeMetrics& e) {
  using detail::opt_json;
  return {{"total_reward", e.total_reward},
          {"fsmp_response_min", opt_json(e.fsmp_response)},
          {"asmp_response_min", opt_json(e.asmp_response)},
          {"mean_response_min", opt_json(e.mean_response)},
          {"watercraft_ratio", opt_json(e.watercraft_ratio)},
          {"response_disparity_min", opt_json(e.response_disparity)},
          {"requests", e.requests},
          {"patients", e.patients},
          {"transfers", e.transfers},
          {"watercraft_transfers", e.watercraft_transfers}};
}

inline nlohmann::json to_json(const MetricSummary& m) {
  return {{"n", m.n}, {"mean", detail::opt_json(m.mean)}, {"ci95", detail::opt_json(m.ci95)}};
}

inline nlohmann::json to_json(std::span<const SweepRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json eps = nlohmann::json::array();
    for (const auto& e : r.episodes) eps.push_back(to_json(e));
    const auto& m = r.metrics;
    out.push_back({{"magnitude", r.point.magnitude},
                   {"platoon_ratio", r.point.platoon_ratio},
                   {"transfer_proportion", r.point.transfer_proportion},
                   {"airspeed", r.point.airspeed},
                   {"patients_per_request", r.point.patients_per_request},
                   {"policy", to_string(r.policy)},
                   {"replications", r.replications},
                   {"total_reward", to_json(m.total_reward)},
                   {"fsmp_response_min", to_json(m.fsmp_response)},
                   {"asmp_response_min", to_json(m.asmp_response)},
                   {"mean_response_min", to_json(m.mean_response)},
                   {"watercraft_ratio", to_json(m.watercraft_ratio)},
                   {"response_disparity_min", to_json(m.response_disparity)},
                   {"episodes", eps}});
  }
  return out;
}

/// Chronological mission events of an episode, one JSON object per line.
inline std::vector<nlohmann::json> episode_events(const Scenario& s, std::span<const ServiceRecord> services) {
  std::vector<std::pair<double, nlohmann::json>> ev;
  for (const auto& r : services) {
    const auto& m = r.timeline;
    const auto emp = employment_times(m);
    auto add = [&](double t, std::string_view type, nlohmann::json extra = nlohmann::json::object()) {
      extra["time"] = t;
      extra["type"] = type;
      extra["request"] = r.request.id;
      ev.emplace_back(t, std::move(extra));
    };
    add(m.injury_time, "request", {{"kind", to_string(r.request.kind)}, {"patients", r.request.patients},
                                   {"origin", s.facilities[r.request.origin].id}});
    add(m.forward_dispatch, "dispatch", {{"aircraft", m.forward_aircraft}, {"action", action_label(s, m.action)}});
    add(m.pickup_time, "pickup", {{"aircraft", m.forward_aircraft}});
    if (m.rear_dispatch) {
      add(*m.rear_dispatch, "dispatch", {{"aircraft", m.rear_aircraft}, {"action", action_label(s, m.action)}});
      add(m.handoff_time, "handoff", {{"aircraft", m.forward_aircraft}});
    }
    add(m.delivery_time, "delivery", {{"t_minutes", r.t_minutes}, {"reward", r.reward}});
    add(m.forward_dispatch + emp.forward, "refuel", {{"aircraft", m.forward_aircraft}});
    if (m.rear_dispatch) add(*m.rear_dispatch + emp.rear, "refuel", {{"aircraft", m.rear_aircraft}});
    if (r.forward_fault) add(m.forward_dispatch + emp.forward, "fault", {{"aircraft", m.forward_aircraft}});
    if (r.rear_fault && m.rear_dispatch) add(*m.rear_dispatch + emp.rear, "fault", {{"aircraft", m.rear_aircraft}});
  }
  std::stable_sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<nlohmann::json> out;
  for (auto& e : ev) out.push_back(std::move(e.second));
  return out;
}

}  // namespace medevac
