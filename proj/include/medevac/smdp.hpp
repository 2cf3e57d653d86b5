#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "medevac/actions.hpp"
#include "medevac/aircraft.hpp"
#include "medevac/errors.hpp"
#include "medevac/kinematics.hpp"
#include "medevac/request.hpp"
#include "medevac/reward.hpp"
#include "medevac/rng.hpp"
#include "medevac/scenario.hpp"

namespace medevac {

enum class RewardMode { Optimal, Greedy };

struct ModelConfig {
  RewardMode reward_mode = RewardMode::Optimal;
  PenaltyConfig penalty;
  bool transfer_patient_multiplier = false;
  MaintenanceConfig maintenance;
  double utilization_window = 24.0;  ///< hours, trailing
  int aircraft_per_platoon = 1;
};

struct SmdpState {
  double clock = 0.0;
  std::vector<AircraftState> fleet;
  std::optional<EvacRequest> pending;  ///< the transfer awaiting an exchange decision
  std::uint64_t rng_cursor = 0;

  bool operator==(const SmdpState&) const = default;
};

/// One serviced request within a transition.
struct ServiceRecord {
  EvacRequest request;
  MissionTimeline timeline;
  double t_minutes = 0.0;  ///< injury to delivery
  double reward = 0.0;     ///< per-kind fused reward times patients
  bool forward_fault = false;
  bool rear_fault = false;
};

struct TransitionOutcome {
  SmdpState next_state;
  double reward = 0.0;
  double sojourn = 0.0;
  MissionTimeline timeline;
  bool terminal = false;
  std::size_t consumed = 0;  ///< requests taken from the remaining thread
  std::vector<ServiceRecord> log;
};

/// Per-patient-weighted fused reward with the preset matching the request kind.
inline double service_reward(const EvacRequest& r, double t_minutes) {
  return fused_reward(r.is_transfer() ? kTransferSurvival : kPointOfInjurySurvival, t_minutes) * r.patients;
}

/// Generative model of the evacuation system. Holds a reference to the
/// scenario, which must outlive it.
class SmdpModel {
 public:
  SmdpModel(const Scenario& scenario, ModelConfig cfg = {}) : s_(&scenario), cfg_(cfg) {}

  const Scenario& scenario() const { return *s_; }
  const ModelConfig& config() const { return cfg_; }

  SmdpState initial_state(double clock = 0.0) const {
    SmdpState st;
    st.clock = clock;
    st.fleet = make_fleet(cfg_.aircraft_per_platoon);
    return st;
  }

  /// Catalog actions for `space` that yield a feasible timeline from `state`.
  std::vector<ExchangeAction> legal_actions(const SmdpState& state, ActionSpace space) const {
    if (!state.pending) throw ContractViolation("legal_actions: state has no pending transfer");
    std::vector<ExchangeAction> out;
    for (auto a : action_catalog(*s_, space))
      if (build_timeline(*s_, state.fleet, *state.pending, a, state.clock)) out.push_back(a);
    if (out.empty() || !out.back().is_direct())
      throw InfeasibleRequest("request '" + state.pending->id + "' cannot be flown direct to the Role3");
    return out;
  }

  /// Services point-of-injury requests from `remaining` until the next
  /// transfer, which becomes pending. Used to open an episode.
  TransitionOutcome advance(SmdpState state, std::span<const EvacRequest> remaining, CounterRng& rng,
                            bool record = false) const {
    TransitionOutcome out;
    const double start = state.clock;
    std::vector<IntermediateOutcome> intermediate;
    double last_delivery = start;
    out.consumed = serve_until_transfer(state, remaining, rng, intermediate, last_delivery, record ? &out.log : nullptr);
    for (const auto& x : intermediate) out.reward += fused_reward(kPointOfInjurySurvival, x.t_minutes) * x.patients;
    finish(state, out, start, last_delivery);
    out.next_state = std::move(state);
    out.next_state.rng_cursor = rng.cursor();
    return out;
  }

  /// Resolves the pending transfer with `action`, then services the
  /// point-of-injury requests that arrive before the next transfer.
  TransitionOutcome step(const SmdpState& state, ExchangeAction action, std::span<const EvacRequest> remaining,
                         CounterRng& rng, bool record = false) const {
    if (!state.pending) throw ContractViolation("step: state has no pending transfer");
    const EvacRequest& req = *state.pending;
    auto tl = build_timeline(*s_, state.fleet, req, action, state.clock);
    if (!tl) throw ContractViolation("step: action '" + action_label(*s_, action) + "' is infeasible");

    TransitionOutcome out;
    SmdpState next = state;
    next.pending.reset();
    const double start = state.clock;
    const auto emp = employment_times(*tl);
    const double u1 = state.fleet[tl->forward_aircraft].utilization(start, cfg_.utilization_window);
    const double u2 = tl->rear_dispatch ? state.fleet[tl->rear_aircraft].utilization(start, cfg_.utilization_window) : 0.0;
    ServiceRecord rec{req, *tl, 0.0, 0.0, false, false};
    commit_timeline(next, *tl, rng, rec);

    const double t_transfer = (tl->delivery_time - req.injury_time) * 60.0;
    rec.t_minutes = t_transfer;
    rec.reward = service_reward(req, t_transfer);
    if (record) out.log.push_back(rec);

    std::vector<IntermediateOutcome> intermediate;
    double last_delivery = tl->delivery_time;
    out.consumed = serve_until_transfer(next, remaining, rng, intermediate, last_delivery, record ? &out.log : nullptr);

    if (cfg_.reward_mode == RewardMode::Greedy) {
      out.reward = greedy_reward(t_transfer, req.patients);
    } else {
      out.reward = optimal_reward(t_transfer, intermediate, cfg_.transfer_patient_multiplier ? req.patients : 0);
    }
    out.reward -= utilization_penalty(cfg_.penalty, emp.forward, u1, emp.rear, u2);
    out.timeline = *tl;
    finish(next, out, start, tl->delivery_time);
    out.next_state = std::move(next);
    out.next_state.rng_cursor = rng.cursor();
    return out;
  }

 private:
  void commit_timeline(SmdpState& st, const MissionTimeline& tl, CounterRng& rng, ServiceRecord& rec) const {
    const auto emp = employment_times(tl);
    auto& fwd = st.fleet[tl.forward_aircraft];
    fwd.commit(tl.forward_dispatch, tl.forward_dispatch + emp.forward);
    const int before_f = fwd.replacements;
    fwd = maintenance_update(std::move(fwd), emp.forward, rng, cfg_.maintenance);
    rec.forward_fault = fwd.replacements != before_f;
    if (tl.rear_dispatch) {
      auto& rear = st.fleet[tl.rear_aircraft];
      rear.commit(*tl.rear_dispatch, *tl.rear_dispatch + emp.rear);
      const int before_r = rear.replacements;
      rear = maintenance_update(std::move(rear), emp.rear, rng, cfg_.maintenance);
      rec.rear_fault = rear.replacements != before_r;
    }
  }

  std::size_t serve_until_transfer(SmdpState& st, std::span<const EvacRequest> remaining, CounterRng& rng,
                                   std::vector<IntermediateOutcome>& intermediate, double& last_delivery,
                                   std::vector<ServiceRecord>* log) const {
    std::size_t i = 0;
    for (; i < remaining.size(); ++i) {
      const EvacRequest& r = remaining[i];
      if (r.is_transfer()) {
        st.clock = std::max(st.clock, r.injury_time);
        st.pending = r;
        ++i;
        break;
      }
      auto tl = build_timeline(*s_, st.fleet, r, ExchangeAction::direct(), r.injury_time);
      if (!tl) throw InfeasibleRequest("point-of-injury request '" + r.id + "' is out of range");
      ServiceRecord rec{r, *tl, 0.0, 0.0, false, false};
      commit_timeline(st, *tl, rng, rec);
      const double t = (tl->delivery_time - r.injury_time) * 60.0;
      intermediate.push_back({t, r.patients});
      last_delivery = std::max(last_delivery, tl->delivery_time);
      if (log) {
        rec.t_minutes = t;
        rec.reward = service_reward(r, t);
        log->push_back(std::move(rec));
      }
    }
    for (auto& a : st.fleet) a.prune(st.clock, cfg_.utilization_window);
    return i;
  }

  static void finish(SmdpState& st, TransitionOutcome& out, double start, double last_delivery) {
    out.terminal = !st.pending.has_value();
    if (out.terminal) {
      st.clock = std::max(st.clock, last_delivery);
      out.sojourn = std::max(0.0, last_delivery - start);
    } else {
      out.sojourn = st.clock - start;
    }
  }

  const Scenario* s_;
  ModelConfig cfg_;
};

/// Sum of rewards discounted by elapsed hours from the root epoch.
struct TimedReward {
  double reward = 0.0;
  double elapsed = 0.0;  ///< hours
};

inline double discounted_return(std::span<const TimedReward> rewards, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ContractViolation("discounted_return: gamma must lie in (0, 1]");
  double g = 0.0;
  for (const auto& r : rewards) g += std::pow(gamma, r.elapsed) * r.reward;
  return g;
}

}  // namespace medevac
