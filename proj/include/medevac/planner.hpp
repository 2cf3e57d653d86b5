#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "medevac/actions.hpp"
#include "medevac/casualty_gen.hpp"
#include "medevac/kinematics.hpp"
#include "medevac/mcts.hpp"
#include "medevac/smdp.hpp"

namespace medevac {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is
/// processed exactly once; results must be written to index-owned slots.
/// The first exception thrown is rethrown after all workers join.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned workers = 0) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Feasible action with the smallest response time estimated from geometry
/// alone (both aircraft assumed idle). Ties go to catalog order.
inline ExchangeAction greedy_policy(const SmdpModel& model, const SmdpState& state, ActionSpace space) {
  if (!state.pending) throw ContractViolation("greedy_policy: state has no pending transfer");
  const Scenario& s = model.scenario();
  struct Candidate {
    double t;
    ExchangeAction a;
  };
  std::vector<Candidate> cands;
  for (auto a : action_catalog(s, space))
    if (auto tl = estimate_timeline(s, *state.pending, a, state.clock)) cands.push_back({response_time(*tl), a});
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) { return x.t < y.t; });
  for (const auto& c : cands)
    if (build_timeline(s, state.fleet, *state.pending, c.a, state.clock)) return c.a;
  throw InfeasibleRequest("request '" + state.pending->id + "' has no feasible exchange action");
}

/// Adapts the SMDP to the search: the state carries a cursor into the
/// casualty thread the tree is aligned to.
class ThreadSearchModel {
 public:
  using Action = ExchangeAction;
  struct State {
    SmdpState smdp;
    std::size_t position = 0;
  };
  struct Transition {
    State next;
    double reward = 0.0;
    double sojourn = 0.0;
    bool terminal = false;
  };

  ThreadSearchModel(const SmdpModel& model, std::span<const EvacRequest> thread, ActionSpace space)
      : model_(model), thread_(thread), space_(space) {}

  std::vector<Action> actions(const State& s) const {
    if (!s.smdp.pending) return {};
    return model_.legal_actions(s.smdp, space_);
  }
  Action rollout_action(const State& s) const { return greedy_policy(model_, s.smdp, space_); }
  Transition step(const State& s, Action a, CounterRng& rng) const {
    auto out = model_.step(s.smdp, a, thread_.subspan(s.position), rng);
    return {{std::move(out.next_state), s.position + out.consumed}, out.reward, out.sojourn, out.terminal};
  }

 private:
  const SmdpModel& model_;
  std::span<const EvacRequest> thread_;
  ActionSpace space_;
};

struct ActionScore {
  ExchangeAction action;
  double score = 0.0;  ///< root value_sum summed over trees
  long visits = 0;
  std::optional<double> predicted_response_time;  ///< hours, from the live state
};

struct TreeDiagnostics {
  std::uint64_t seed = 0;
  std::size_t thread_requests = 0;
  std::size_t node_count = 0;
  std::vector<RootStat<ExchangeAction>> root;
};

struct PlanResult {
  ExchangeAction chosen;
  std::vector<ActionScore> per_action_scores;  ///< catalog order
  DispatchSchedule schedule;
  MissionTimeline timeline;
  double predicted_response_time = 0.0;  ///< hours
  std::vector<TreeDiagnostics> trees;
};

/// Index of the best score; ties go to the lower predicted response time,
/// then to the earlier catalog entry.
inline std::size_t select_action(std::span<const ActionScore> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const auto& a = scores[i];
    const auto& b = scores[best];
    if (a.score != b.score) {
      if (a.score > b.score) best = i;
      continue;
    }
    const double ta = a.predicted_response_time.value_or(std::numeric_limits<double>::infinity());
    const double tb = b.predicted_response_time.value_or(std::numeric_limits<double>::infinity());
    if (ta < tb) best = i;
  }
  return best;
}

/// Root-parallel MCTS: one tree per sampled casualty thread, root scores
/// summed across trees. Deterministic in (root, gen, cfg) regardless of
/// `workers`.
inline PlanResult plan(const SmdpModel& model, const SmdpState& root, const CasualtyGenConfig& gen,
                       const SearchConfig& cfg, ActionSpace space, unsigned workers = 0) {
  cfg.validate();
  if (!root.pending) throw ContractViolation("plan: root state has no pending transfer");
  const Scenario& s = model.scenario();
  const std::vector<ExchangeAction> actions = model.legal_actions(root, space);
  const OriginPools pools(s);

  std::vector<TreeDiagnostics> trees(static_cast<std::size_t>(cfg.thread_count));
  parallel_for(
      trees.size(),
      [&](std::size_t k) {
        const std::uint64_t tree_seed = derive_seed(cfg.seed, k);
        CasualtyGenConfig g = gen;
        g.horizon = cfg.thread_duration;
        g.seed = derive_seed(tree_seed, 0);
        const auto thread = sample_thread(s, g, root.clock, pools);
        ThreadSearchModel search(model, thread, space);
        auto res = search_tree(search, ThreadSearchModel::State{root, 0}, cfg.iterations_per_tree, cfg.discount,
                               cfg.exploration_c, derive_seed(tree_seed, 1));
        trees[k] = {tree_seed, thread.size(), res.node_count, std::move(res.root)};
      },
      workers);

  PlanResult out;
  for (auto a : actions) {
    ActionScore sc{a, 0.0, 0, std::nullopt};
    if (auto tl = build_timeline(s, root.fleet, *root.pending, a, root.clock)) sc.predicted_response_time = response_time(*tl);
    for (const auto& t : trees)
      for (const auto& r : t.root)
        if (r.action == a) {
          sc.score += r.value_sum;
          sc.visits += r.visits;
        }
    out.per_action_scores.push_back(sc);
  }
  out.chosen = out.per_action_scores[select_action(out.per_action_scores)].action;
  auto tl = build_timeline(s, root.fleet, *root.pending, out.chosen, root.clock);
  out.timeline = *tl;
  out.schedule = dispatch_schedule(*tl);
  out.predicted_response_time = response_time(*tl);
  out.trees = std::move(trees);
  return out;
}

inline nlohmann::json to_json(const DispatchSchedule& d) {
  nlohmann::json j{{"forward_dispatch", d.forward_dispatch}, {"predicted_handoff_gap", d.predicted_handoff_gap}};
  j["rear_dispatch"] = d.rear_dispatch ? nlohmann::json(*d.rear_dispatch) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const Scenario& s, const MissionTimeline& m) {
  nlohmann::json j{{"action", action_label(s, m.action)},
                   {"legs_forward", m.legs_forward},
                   {"legs_rear", m.legs_rear},
                   {"injury_time", m.injury_time},
                   {"forward_dispatch", m.forward_dispatch},
                   {"handoff_time", m.handoff_time},
                   {"rear_arrival", m.rear_arrival},
                   {"delivery_time", m.delivery_time},
                   {"exchange_position", {{"x", m.exchange_position.x}, {"y", m.exchange_position.y}}},
                   {"response_time", response_time(m)}};
  j["rear_dispatch"] = m.rear_dispatch ? nlohmann::json(*m.rear_dispatch) : nlohmann::json(nullptr);
  const auto e = employment_times(m);
  j["employment"] = {{"forward", e.forward}, {"rear", e.rear}};
  return j;
}

inline nlohmann::json to_json(const Scenario& s, const PlanResult& p) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& sc : p.per_action_scores) {
    nlohmann::json row{{"action", action_label(s, sc.action)}, {"score", sc.score}, {"visits", sc.visits}};
    row["predicted_response_time"] =
        sc.predicted_response_time ? nlohmann::json(*sc.predicted_response_time) : nlohmann::json(nullptr);
    scores.push_back(std::move(row));
  }
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : p.trees) {
    nlohmann::json root = nlohmann::json::array();
    for (const auto& r : t.root)
      root.push_back({{"action", action_label(s, r.action)}, {"visits", r.visits}, {"value_sum", r.value_sum},
                      {"mean", r.mean()}});
    trees.push_back({{"seed", t.seed}, {"thread_requests", t.thread_requests}, {"nodes", t.node_count}, {"root", root}});
  }
  return {{"chosen", action_label(s, p.chosen)},
          {"per_action_scores", scores},
          {"schedule", to_json(p.schedule)},
          {"timeline", to_json(s, p.timeline)},
          {"predicted_response_time", p.predicted_response_time},
          {"trees", trees}};
}

}  // namespace medevac
