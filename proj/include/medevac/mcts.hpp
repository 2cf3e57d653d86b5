#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <vector>

#include "medevac/errors.hpp"
#include "medevac/rng.hpp"

namespace medevac {

struct SearchConfig {
  int thread_count = 10;
  double thread_duration = 10.0;  ///< hours
  double discount = 0.9;          ///< per elapsed hour
  double exploration_c = 1.0;
  int iterations_per_tree = 2000;
  std::uint64_t seed = 0;

  void validate() const {
    if (thread_count < 1) throw ValidationError("search-thread-count", "thread_count must be >= 1");
    if (!(thread_duration > 0.0)) throw ValidationError("search-thread-duration", "thread_duration must be > 0");
    if (!(discount > 0.0 && discount <= 1.0)) throw ValidationError("search-discount", "discount must lie in (0, 1]");
    if (exploration_c < 0.0) throw ValidationError("search-exploration", "exploration_c must be >= 0");
    if (iterations_per_tree < 1) throw ValidationError("search-iterations", "iterations_per_tree must be >= 1");
  }
};

/// Mean value plus exploration bonus; unvisited nodes are forced first.
inline double uct_score(double mean, long visits, long parent_visits, double c) {
  if (visits <= 0) return std::numeric_limits<double>::infinity();
  if (parent_visits < 1) throw ContractViolation("uct_score: parent_visits must be >= 1");
  return mean + c * std::sqrt(std::log(static_cast<double>(parent_visits)) / static_cast<double>(visits));
}

/// Generative model driven by the search. `step` returns the reward credited
/// at the current state's epoch and the hours that elapse until the next one.
template <class M>
concept SearchModel = requires(const M& m, const typename M::State& s, typename M::Action a, CounterRng& rng) {
  { m.actions(s) } -> std::convertible_to<std::vector<typename M::Action>>;
  { m.rollout_action(s) } -> std::convertible_to<typename M::Action>;
  { m.step(s, a, rng) } -> std::same_as<typename M::Transition>;
  requires requires(const typename M::Transition& t) {
    { t.next } -> std::convertible_to<typename M::State>;
    { t.reward } -> std::convertible_to<double>;
    { t.sojourn } -> std::convertible_to<double>;
    { t.terminal } -> std::convertible_to<bool>;
  };
};

template <class Action>
struct TreeNode {
  Action action_in{};
  int parent = -1;
  std::vector<int> children;
  long visits = 0;
  double value_sum = 0.0;
  double elapsed_from_root = 0.0;  ///< hours, as of the last traversal

  double mean() const { return visits > 0 ? value_sum / static_cast<double>(visits) : 0.0; }
};

template <class Action>
struct RootStat {
  Action action{};
  long visits = 0;
  double value_sum = 0.0;

  double mean() const { return visits > 0 ? value_sum / static_cast<double>(visits) : 0.0; }
};

template <class Action>
struct TreeResult {
  std::vector<RootStat<Action>> root;  ///< in the order the root actions were enumerated
  long iterations = 0;
  std::size_t node_count = 0;
};

/// Open-loop UCT. Nodes are action sequences from the root; each iteration
/// replays its path under its own rng stream, so stochastic outcomes are
/// resampled rather than stored. Iteration i draws from
/// derive_seed(seed, i), which makes a shorter run a prefix of a longer one.
template <SearchModel M>
TreeResult<typename M::Action> search_tree(const M& model, const typename M::State& root_state, int iterations,
                                           double discount, double c, std::uint64_t seed) {
  using Action = typename M::Action;
  using Node = TreeNode<Action>;
  const std::vector<Action> root_actions = model.actions(root_state);
  if (root_actions.empty()) throw ContractViolation("search_tree: root has no actions");
  if (iterations < static_cast<int>(root_actions.size()))
    throw ContractViolation("search_tree: iteration budget is below the number of root actions");

  std::vector<Node> nodes(1);
  auto child_for = [&](int node, const Action& a) -> int {
    for (int ch : nodes[node].children)
      if (nodes[ch].action_in == a) return ch;
    return -1;
  };

  std::vector<int> path;
  for (int it = 0; it < iterations; ++it) {
    CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(it)));
    typename M::State state = root_state;
    double elapsed = 0.0;
    double ret = 0.0;
    bool terminal = false;
    int node = 0;
    path.assign(1, 0);

    // Selection and expansion.
    while (!terminal) {
      const std::vector<Action> acts = node == 0 ? root_actions : model.actions(state);
      if (acts.empty()) break;
      int chosen = -1;
      Action chosen_action{};
      double best = -std::numeric_limits<double>::infinity();
      bool expand = false;
      for (const auto& a : acts) {
        const int ch = child_for(node, a);
        const double score = ch < 0 ? std::numeric_limits<double>::infinity()
                                    : uct_score(nodes[ch].mean(), nodes[ch].visits, nodes[node].visits, c);
        if (score > best) {
          best = score;
          chosen = ch;
          chosen_action = a;
          expand = ch < 0;
        }
      }
      if (expand) {
        chosen = static_cast<int>(nodes.size());
        Node n;
        n.action_in = chosen_action;
        n.parent = node;
        nodes.push_back(std::move(n));
        nodes[node].children.push_back(chosen);
      }
      auto tr = model.step(state, chosen_action, rng);
      ret += std::pow(discount, elapsed) * tr.reward;
      elapsed += tr.sojourn;
      terminal = tr.terminal;
      state = std::move(tr.next);
      node = chosen;
      nodes[node].elapsed_from_root = elapsed;
      path.push_back(node);
      if (expand) break;
    }

    // Rollout with the default policy to the end of the thread.
    while (!terminal) {
      auto tr = model.step(state, model.rollout_action(state), rng);
      ret += std::pow(discount, elapsed) * tr.reward;
      elapsed += tr.sojourn;
      terminal = tr.terminal;
      state = std::move(tr.next);
    }

    for (int n : path) {
      nodes[n].visits += 1;
      nodes[n].value_sum += ret;
    }
  }

  TreeResult<Action> result;
  result.iterations = iterations;
  result.node_count = nodes.size();
  for (const auto& a : root_actions) {
    RootStat<Action> stat{a, 0, 0.0};
    if (const int ch = child_for(0, a); ch >= 0) {
      stat.visits = nodes[ch].visits;
      stat.value_sum = nodes[ch].value_sum;
    }
    result.root.push_back(stat);
  }
  return result;
}

}  // namespace medevac
