#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "medevac/errors.hpp"
#include "medevac/harness.hpp"

namespace medevac {

enum class ClockMode { Stepped, Scaled, Realtime };

inline std::string_view to_string(ClockMode m) {
  switch (m) {
    case ClockMode::Stepped: return "stepped";
    case ClockMode::Scaled: return "scaled";
    case ClockMode::Realtime: return "realtime";
  }
  return "?";
}

struct ServiceConfig {
  ClockMode clock = ClockMode::Stepped;
  double time_scale = 1.0;  ///< simulated seconds per wall second in scaled mode
  std::string epoch = "2023-10-15T08:00:00Z";
  std::string event_log;  ///< empty: in-memory only
  std::string host = "127.0.0.1";
  int port = 8080;
  Policy policy = Policy::OptimalA1;
};

/// Everything a CLI run needs, resolved from defaults, a config file and overrides.
struct AppConfig {
  std::string scenario = "scenarios/default_hawaii.json";  ///< relative paths resolve against the data dir
  std::uint64_t seed = 0;
  ExperimentConfig experiment;
  ServiceConfig service;
};

namespace detail {

inline ClockMode parse_clock(const std::string& s) {
  if (s == "stepped") return ClockMode::Stepped;
  if (s == "scaled") return ClockMode::Scaled;
  if (s == "realtime") return ClockMode::Realtime;
  throw ValidationError("service.clock", "unknown clock mode '" + s + "'");
}

inline RewardMode parse_reward_mode(const std::string& s) {
  if (s == "Optimal") return RewardMode::Optimal;
  if (s == "Greedy") return RewardMode::Greedy;
  throw ValidationError("model.reward_mode", "unknown reward mode '" + s + "'");
}

/// Reads known keys from `obj`, rejecting unknown ones so typos surface.
class Reader {
 public:
  Reader(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ParseError(path_, "expected an object");
  }
  template <class T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ParseError(path_ + "/" + key, "wrong type");
    }
  }
  bool has(const char* key) {
    seen_.push_back(key);
    return obj_.contains(key);
  }
  const nlohmann::json& at(const char* key) const { return obj_.at(key); }
  std::string path(const char* key) const { return path_ + "/" + key; }
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
        throw ParseError(path_ + "/" + it.key(), "unknown configuration key");
  }

 private:
  const nlohmann::json& obj_;
  std::string path_;
  std::vector<std::string> seen_;
};

}  // namespace detail

inline nlohmann::json to_json(const AppConfig& c) {
  const auto& e = c.experiment;
  nlohmann::json policies = nlohmann::json::array();
  for (auto p : e.policies) policies.push_back(to_string(p));
  return {
      {"scenario", c.scenario},
      {"seed", c.seed},
      {"experiment",
       {{"magnitudes", e.magnitudes},
        {"platoon_ratios", e.platoon_ratios},
        {"transfer_proportions", e.transfer_proportions},
        {"airspeeds", e.airspeeds},
        {"patients_per_request", e.patients_per_request},
        {"policies", policies},
        {"replications", e.replications},
        {"episode_duration", e.episode_duration},
        {"workers", e.workers}}},
      {"search",
       {{"thread_count", e.search.thread_count},
        {"thread_duration", e.search.thread_duration},
        {"discount", e.search.discount},
        {"exploration_c", e.search.exploration_c},
        {"iterations_per_tree", e.search.iterations_per_tree}}},
      {"model",
       {{"reward_mode", e.model.reward_mode == RewardMode::Optimal ? "Optimal" : "Greedy"},
        {"tau1", e.model.penalty.tau1},
        {"tau2", e.model.penalty.tau2},
        {"transfer_patient_multiplier", e.model.transfer_patient_multiplier},
        {"fault_rate", e.model.maintenance.fault_rate},
        {"replacement_delay", e.model.maintenance.replacement_delay},
        {"utilization_window", e.model.utilization_window},
        {"aircraft_per_platoon", e.model.aircraft_per_platoon}}},
      {"service",
       {{"clock", to_string(c.service.clock)},
        {"time_scale", c.service.time_scale},
        {"epoch", c.service.epoch},
        {"event_log", c.service.event_log},
        {"host", c.service.host},
        {"port", c.service.port},
        {"policy", to_string(c.service.policy)}}},
  };
}

inline AppConfig app_config_from_json(const nlohmann::json& doc) {
  using detail::Reader;
  AppConfig c;
  Reader top(doc, "");
  top.get("scenario", c.scenario);
  top.get("seed", c.seed);
  auto& e = c.experiment;
  if (top.has("experiment")) {
    Reader r(top.at("experiment"), "/experiment");
    r.get("magnitudes", e.magnitudes);
    r.get("platoon_ratios", e.platoon_ratios);
    r.get("transfer_proportions", e.transfer_proportions);
    r.get("airspeeds", e.airspeeds);
    r.get("patients_per_request", e.patients_per_request);
    std::vector<std::string> policies;
    r.get("policies", policies);
    if (!policies.empty()) {
      e.policies.clear();
      for (const auto& p : policies) e.policies.push_back(parse_policy(p));
    }
    r.get("replications", e.replications);
    r.get("episode_duration", e.episode_duration);
    r.get("workers", e.workers);
    r.finish();
  }
  if (top.has("search")) {
    Reader r(top.at("search"), "/search");
    r.get("thread_count", e.search.thread_count);
    r.get("thread_duration", e.search.thread_duration);
    r.get("discount", e.search.discount);
    r.get("exploration_c", e.search.exploration_c);
    r.get("iterations_per_tree", e.search.iterations_per_tree);
    r.finish();
  }
  if (top.has("model")) {
    Reader r(top.at("model"), "/model");
    std::string mode = "Optimal";
    r.get("reward_mode", mode);
    e.model.reward_mode = detail::parse_reward_mode(mode);
    r.get("tau1", e.model.penalty.tau1);
    r.get("tau2", e.model.penalty.tau2);
    r.get("transfer_patient_multiplier", e.model.transfer_patient_multiplier);
    r.get("fault_rate", e.model.maintenance.fault_rate);
    r.get("replacement_delay", e.model.maintenance.replacement_delay);
    r.get("utilization_window", e.model.utilization_window);
    r.get("aircraft_per_platoon", e.model.aircraft_per_platoon);
    r.finish();
  }
  if (top.has("service")) {
    Reader r(top.at("service"), "/service");
    std::string clock = "stepped";
    r.get("clock", clock);
    c.service.clock = detail::parse_clock(clock);
    r.get("time_scale", c.service.time_scale);
    r.get("epoch", c.service.epoch);
    r.get("event_log", c.service.event_log);
    r.get("host", c.service.host);
    r.get("port", c.service.port);
    std::string policy{to_string(c.service.policy)};
    r.get("policy", policy);
    c.service.policy = parse_policy(policy);
    r.finish();
  }
  top.finish();

  e.master_seed = c.seed;
  e.search.seed = c.seed;
  e.validate();
  if (e.model.penalty.tau1 < 0 || e.model.penalty.tau2 < 0)
    throw ValidationError("model.tau", "penalty weights must be >= 0");
  if (e.model.aircraft_per_platoon < 1)
    throw ValidationError("model.aircraft_per_platoon", "aircraft_per_platoon must be >= 1");
  if (!(c.service.time_scale > 0)) throw ValidationError("service.time_scale", "time_scale must be > 0");
  return c;
}

/// Applies `key=value` with a dotted key. The value is parsed as JSON when
/// possible, otherwise taken as a string.
inline void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ParseError(std::string(assignment), "override must have the form key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  nlohmann::json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ParseError(key, "empty segment in override key");
    if (!node->is_object()) throw ParseError(key, "override path crosses a non-object value");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  auto j = nlohmann::json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw ParseError(path, "invalid JSON");
  return j;
}

/// Default data directory, overridable through MEDEVAC_DATA_DIR in the environment.
inline std::filesystem::path data_dir() {
  if (const char* env = std::getenv("MEDEVAC_DATA_DIR"); env && *env) return env;
#ifdef MEDEVAC_DATA_DIR
  return MEDEVAC_DATA_DIR;
#else
  return "data";
#endif
}

/// Resolves a data path: as given if it exists, else under the data dir.
inline std::string resolve_data_path(const std::string& p) {
  namespace fs = std::filesystem;
  if (p.empty() || fs::exists(p)) return p;
  const fs::path candidate = data_dir() / p;
  return fs::exists(candidate) ? candidate.string() : p;
}

}  // namespace medevac
