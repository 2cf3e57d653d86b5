#pragma once

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "medevac/config.hpp"
#include "medevac/harness.hpp"
#include "medevac/http_service.hpp"
#include "medevac/service.hpp"

namespace medevac::cli {

/// Raised for bad flags or configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
  std::string policy;
  std::string scenario;
  // subcommand arguments
  std::string plan_input;
  std::string replay_log;
  std::string plots_input;
};

struct Resolved {
  AppConfig config;
  Scenario scenario;
  std::string scenario_path;
};

/// Defaults < config file < --set overrides < dedicated flags.
inline Resolved resolve(const Options& o) {
  nlohmann::json doc = nlohmann::json::object();
  std::filesystem::path config_dir;
  try {
    if (!o.config.empty()) {
      const std::string path = resolve_data_path(o.config);
      doc = read_json_file(path);
      if (!doc.is_object()) throw ParseError(path, "config must be a JSON object");
      config_dir = std::filesystem::path(path).parent_path();
    }
    for (const auto& s : o.overrides) apply_override(doc, s);
    if (o.seed) doc["seed"] = *o.seed;
    if (!o.scenario.empty()) doc["scenario"] = o.scenario;
    if (!o.policy.empty()) {
      const std::string p{to_string(parse_policy(o.policy))};
      doc["experiment"]["policies"] = {p};
      doc["service"]["policy"] = p;
    }
    Resolved r;
    r.config = app_config_from_json(doc);
    std::string sp = r.config.scenario;
    if (!config_dir.empty() && !std::filesystem::exists(sp) && std::filesystem::exists(config_dir / sp))
      sp = (config_dir / sp).string();
    r.scenario_path = resolve_data_path(sp);
    r.scenario = load_scenario_file(r.scenario_path);
    return r;
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

/// Reproducibility header: the resolved configuration and seed, as comments.
inline void print_header(std::ostream& err, std::string_view command, const Resolved& r) {
  err << "# medevac " << command << " seed=" << r.config.seed << " scenario=" << r.scenario_path << '\n';
  err << "# config " << to_json(r.config).dump() << '\n';
}

inline std::ofstream open_out(const std::string& path) {
  if (auto dir = std::filesystem::path(path).parent_path(); !dir.empty()) std::filesystem::create_directories(dir);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  return f;
}

inline int cmd_simulate(const Options& o, std::ostream& out, std::ostream& err) {
  const Resolved r = resolve(o);
  print_header(err, "simulate", r);
  const auto& cfg = r.config.experiment;
  const Policy policy = o.policy.empty() ? Policy::OptimalA1 : parse_policy(o.policy);
  const ExperimentPoint point = cfg.grid().front();
  const auto res = run_episode(r.scenario, point, policy, derive_seed(cfg.master_seed, 0), cfg);
  const Scenario s = scenario_at(r.scenario, point);

  nlohmann::json metrics = to_json(res.metrics);
  metrics["policy"] = to_string(policy);
  metrics["seed"] = r.config.seed;
  nlohmann::json decisions = nlohmann::json::array();
  for (const auto& d : res.decisions)
    decisions.push_back({{"request", d.request_id}, {"clock", d.clock}, {"action", action_label(s, d.action)}});
  metrics["decisions"] = decisions;

  if (o.out.empty()) {
    for (const auto& e : episode_events(s, res.services)) out << e.dump() << '\n';
    out << metrics.dump(2) << '\n';
    return 0;
  }
  std::filesystem::create_directories(o.out);
  auto trace = open_out((std::filesystem::path(o.out) / "trace.jsonl").string());
  for (const auto& e : episode_events(s, res.services)) trace << e.dump() << '\n';
  open_out((std::filesystem::path(o.out) / "metrics.json").string()) << metrics.dump(2) << '\n';
  err << "# wrote " << o.out << "/trace.jsonl and metrics.json\n";
  return 0;
}

inline int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  const Resolved r = resolve(o);
  print_header(err, "sweep", r);
  const auto rows = run_sweep(r.scenario, r.config.experiment);
  const bool as_json = o.out.ends_with(".json");
  std::ostringstream body;
  if (as_json)
    body << to_json(std::span<const SweepRow>(rows)).dump(2) << '\n';
  else
    write_sweep_csv(body, rows);
  if (o.out.empty())
    out << body.str();
  else
    open_out(o.out) << body.str();
  int failed = 0;
  for (const auto& row : rows)
    if (row.error) {
      ++failed;
      err << "# row " << to_string(row.policy) << " failed: " << *row.error << '\n';
    }
  return failed ? 1 : 0;
}

/// State-plus-request document: {scenario?, clock?, fleet?, request, exchange?}.
inline int cmd_plan(const Options& o, std::ostream& out, std::ostream& err) {
  nlohmann::json input;
  std::string input_path;
  try {
    input_path = resolve_data_path(o.plan_input);
    input = read_json_file(input_path);
    if (!input.is_object()) throw ParseError(input_path, "plan input must be a JSON object");
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  Options oo = o;
  if (oo.scenario.empty() && input.contains("scenario")) {
    std::string sp = input.at("scenario").get<std::string>();
    const auto rel = std::filesystem::path(input_path).parent_path() / sp;
    oo.scenario = std::filesystem::exists(rel) ? rel.string() : sp;
  }
  const Resolved r = resolve(oo);
  print_header(err, "plan", r);
  const auto& cfg = r.config.experiment;
  const SmdpModel model(r.scenario, cfg.model);
  SmdpState root = model.initial_state(input.value("clock", 0.0));
  PlanResult result;
  try {
    if (input.contains("fleet")) {
      root.fleet.clear();
      for (const auto& a : input.at("fleet")) {
        AircraftState st;
        const std::string p = a.at("platoon").get<std::string>();
        if (p != "FSMP" && p != "ASMP") throw ParseError("/fleet/platoon", "expected FSMP or ASMP");
        st.platoon = p == "FSMP" ? Platoon::FSMP : Platoon::ASMP;
        for (const auto& c : a.value("schedule", nlohmann::json::array()))
          st.commit(c.at("start").get<double>(), c.at("end").get<double>());
        st.busy_until = std::max(st.busy_until, a.value("busy_until", 0.0));
        st.cumulative_flight_hours = a.value("cumulative_flight_hours", 0.0);
        root.fleet.push_back(std::move(st));
      }
    }
    root.pending = request_from_json(r.scenario, input.at("request"), "/request");
    std::optional<ExchangeAction> pinned;
    if (input.contains("exchange")) pinned = parse_action_label(r.scenario, input.at("exchange").get<std::string>());
    const Policy policy = o.policy.empty() ? r.config.service.policy : parse_policy(o.policy);
    SearchConfig sc = cfg.search;
    sc.seed = r.config.seed;
    result = plan_with_policy(model, root, cfg.grid().front(), sc, policy, pinned, cfg.workers);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("plan input: ") + e.what());
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  const auto j = to_json(r.scenario, result);
  if (o.out.empty())
    out << j.dump(2) << '\n';
  else
    open_out(o.out) << j.dump(2) << '\n';
  err << "# chosen " << j.at("chosen").get<std::string>() << ", forward dispatch " << result.schedule.forward_dispatch
      << " h, rear dispatch "
      << (result.schedule.rear_dispatch ? detail::fmt(*result.schedule.rear_dispatch, 4) + " h" : std::string("none"))
      << ", predicted T " << detail::fmt(result.predicted_response_time * 60.0, 1) << " min\n";
  return 0;
}

namespace detail {
inline std::atomic<bool> g_interrupted{false};
inline void on_signal(int) { g_interrupted = true; }
}  // namespace detail

inline int cmd_serve(const Options& o, std::ostream&, std::ostream& err) {
  const Resolved r = resolve(o);
  print_header(err, "serve", r);
  ServiceOptions so = ServiceOptions::from(r.config);
  std::unique_ptr<DispatchService> svc;
  if (!o.replay_log.empty()) {
    std::ifstream in(o.replay_log);
    if (!in) throw ConfigError("cannot open replay log '" + o.replay_log + "'");
    svc = DispatchService::replay(r.scenario, so, in);
  } else {
    svc = std::make_unique<DispatchService>(r.scenario, so);
  }
  HttpApi api(*svc);
  detail::g_interrupted = false;
  std::signal(SIGINT, detail::on_signal);
  std::signal(SIGTERM, detail::on_signal);
  std::thread watcher([&] {
    while (!detail::g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    api.stop();
  });
  err << "# listening on http://" << r.config.service.host << ':' << r.config.service.port << '\n';
  const bool ok = api.listen(r.config.service.host, r.config.service.port);
  const bool interrupted = detail::g_interrupted;
  detail::g_interrupted = true;
  watcher.join();
  if (!ok && !interrupted) err << "error: cannot listen on " << r.config.service.host << ':' << r.config.service.port << '\n';
  return ok || interrupted ? 0 : 1;
}

/// Long-format plot data: one line per (parameter value, policy, metric).
inline int cmd_emit_plots(const Options& o, std::ostream& out, std::ostream& err) {
  std::ifstream in(o.plots_input);
  if (!in) throw ConfigError("cannot open sweep CSV '" + o.plots_input + "'");
  std::string line;
  std::getline(in, line);
  if (line != kSweepCsvHeader) throw ConfigError("'" + o.plots_input + "' is not a sweep CSV (header mismatch)");
  auto split = [](const std::string& s) {
    std::vector<std::string> v;
    std::stringstream ss(s);
    for (std::string cell; std::getline(ss, cell, ',');) v.push_back(cell);
    if (!s.empty() && s.back() == ',') v.emplace_back();
    return v;
  };
  const auto header = split(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(split(line));

  const std::vector<std::string> params{"magnitude", "platoon_ratio", "transfer_proportion", "airspeed",
                                        "patients_per_request"};
  auto col = [&](const std::string& name) {
    return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
  };
  std::vector<std::string> varying;
  for (const auto& p : params) {
    std::set<std::string> values;
    for (const auto& r : rows) values.insert(r.at(col(p)));
    if (values.size() > 1) varying.push_back(p);
  }
  if (varying.empty()) varying.push_back("magnitude");

  struct Metric {
    const char* figure;
    const char* column;
  };
  const std::vector<Metric> metrics{{"fig4", "total_reward"},          {"fig5", "fsmp_response_min"},
                                    {"fig5", "asmp_response_min"},     {"fig5", "mean_response_min"},
                                    {"fig5", "response_disparity_min"}, {"fig5", "watercraft_ratio"}};
  std::ostringstream body;
  body << "figure,parameter,value,policy,metric,mean,ci95\n";
  for (const auto& p : varying)
    for (const auto& m : metrics)
      for (const auto& r : rows) {
        const std::size_t c = col(m.column);
        body << m.figure << ',' << p << ',' << r.at(col(p)) << ',' << r.at(col("policy")) << ',' << m.column << ','
             << r.at(c) << ',' << r.at(c + 1) << '\n';
      }
  if (o.out.empty())
    out << body.str();
  else
    open_out(o.out) << body.str();
  err << "# emitted " << rows.size() << " sweep rows over " << varying.size() << " parameter panel(s)\n";
  return 0;
}

/// Entry point. Exit codes: 0 success, 1 runtime failure, 2 configuration error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Evacuation exchange-point planner: simulation, sweeps, planning and the dispatch service.", "medevac"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  std::uint64_t seed = 0;
  app.add_option("--config", o.config, "JSON config file (paths may be relative to the data directory)");
  auto* seed_opt = app.add_option("--seed", seed, "Master seed; overrides the config's seed");
  app.add_option("--out", o.out, "Output path (simulate: directory; sweep: .csv or .json; plan/emit-plots: file)");
  app.add_option("--set", o.overrides, "Dotted config override key=value (repeatable)")->allow_extra_args(false);
  app.add_option("--policy", o.policy, "Policy: Greedy, OptimalA1 or OptimalA2");
  app.add_option("--scenario", o.scenario, "Scenario JSON; overrides the config's scenario");

  auto* sim = app.add_subcommand("simulate", "Run one episode and write its trace and metrics");
  auto* sweep = app.add_subcommand("sweep", "Run the replicated parameter sweep to CSV or JSON");
  auto* plan_cmd = app.add_subcommand("plan", "Plan one request from a state+request JSON and print the result");
  plan_cmd->add_option("input", o.plan_input, "State+request JSON")->required();
  app.add_option("--replay", o.replay_log, "serve: rebuild state from a JSON-lines event log first");
  auto* serve = app.add_subcommand("serve", "Start the dispatch service (HTTP + server-sent events)");
  auto* plots = app.add_subcommand("emit-plots", "Convert a sweep CSV into long-format plot data");
  plots->add_option("input", o.plots_input, "Sweep CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }
  if (seed_opt->count()) o.seed = seed;

  try {
    if (sim->parsed()) return cmd_simulate(o, out, err);
    if (sweep->parsed()) return cmd_sweep(o, out, err);
    if (plan_cmd->parsed()) return cmd_plan(o, out, err);
    if (serve->parsed()) return cmd_serve(o, out, err);
    if (plots->parsed()) return cmd_emit_plots(o, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace medevac::cli
