#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "medevac/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "medevac");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = medevac::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::set<std::string> flags_in(const std::string& text) {
  std::set<std::string> out;
  const std::regex flag(R"((^|[^A-Za-z0-9-])(--[a-z][a-z-]*))");
  for (std::sregex_iterator it(text.begin(), text.end(), flag), end; it != end; ++it) out.insert((*it)[2]);
  out.erase("--help");
  return out;
}

/// Flags documented in the README's "Command-line interface" section.
std::set<std::string> readme_flags() {
  const std::string readme = slurp(fs::path(MEDEVAC_SOURCE_DIR) / "README.md");
  const auto start = readme.find("## Command-line interface");
  if (start == std::string::npos) return {};
  const auto end = readme.find("\n## ", start + 1);
  return flags_in(readme.substr(start, end == std::string::npos ? std::string::npos : end - start));
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("medevac_cli_" + name);
  fs::remove_all(p);
  return p;
}

const std::vector<std::string> kSmallSweep{"--config",
                                           "configs/table1_magnitude.json",
                                           "--seed",
                                           "7",
                                           "--set",
                                           "experiment.replications=2",
                                           "--set",
                                           "search.iterations_per_tree=30",
                                           "--set",
                                           "search.thread_count=2"};

}  // namespace

TEST(Cli, HelpListsEveryFlagAndMatchesReadme) {
  const auto r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  const auto help = flags_in(r.out);
  for (const char* f : {"--config", "--seed", "--out", "--set", "--policy", "--scenario", "--replay"})
    EXPECT_TRUE(help.count(f)) << f;
  for (const char* sub : {"simulate", "sweep", "plan", "serve", "emit-plots"}) EXPECT_NE(r.out.find(sub), std::string::npos);
  EXPECT_EQ(readme_flags(), help) << "README flag table and --help disagree";
}

TEST(Cli, SweepIsByteIdenticalAcrossRuns) {
  const auto dir = scratch("sweep");
  auto args = kSmallSweep;
  args.insert(args.begin(), "sweep");
  auto a_args = args, b_args = args;
  a_args.insert(a_args.end(), {"--out", (dir / "a.csv").string()});
  b_args.insert(b_args.end(), {"--out", (dir / "b.csv").string()});
  const auto a = cli(a_args);
  const auto b = cli(b_args);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const auto ca = slurp(dir / "a.csv");
  EXPECT_EQ(ca, slurp(dir / "b.csv"));
  EXPECT_EQ(std::count(ca.begin(), ca.end(), '\n'), 10);  // header + 3 magnitudes x 3 policies
  EXPECT_EQ(a.err.rfind("# medevac sweep seed=7 scenario=", 0), 0u);
  EXPECT_NE(a.err.find("\n# config {"), std::string::npos);

  auto json_args = args;
  json_args.insert(json_args.end(), {"--out", (dir / "a.json").string()});
  ASSERT_EQ(cli(json_args).code, 0);
  EXPECT_EQ(json::parse(slurp(dir / "a.json")).size(), 9u);

  const auto plots = cli({"emit-plots", (dir / "a.csv").string()});
  ASSERT_EQ(plots.code, 0) << plots.err;
  EXPECT_EQ(plots.out.rfind("figure,parameter,value,policy,metric,mean,ci95\n", 0), 0u);
  EXPECT_NE(plots.out.find("fig4,magnitude,1.30,OptimalA1,total_reward,"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, PlanFixture) {
  const auto r = cli({"plan", "fixtures/deployment_plan.json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j.at("chosen"), "watercraft:LSV");
  EXPECT_NE(r.err.find("# chosen watercraft:LSV"), std::string::npos);
}

TEST(Cli, SimulateZeroMagnitude) {
  const auto r = cli({"simulate", "--set", "experiment.magnitudes=[0]", "--policy", "Greedy"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j.at("requests"), 0);
  EXPECT_TRUE(j.at("mean_response_min").is_null());
}

TEST(Cli, SimulateWritesTraceAndMetrics) {
  const auto dir = scratch("simulate");
  const auto r = cli({"simulate", "--policy", "Greedy", "--seed", "3", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto metrics = json::parse(slurp(dir / "metrics.json"));
  EXPECT_EQ(metrics.at("policy"), "Greedy");
  EXPECT_EQ(metrics.at("seed"), 3);
  std::ifstream trace(dir / "trace.jsonl");
  int lines = 0;
  for (std::string line; std::getline(trace, line); ++lines) EXPECT_TRUE(json::accept(line)) << line;
  EXPECT_GT(lines, 0);
  fs::remove_all(dir);
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(cli({"sweep", "--config", "does/not/exist.json"}).code, 2);
  EXPECT_EQ(cli({"sweep", "--set", "experiment.bogus=1"}).code, 2);
  EXPECT_EQ(cli({"sweep", "--set", "experiment.replications=0"}).code, 2);
  EXPECT_EQ(cli({"simulate", "--scenario", "no_such_scenario.json"}).code, 2);
  EXPECT_EQ(cli({"simulate", "--policy", "Random"}).code, 2);
  EXPECT_EQ(cli({"sweep", "--frobnicate"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"plan", "missing_input.json"}).code, 2);
  const auto r = cli({"sweep", "--set", "noequals"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("config error"), std::string::npos);
}
