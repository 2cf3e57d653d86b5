#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "medevac/harness.hpp"
#include "test_util.hpp"

using namespace medevac;
using namespace medevac::testing;

namespace {

const Scenario& hawaii() {
  static const Scenario s = load_scenario_file(data_path("scenarios/default_hawaii.json"));
  return s;
}

ExperimentConfig tiny(std::vector<Policy> policies) {
  ExperimentConfig cfg;
  cfg.policies = std::move(policies);
  cfg.replications = 2;
  cfg.search.thread_count = 2;
  cfg.search.iterations_per_tree = 20;
  cfg.master_seed = 31;
  return cfg;
}

std::string csv(std::span<const SweepRow> rows) {
  std::ostringstream os;
  write_sweep_csv(os, rows);
  return os.str();
}

}  // namespace

TEST(Stats, SummaryAndStudentT) {
  const std::vector<double> xs{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  const auto s = stats::summarize(xs);
  EXPECT_DOUBLE_EQ(s.mean, 5.0);
  EXPECT_NEAR(s.sd, std::sqrt(32.0 / 7.0), 1e-12);
  // t(0.975, 7) = 2.364624
  EXPECT_NEAR(s.ci95, 2.364624 * s.sd / std::sqrt(8.0), 1e-5);
  EXPECT_TRUE(std::isnan(stats::summarize(std::vector<double>{1.0}).ci95));
}

TEST(Stats, OneSidedTests) {
  const std::vector<double> a{5.1, 5.3, 4.9, 5.6, 5.2, 5.4}, b{4.0, 4.4, 4.1, 4.6, 4.2, 4.3};
  EXPECT_LT(stats::welch_greater(a, b).p, 0.001);
  EXPECT_GT(stats::welch_greater(b, a).p, 0.999);
  EXPECT_LT(stats::paired_greater(a, b).p, 0.001);
  EXPECT_NEAR(stats::welch_greater(a, a).p, 0.5, 1e-12);
}

TEST(Metrics, ZeroCasualtyEpisodeHasAbsentMetrics) {
  ExperimentPoint p;
  p.magnitude = 0.0;
  const auto ep = run_episode(hawaii(), p, Policy::OptimalA1, 4, ExperimentConfig{});
  EXPECT_EQ(ep.metrics.total_reward, 0.0);
  EXPECT_EQ(ep.metrics.requests, 0);
  EXPECT_FALSE(ep.metrics.mean_response);
  EXPECT_FALSE(ep.metrics.fsmp_response);
  EXPECT_FALSE(ep.metrics.asmp_response);
  EXPECT_FALSE(ep.metrics.watercraft_ratio);
  EXPECT_FALSE(ep.metrics.response_disparity);
  const auto j = to_json(ep.metrics);
  EXPECT_TRUE(j.at("mean_response_min").is_null());
}

TEST(Metrics, HandComputedTwoRequestEpisode) {
  const Scenario s = make_scenario({fac("fbase", FacilityRole::Role2, Island::Forward, 0, 0),
                                    fac("pickup", FacilityRole::Role2, Island::Forward, 30, 0),
                                    fac("rbase", FacilityRole::Role2, Island::Rear, 100, 0),
                                    fac("rpoi", FacilityRole::Role1, Island::Rear, 100, 40),
                                    fac("r3", FacilityRole::Role3, Island::Rear, 130, 0)},
                                   {}, {}, "fbase", "rbase");
  ModelConfig cfg;
  cfg.maintenance.fault_rate = 0.0;
  const SmdpModel model(s, cfg);
  const std::vector<EvacRequest> thread{poi(s, "rpoi", "rbase", 0.5, 2, "a"), transfer(s, "pickup", 1.0, 3, "b")};
  CounterRng rng(0);
  auto o = model.advance(model.initial_state(), thread, rng, true);
  std::vector<ServiceRecord> services(o.log.begin(), o.log.end());
  o = model.step(o.next_state, ExchangeAction::direct(), std::span(thread).subspan(o.consumed), rng, true);
  ASSERT_TRUE(o.terminal);
  services.insert(services.end(), o.log.begin(), o.log.end());
  const auto m = compute_metrics(s, services);

  const double v = 150.0;
  const double t_poi = (40.0 + 40.0) / v + 0.10;                // rear base -> site -> rear base
  const double t_tr = (30.0 + 100.0) / v + 0.10;               // forward base -> pickup -> Role3
  const double expected = 2 * fused_reward(kPointOfInjurySurvival, t_poi * 60.0) +
                          3 * fused_reward(kTransferSurvival, t_tr * 60.0);
  EXPECT_NEAR(m.total_reward, expected, 1e-12);
  EXPECT_EQ(m.requests, 2);
  EXPECT_EQ(m.patients, 5);
  EXPECT_EQ(m.transfers, 1);
  ASSERT_TRUE(m.watercraft_ratio);
  EXPECT_EQ(*m.watercraft_ratio, 0.0);
  EXPECT_NEAR(*m.fsmp_response, t_tr * 60.0, 1e-9);
  EXPECT_NEAR(*m.asmp_response, t_poi * 60.0, 1e-9);
  EXPECT_NEAR(*m.mean_response, (t_tr + t_poi) * 30.0, 1e-9);
  EXPECT_NEAR(*m.response_disparity, (t_tr - t_poi) * 60.0, 1e-9);
}

TEST(Episode, FixedSeedIsReproducible) {
  ExperimentConfig cfg = tiny({Policy::OptimalA1});
  const ExperimentPoint p;
  const auto a = run_episode(hawaii(), p, Policy::OptimalA1, 8, cfg);
  const auto b = run_episode(hawaii(), p, Policy::OptimalA1, 8, cfg);
  EXPECT_EQ(to_json(a.metrics).dump(), to_json(b.metrics).dump());
  ASSERT_EQ(a.decisions.size(), b.decisions.size());
  for (std::size_t i = 0; i < a.decisions.size(); ++i) EXPECT_EQ(a.decisions[i].action, b.decisions[i].action);
}

TEST(Episode, PoliciesShareTheCasualtyThread) {
  const ExperimentConfig cfg = tiny({});
  const ExperimentPoint p;
  const auto g = run_episode(hawaii(), p, Policy::Greedy, 12, cfg);
  const auto o = run_episode(hawaii(), p, Policy::OptimalA2, 12, cfg);
  EXPECT_EQ(g.metrics.requests, o.metrics.requests);
  EXPECT_EQ(g.metrics.patients, o.metrics.patients);
  EXPECT_EQ(g.metrics.transfers, o.metrics.transfers);
}

TEST(Sweep, GridCardinality) {
  ExperimentConfig cfg = tiny({Policy::Greedy, Policy::OptimalA1, Policy::OptimalA2});
  cfg.replications = 1;
  cfg.magnitudes = {0.5, 1.0, 1.5};
  cfg.platoon_ratios = {0.6, 1.0, 1.4};
  cfg.search.iterations_per_tree = 10;
  const auto rows = run_sweep(hawaii(), cfg);
  EXPECT_EQ(rows.size(), 27u);
  const auto text = csv(rows);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 28);
  EXPECT_EQ(text.substr(0, kSweepCsvHeader.size()), kSweepCsvHeader);
  for (const auto& r : rows) EXPECT_FALSE(r.error);
}

TEST(Sweep, OutputIndependentOfWorkerCount) {
  ExperimentConfig cfg = tiny({Policy::Greedy, Policy::OptimalA1});
  cfg.magnitudes = {0.7, 1.3};
  cfg.workers = 1;
  const auto serial = csv(run_sweep(hawaii(), cfg));
  cfg.workers = 4;
  const auto parallel = csv(run_sweep(hawaii(), cfg));
  EXPECT_EQ(serial, parallel);
  EXPECT_EQ(serial, csv(run_sweep(hawaii(), cfg)));
}

TEST(Sweep, ConfidenceIntervalShrinksWithReplications) {
  ExperimentConfig cfg = tiny({Policy::Greedy});
  cfg.replications = 80;
  const auto rows = run_sweep(hawaii(), cfg);
  std::vector<double> all;
  for (const auto& e : rows[0].episodes) all.push_back(e.total_reward);
  const std::vector<double> first20(all.begin(), all.begin() + 20);
  const double ci20 = stats::summarize(first20).ci95;
  const double ci80 = stats::summarize(all).ci95;
  const double expected = std::sqrt(80.0 / 20.0) * stats::t_quantile(0.975, 19) / stats::t_quantile(0.975, 79);
  EXPECT_NEAR(ci20 / ci80 / expected, 1.0, 0.2);
}

TEST(Sweep, InvalidGridRejected) {
  ExperimentConfig cfg;
  cfg.magnitudes.clear();
  EXPECT_THROW(run_sweep(hawaii(), cfg), ValidationError);
  cfg = ExperimentConfig{};
  cfg.replications = 0;
  EXPECT_THROW(run_sweep(hawaii(), cfg), ValidationError);
}
