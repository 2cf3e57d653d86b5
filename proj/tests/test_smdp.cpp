#include <cmath>
#include <random>
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

Scenario zero_geometry() {
  AircraftSpec spec;
  spec.handoff_duration = spec.pickup_duration = spec.refuel_duration = 0.0;
  return make_scenario({fac("f", FacilityRole::Role2, Island::Forward, 0, 0),
                        fac("r", FacilityRole::Role2, Island::Rear, 0, 0),
                        fac("r3", FacilityRole::Role3, Island::Rear, 0, 0)},
                       {}, {}, "f", "r", spec);
}

SmdpState pending_state(const SmdpModel& model, const EvacRequest& r) {
  SmdpState st = model.initial_state(r.injury_time);
  st.pending = r;
  return st;
}

std::size_t forward_role2(const Scenario& s) {
  for (std::size_t i = 0; i < s.facilities.size(); ++i)
    if (s.facilities[i].island == Island::Forward && s.facilities[i].role == FacilityRole::Role2) return i;
  return 0;
}

}  // namespace

TEST(LegalActions, DefaultScenarioCatalogs) {
  const SmdpModel model(hawaii());
  EvacRequest r = transfer(hawaii(), hawaii().facilities[forward_role2(hawaii())].id, 0.0);
  const auto st = pending_state(model, r);
  const auto a1 = model.legal_actions(st, ActionSpace::A1);
  EXPECT_EQ(a1.size(), 5u);
  const auto a2 = model.legal_actions(st, ActionSpace::A2);
  ASSERT_EQ(a2.size(), 2u);
  EXPECT_EQ(action_label(hawaii(), a2[0]), "land:wheeler_r2");
  EXPECT_TRUE(a2[1].is_direct());
}

TEST(LegalActions, WatercraftBeyondRangeReducesToA2Set) {
  AircraftSpec spec;
  spec.max_leg_range = 60.0;
  const Scenario s = make_scenario({fac("f", FacilityRole::Role2, Island::Forward, 0, 0),
                                    fac("ax", FacilityRole::Role2, Island::Rear, 30, 0),
                                    fac("r", FacilityRole::Role2, Island::Rear, 50, 0),
                                    fac("r3", FacilityRole::Role3, Island::Rear, 55, 0)},
                                   {stationary("w1", 0, 200), stationary("w2", 20, -300)}, {"ax"}, "f", "r", spec);
  const SmdpModel model(s);
  const auto st = pending_state(model, transfer(s, "f", 0.0));
  EXPECT_EQ(model.legal_actions(st, ActionSpace::A1), model.legal_actions(st, ActionSpace::A2));
}

TEST(Step, ZeroGeometryDirectIsTerminalWithUnitReward) {
  const Scenario s = zero_geometry();
  const SmdpModel model(s);
  CounterRng rng(1);
  const auto out = model.step(pending_state(model, transfer(s, "f", 0.0)), ExchangeAction::direct(), {}, rng);
  EXPECT_DOUBLE_EQ(out.reward, 1.0);
  EXPECT_TRUE(out.terminal);
  EXPECT_EQ(out.sojourn, 0.0);
}

TEST(Step, SingleTransferRewardComposesModuleOracles) {
  const Scenario s = make_scenario({fac("fbase", FacilityRole::Role2, Island::Forward, 0, 0),
                                    fac("pickup", FacilityRole::Role2, Island::Forward, 20, 0),
                                    fac("rbase", FacilityRole::Role2, Island::Rear, 75, 0),
                                    fac("r3", FacilityRole::Role3, Island::Rear, 50, -20)},
                                   {}, {}, "fbase", "rbase");
  ModelConfig cfg;
  cfg.maintenance.fault_rate = 0.0;
  const SmdpModel model(s, cfg);
  CounterRng rng(4);
  const auto out = model.step(pending_state(model, transfer(s, "pickup", 0.0, 2)), ExchangeAction::direct(), {}, rng);
  const double t_hours = (20.0 + std::hypot(30.0, 20.0)) / 150.0 + 0.10;
  EXPECT_NEAR(out.reward, fused_reward(kTransferSurvival, t_hours * 60.0), 1e-12);
  cfg.transfer_patient_multiplier = true;
  const SmdpModel scaled(s, cfg);
  const auto out2 = scaled.step(pending_state(scaled, transfer(s, "pickup", 0.0, 2)), ExchangeAction::direct(), {}, rng);
  EXPECT_NEAR(out2.reward, 2.0 * fused_reward(kTransferSurvival, t_hours * 60.0), 1e-12);
}

TEST(Step, IntermediateRequestsAndNextPendingTransfer) {
  const Scenario& s = hawaii();
  CasualtyGenConfig g;
  g.seed = 21;
  g.horizon = 48.0;
  const auto thread = sample_thread(s, g);
  const SmdpModel model(s);
  CounterRng rng(2);
  auto first = model.advance(model.initial_state(), thread, rng);
  ASSERT_FALSE(first.terminal);
  ASSERT_TRUE(first.next_state.pending);
  EXPECT_TRUE(first.next_state.pending->is_transfer());
  const auto rest = std::span(thread).subspan(first.consumed);
  auto out = model.step(first.next_state, ExchangeAction::direct(), rest, rng);
  if (!out.terminal) {
    EXPECT_TRUE(out.next_state.pending->is_transfer());
    EXPECT_GE(out.next_state.clock, first.next_state.clock);
    EXPECT_NEAR(out.sojourn, out.next_state.clock - first.next_state.clock, 1e-12);
  }
}

TEST(Step, DeterministicUnderFixedSeed) {
  const Scenario& s = hawaii();
  CasualtyGenConfig g;
  g.seed = 5;
  const auto thread = sample_thread(s, g);
  const SmdpModel model(s);
  auto run = [&] {
    CounterRng rng(42);
    auto o = model.advance(model.initial_state(), thread, rng, true);
    std::vector<double> rewards{o.reward};
    std::size_t pos = o.consumed;
    while (!o.terminal) {
      o = model.step(o.next_state, greedy_policy(model, o.next_state, ActionSpace::A1), std::span(thread).subspan(pos), rng, true);
      pos += o.consumed;
      rewards.push_back(o.reward);
    }
    return std::make_pair(rewards, o.next_state);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second.fleet, b.second.fleet);
  EXPECT_EQ(a.second.rng_cursor, b.second.rng_cursor);
}

TEST(Step, InfeasibleActionIsContractViolation) {
  AircraftSpec spec;
  spec.max_leg_range = 60.0;
  const Scenario s = make_scenario({fac("f", FacilityRole::Role2, Island::Forward, 0, 0),
                                    fac("r", FacilityRole::Role2, Island::Rear, 50, 0),
                                    fac("r3", FacilityRole::Role3, Island::Rear, 55, 0)},
                                   {stationary("w", 0, 200)}, {}, "f", "r", spec);
  const SmdpModel model(s);
  CounterRng rng(1);
  EXPECT_THROW(model.step(pending_state(model, transfer(s, "f", 0)), ExchangeAction::watercraft(0), {}, rng),
               ContractViolation);
  EXPECT_THROW(model.step(model.initial_state(), ExchangeAction::direct(), {}, rng), ContractViolation);
}

TEST(DiscountedReturn, Examples) {
  const std::vector<TimedReward> one{{1.0, 10.0}};
  EXPECT_NEAR(discounted_return(one, 0.9), std::pow(0.9, 10), 1e-15);
  EXPECT_NEAR(discounted_return(one, 0.9), 0.3487, 5e-5);
  const std::vector<TimedReward> many{{1.0, 0.0}, {2.5, 3.0}, {0.5, 7.5}};
  EXPECT_DOUBLE_EQ(discounted_return(many, 1.0), 4.0);
  EXPECT_EQ(discounted_return({}, 0.9), 0.0);
  EXPECT_THROW(discounted_return(one, 0.0), ContractViolation);
}

TEST(Maintenance, FaultProbabilityClosedForm) {
  AircraftState a;
  a.cumulative_flight_hours = 100.0;
  CounterRng rng(1);
  const auto b = maintenance_update(a, 0.0, rng, {0.002, 2.0});
  EXPECT_NEAR(b.fault_probability, 1.0 - std::exp(-0.2), 1e-15);
  EXPECT_NEAR(b.fault_probability, 0.1813, 5e-5);
  EXPECT_FALSE(b.replaced);

  AircraftState c;
  for (int i = 0; i < 50; ++i) c = maintenance_update(c, 3.0, rng, {0.0, 2.0});
  EXPECT_EQ(c.fault_probability, 0.0);
  EXPECT_EQ(c.replacements, 0);
  EXPECT_DOUBLE_EQ(c.cumulative_flight_hours, 150.0);
}

TEST(Maintenance, FaultAddsReplacementDelay) {
  CounterRng rng(3);
  AircraftState idle;
  idle.busy_until = 1.0;
  const auto a = maintenance_update(idle, 1.0, rng, {1e6, 2.0});
  EXPECT_TRUE(a.replaced);
  EXPECT_DOUBLE_EQ(a.busy_until, 3.0);
  EXPECT_EQ(a.cumulative_flight_hours, 0.0);

  AircraftState busy;
  busy.commit(0.0, 1.5);
  const auto b = maintenance_update(busy, 1.5, rng, {1e6, 2.0});
  EXPECT_DOUBLE_EQ(b.busy_until, 3.5);
  EXPECT_DOUBLE_EQ(b.schedule.back().end, 3.5);
  EXPECT_THROW(maintenance_update(busy, -1.0, rng), ContractViolation);
}

TEST(Utilization, BoundedAndMonotoneInEmployment) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> start(0.0, 40.0), len(0.0, 6.0);
  for (int trial = 0; trial < 200; ++trial) {
    AircraftState a;
    double t = 0.0;
    for (int k = 0; k < 8; ++k) {
      t = std::max(t, start(gen));
      const double d = len(gen);
      a.commit(t, t + d);
      t += d;
    }
    const double clock = 48.0;
    const double u = a.utilization(clock, 24.0);
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, 1.0);
    AircraftState more = a;
    more.extend_last(1.0);
    EXPECT_GE(more.utilization(clock, 24.0), u);
  }
}

TEST(EarliestSlot, FillsGapsBetweenCommitments) {
  AircraftState a;
  a.commit(0.0, 1.0);
  a.commit(3.0, 4.0);
  EXPECT_DOUBLE_EQ(a.earliest_slot(0.5, [](double) { return 1.5; }), 1.0);
  EXPECT_DOUBLE_EQ(a.earliest_slot(0.5, [](double) { return 2.5; }), 4.0);
}

TEST(Episode, PatientConservation) {
  ExperimentConfig cfg;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const ExperimentPoint point;
    const auto ep = run_episode(hawaii(), point, Policy::Greedy, seed, cfg);
    const auto thread = sample_thread(hawaii(), generator_config(point, cfg.episode_duration, derive_seed(seed, 0)));
    int generated = 0;
    for (const auto& r : thread) generated += r.patients;
    int served = 0;
    std::size_t transfers = 0;
    for (const auto& s : ep.services) {
      served += s.request.patients;
      transfers += s.request.is_transfer();
    }
    EXPECT_EQ(served, generated);
    EXPECT_EQ(ep.services.size(), thread.size());
    EXPECT_EQ(ep.decisions.size(), transfers);
    EXPECT_EQ(ep.metrics.patients, generated);
  }
}

TEST(Episode, ZeroDurationsGiveUnitRewardPerPatient) {
  const Scenario s = zero_geometry();
  const SmdpModel model(s, ModelConfig{RewardMode::Greedy, {}, false, {0.0, 2.0}, 24.0, 1});
  std::vector<EvacRequest> thread;
  for (int i = 0; i < 6; ++i) {
    auto r = i % 2 ? poi(s, "f", "f", 0.5 * i, 1 + i % 3, "p" + std::to_string(i))
                   : transfer(s, "f", 0.5 * i, 1 + i % 3, "t" + std::to_string(i));
    thread.push_back(r);
  }
  CounterRng rng(0);
  auto o = model.advance(model.initial_state(), thread, rng, true);
  std::vector<ServiceRecord> services(o.log.begin(), o.log.end());
  std::size_t pos = o.consumed;
  while (!o.terminal) {
    o = model.step(o.next_state, ExchangeAction::direct(), std::span(thread).subspan(pos), rng, true);
    pos += o.consumed;
    services.insert(services.end(), o.log.begin(), o.log.end());
  }
  double total = 0.0;
  int patients = 0;
  for (const auto& r : services) total += r.reward;
  for (const auto& r : thread) patients += r.patients;
  EXPECT_DOUBLE_EQ(total, static_cast<double>(patients));
}
