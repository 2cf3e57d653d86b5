#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "medevac/reward.hpp"

using namespace medevac;

TEST(FusedReward, TransferAnchors) {
  EXPECT_NEAR(fused_reward(kTransferSurvival, 90.0), std::exp(-std::pow(90.0 / 125.0, 7.0)), 1e-15);
  EXPECT_NEAR(fused_reward(kTransferSurvival, 90.0), 0.9046, 5e-5);
  EXPECT_NEAR(fused_reward(kTransferSurvival, 120.0), 1.0 - 0.0042 * 120.0, 1e-15);
  EXPECT_NEAR(fused_reward(kTransferSurvival, 120.0), 0.4960, 5e-5);
}

TEST(FusedReward, ZeroTimeIsOneAndNegativeRejected) {
  for (const auto& p : {kTransferSurvival, kPointOfInjurySurvival, SurvivalParams{10.0, 2.0, 0.1}})
    EXPECT_EQ(fused_reward(p, 0.0), 1.0);
  EXPECT_THROW(fused_reward(kTransferSurvival, -1.0), ContractViolation);
  EXPECT_THROW(fused_reward(SurvivalParams{0.0, 7.0, 0.0}, 1.0), ContractViolation);
}

TEST(FusedReward, MonotoneOnGridAndEqualsPointwiseMax) {
  for (const auto& p : {kTransferSurvival, kPointOfInjurySurvival}) {
    double prev = fused_reward(p, 0.0);
    for (int i = 1; i <= 10000; ++i) {
      const double t = 0.05 * i;
      const double r = fused_reward(p, t);
      EXPECT_LE(r, prev) << "t=" << t;
      EXPECT_EQ(r, std::max(std::exp(-std::pow(t / p.a, p.gamma_shape)), 1.0 - p.m * t));
      prev = r;
    }
  }
}

TEST(GreedyReward, Examples) {
  EXPECT_DOUBLE_EQ(greedy_reward(0.0, 3), 3.0);
  EXPECT_NEAR(greedy_reward(90.0, 1), 0.9046, 5e-5);
  EXPECT_NEAR(greedy_reward(120.0, 4), 1.9840, 5e-5);
  EXPECT_THROW(greedy_reward(10.0, 0), ContractViolation);
}

TEST(GreedyReward, LinearInPatients) {
  for (double t : {0.0, 33.0, 90.0, 150.0, 400.0})
    for (int p = 1; p <= 3; ++p)
      for (int k = 1; k <= 2; ++k) EXPECT_NEAR(greedy_reward(t, k * p), k * greedy_reward(t, p), 1e-12);
}

TEST(OptimalReward, Examples) {
  const std::vector<IntermediateOutcome> one{{63.0, 2}};
  // Both intermediate and transfer terms sit on the linear branch: 1 - 0.0063*63 and 1 - 0.0042*125 exceed 1/e.
  EXPECT_NEAR(optimal_reward(125.0, one), 2.0 * std::max(std::exp(-1.0), 1.0 - 0.0063 * 63.0) + 0.475, 1e-12);
  EXPECT_NEAR(optimal_reward(125.0, one), 1.6812, 5e-5);
  const std::vector<IntermediateOutcome> two{{0.0, 1}, {0.0, 1}};
  EXPECT_DOUBLE_EQ(optimal_reward(0.0, two), 3.0);
  EXPECT_DOUBLE_EQ(optimal_reward(0.0, {}, 4), 4.0);
}

TEST(UtilizationPenalty, Examples) {
  EXPECT_EQ(utilization_penalty({0.0, 0.0}, 3.0, 0.7, 2.0, 0.4), 0.0);
  EXPECT_DOUBLE_EQ(utilization_penalty({1.0, 0.0}, 2.0, 0.5, 5.0, 0.9), 1.0);
  EXPECT_DOUBLE_EQ(utilization_penalty({0.5, 0.5}, 2.0, 0.5, 2.0, 0.5), 1.0);
  EXPECT_THROW(utilization_penalty({-1.0, 0.0}, 1.0, 1.0, 1.0, 1.0), ContractViolation);
}
