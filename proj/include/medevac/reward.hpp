#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "medevac/errors.hpp"

namespace medevac {

/// Survival/clearance curve. `a` and `gamma_shape` are the Weibull scale
/// (minutes) and shape; `m` is the battlefield-clearance slope per minute.
struct SurvivalParams {
  double a = 125.0;
  double gamma_shape = 7.0;
  double m = 0.0042;

  bool valid() const { return a > 0.0 && gamma_shape > 0.0 && m >= 0.0; }
};

/// Interisland transfer after role-two stabilization.
inline constexpr SurvivalParams kTransferSurvival{125.0, 7.0, 0.0042};
/// Point-of-injury evacuation.
inline constexpr SurvivalParams kPointOfInjurySurvival{63.0, 7.0, 0.0063};

/// Per-patient reward: the larger of the Weibull survival term and the linear
/// clearance term. `t_minutes` is time since injury.
inline double fused_reward(const SurvivalParams& p, double t_minutes) {
  if (!p.valid()) throw ContractViolation("fused_reward: invalid survival parameters");
  if (t_minutes < 0.0) throw ContractViolation("fused_reward: time since injury must be non-negative");
  const double survival = std::exp(-std::pow(t_minutes / p.a, p.gamma_shape));
  const double clearance = 1.0 - p.m * t_minutes;
  return std::max(survival, clearance);
}

inline double greedy_reward(double t_minutes, int patients) {
  if (patients < 1) throw ContractViolation("greedy_reward: patients must be >= 1");
  return fused_reward(kTransferSurvival, t_minutes) * patients;
}

struct IntermediateOutcome {
  double t_minutes = 0.0;
  int patients = 1;
};

/// Transfer reward plus point-of-injury rewards accrued between decision
/// epochs. The transfer term is per patient unless `transfer_patients` > 0,
/// in which case it is multiplied by that count.
inline double optimal_reward(double transfer_t_minutes, std::span<const IntermediateOutcome> intermediate,
                             int transfer_patients = 0) {
  double total = 0.0;
  for (const auto& x : intermediate) total += fused_reward(kPointOfInjurySurvival, x.t_minutes) * x.patients;
  const double transfer = fused_reward(kTransferSurvival, transfer_t_minutes);
  return total + (transfer_patients > 0 ? transfer * transfer_patients : transfer);
}

struct PenaltyConfig {
  double tau1 = 0.0;
  double tau2 = 0.0;
};

/// Employment penalty weighted by each aircraft's recent utilization.
/// Employment times in hours, utilizations as fractions.
inline double utilization_penalty(const PenaltyConfig& cfg, double employment_forward, double utilization_forward,
                                  double employment_rear, double utilization_rear) {
  if (cfg.tau1 < 0.0 || cfg.tau2 < 0.0) throw ContractViolation("utilization_penalty: weights must be >= 0");
  return cfg.tau1 * employment_forward * utilization_forward + cfg.tau2 * employment_rear * utilization_rear;
}

}  // namespace medevac
