#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "medevac/errors.hpp"
#include "medevac/request.hpp"
#include "medevac/rng.hpp"
#include "medevac/scenario.hpp"

namespace medevac {

/// Requests per hour at magnitude 1.0: 32 requests over 24 hours.
inline constexpr double kBaseRequestRate = 32.0 / 24.0;

struct CasualtyGenConfig {
  double magnitude_multiplier = 1.0;
  double platoon_ratio = 1.4;          ///< forward:rear arrival-rate ratio
  double transfer_proportion = 0.25;   ///< share of forward-island requests needing interisland transfer
  int patients_per_request = 3;        ///< mean of the truncated Poisson
  double base_request_rate = kBaseRequestRate;
  double horizon = 24.0;  ///< hours
  std::uint64_t seed = 0;

  void validate() const {
    detail::require(magnitude_multiplier >= 0.0, "generator-magnitude", "magnitude_multiplier must be >= 0");
    detail::require(platoon_ratio > 0.0, "generator-platoon-ratio", "platoon_ratio must be > 0");
    detail::require(transfer_proportion >= 0.0 && transfer_proportion <= 1.0, "generator-transfer-proportion",
                    "transfer_proportion must lie in [0, 1]");
    detail::require(patients_per_request >= 1, "generator-patients", "patients_per_request must be >= 1");
    detail::require(base_request_rate >= 0.0, "generator-rate", "base_request_rate must be >= 0");
    detail::require(horizon >= 0.0, "generator-horizon", "horizon must be >= 0");
  }

  double request_rate() const { return base_request_rate * magnitude_multiplier; }
  double forward_probability() const { return platoon_ratio / (1.0 + platoon_ratio); }
};

/// Facility pools the generator draws origins from.
struct OriginPools {
  std::vector<std::size_t> forward_transfer;  ///< Forward-island Role2
  std::vector<std::size_t> forward_poi;       ///< Forward-island Role1 (Role2 if none)
  std::vector<std::size_t> rear_poi;          ///< Rear-island Role1 (Role2 if none)
  std::vector<std::size_t> poi_destination;   ///< per facility: nearest Role2 on the same island

  explicit OriginPools(const Scenario& s) {
    auto collect = [&](Island island, FacilityRole role) {
      std::vector<std::size_t> out;
      for (std::size_t i = 0; i < s.facilities.size(); ++i)
        if (s.facilities[i].island == island && s.facilities[i].role == role) out.push_back(i);
      return out;
    };
    forward_transfer = collect(Island::Forward, FacilityRole::Role2);
    forward_poi = collect(Island::Forward, FacilityRole::Role1);
    if (forward_poi.empty()) forward_poi = forward_transfer;
    rear_poi = collect(Island::Rear, FacilityRole::Role1);
    if (rear_poi.empty()) rear_poi = collect(Island::Rear, FacilityRole::Role2);

    poi_destination.assign(s.facilities.size(), s.role3);
    for (std::size_t i = 0; i < s.facilities.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < s.facilities.size(); ++k) {
        const auto& f = s.facilities[k];
        if (f.role != FacilityRole::Role2 || f.island != s.facilities[i].island) continue;
        const double d = distance(s.facilities[i].location, f.location);
        if (d < best) {
          best = d;
          poi_destination[i] = k;
        }
      }
    }
    detail::require(!forward_transfer.empty(), "transfer-origin", "scenario has no Forward-island Role2");
    detail::require(!rear_poi.empty(), "rear-origins", "scenario has no Rear-island origin facility");
  }
};

/// Samples a casualty thread on [start, start + horizon): homogeneous Poisson
/// arrivals; island by platoon ratio; transfer kind only on the forward island.
/// Fully determined by (scenario, cfg, start).
inline std::vector<EvacRequest> sample_thread(const Scenario& s, const CasualtyGenConfig& cfg, double start,
                                              const OriginPools& pools) {
  cfg.validate();
  std::vector<EvacRequest> thread;
  const double rate = cfg.request_rate();
  if (rate <= 0.0 || cfg.horizon <= 0.0) return thread;

  CounterRng rng(cfg.seed);
  const double end = start + cfg.horizon;
  const double p_forward = cfg.forward_probability();
  double t = start;
  for (;;) {
    t += rng.exponential(rate);
    if (t >= end) break;
    EvacRequest r;
    r.id = "r" + std::to_string(thread.size() + 1);
    r.injury_time = t;
    const bool forward = rng.bernoulli(p_forward);
    const bool transfer = rng.bernoulli(cfg.transfer_proportion);
    if (forward && transfer) {
      r.kind = RequestKind::InterislandTransfer;
      r.origin = pools.forward_transfer[rng.below(pools.forward_transfer.size())];
      r.destination = s.role3;
    } else {
      r.kind = RequestKind::PointOfInjury;
      const auto& pool = forward ? pools.forward_poi : pools.rear_poi;
      r.origin = pool[rng.below(pool.size())];
      r.destination = pools.poi_destination[r.origin];
    }
    r.patients = std::clamp(rng.poisson(cfg.patients_per_request), 1, s.aircraft.cabin_capacity);
    thread.push_back(std::move(r));
  }
  return thread;
}

inline std::vector<EvacRequest> sample_thread(const Scenario& s, const CasualtyGenConfig& cfg, double start = 0.0) {
  return sample_thread(s, cfg, start, OriginPools(s));
}

}  // namespace medevac
