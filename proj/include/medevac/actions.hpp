#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "medevac/errors.hpp"
#include "medevac/scenario.hpp"

namespace medevac {

/// Exchange point chosen for an interisland transfer. `index` selects the
/// watercraft route or the land AXP entry in the scenario; unused for Direct.
struct ExchangeAction {
  enum class Kind : std::uint8_t { Watercraft, LandAxp, Direct };

  Kind kind = Kind::Direct;
  std::uint16_t index = 0;

  static constexpr ExchangeAction watercraft(std::uint16_t i) { return {Kind::Watercraft, i}; }
  static constexpr ExchangeAction land(std::uint16_t i) { return {Kind::LandAxp, i}; }
  static constexpr ExchangeAction direct() { return {Kind::Direct, 0}; }

  bool is_watercraft() const { return kind == Kind::Watercraft; }
  bool is_land() const { return kind == Kind::LandAxp; }
  bool is_direct() const { return kind == Kind::Direct; }

  friend constexpr bool operator==(const ExchangeAction&, const ExchangeAction&) = default;
};

enum class ActionSpace { A1, A2 };

inline std::string_view to_string(ActionSpace a) { return a == ActionSpace::A1 ? "A1" : "A2"; }

/// Full catalog in stable order: watercraft, land AXPs, direct.
inline std::vector<ExchangeAction> action_catalog(const Scenario& s, ActionSpace space) {
  std::vector<ExchangeAction> out;
  if (space == ActionSpace::A1)
    for (std::size_t i = 0; i < s.watercraft.size(); ++i) out.push_back(ExchangeAction::watercraft(static_cast<std::uint16_t>(i)));
  for (std::size_t i = 0; i < s.land_axps.size(); ++i) out.push_back(ExchangeAction::land(static_cast<std::uint16_t>(i)));
  out.push_back(ExchangeAction::direct());
  return out;
}

/// Position of an action in the A1 catalog; used for stable tie-breaking.
inline std::size_t catalog_rank(const Scenario& s, ExchangeAction a) {
  switch (a.kind) {
    case ExchangeAction::Kind::Watercraft: return a.index;
    case ExchangeAction::Kind::LandAxp: return s.watercraft.size() + a.index;
    case ExchangeAction::Kind::Direct: return s.watercraft.size() + s.land_axps.size();
  }
  return 0;
}

inline std::string action_label(const Scenario& s, ExchangeAction a) {
  switch (a.kind) {
    case ExchangeAction::Kind::Watercraft: return "watercraft:" + s.watercraft.at(a.index).id;
    case ExchangeAction::Kind::LandAxp: return "land:" + s.facilities.at(s.land_axps.at(a.index)).id;
    case ExchangeAction::Kind::Direct: return "direct";
  }
  return "?";
}

inline ExchangeAction parse_action_label(const Scenario& s, std::string_view label) {
  if (label == "direct") return ExchangeAction::direct();
  if (label.starts_with("watercraft:")) {
    if (auto i = s.find_watercraft(label.substr(11))) return ExchangeAction::watercraft(static_cast<std::uint16_t>(*i));
  } else if (label.starts_with("land:")) {
    if (auto f = s.find_facility(label.substr(5)))
      for (std::size_t i = 0; i < s.land_axps.size(); ++i)
        if (s.land_axps[i] == *f) return ExchangeAction::land(static_cast<std::uint16_t>(i));
  }
  throw ParseError("/action", "unknown exchange action '" + std::string(label) + "'");
}

}  // namespace medevac
