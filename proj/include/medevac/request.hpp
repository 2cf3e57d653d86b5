#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "medevac/errors.hpp"
#include "medevac/scenario.hpp"

namespace medevac {

enum class RequestKind { PointOfInjury, InterislandTransfer };

inline std::string_view to_string(RequestKind k) {
  return k == RequestKind::PointOfInjury ? "PointOfInjury" : "InterislandTransfer";
}

inline RequestKind parse_request_kind(std::string_view s) {
  if (s == "PointOfInjury") return RequestKind::PointOfInjury;
  if (s == "InterislandTransfer") return RequestKind::InterislandTransfer;
  throw ParseError("/kind", "unknown request kind '" + std::string(s) + "'");
}

/// One evacuation request. Origin and destination are scenario facility indices.
struct EvacRequest {
  std::string id;
  double injury_time = 0.0;  ///< hours; also the time the request is received
  std::size_t origin = 0;
  std::size_t destination = 0;
  int patients = 1;
  RequestKind kind = RequestKind::PointOfInjury;

  bool is_transfer() const { return kind == RequestKind::InterislandTransfer; }

  friend bool operator==(const EvacRequest&, const EvacRequest&) = default;
};

/// Island whose platoon picks the patient up.
inline Island pickup_island(const Scenario& s, const EvacRequest& r) { return s.facilities[r.origin].island; }

/// Throws ValidationError on a request that breaks the request invariants for `s`.
inline void validate_request(const Scenario& s, const EvacRequest& r) {
  detail::require(r.origin < s.facilities.size() && r.destination < s.facilities.size(), "facility-reference",
                  "request '" + r.id + "' references an unknown facility");
  detail::require(r.patients >= 1 && r.patients <= s.aircraft.cabin_capacity, "patients-within-capacity",
                  "request '" + r.id + "' patient count must be in [1, cabin_capacity]");
  if (r.is_transfer()) {
    const auto& o = s.facilities[r.origin];
    detail::require(o.island == Island::Forward && o.role == FacilityRole::Role2, "transfer-origin",
                    "interisland transfer '" + r.id + "' must originate at a Forward-island Role2");
    detail::require(r.destination == s.role3, "transfer-destination",
                    "interisland transfer '" + r.id + "' must be destined for the Role3");
  } else {
    detail::require(s.facilities[r.origin].island == s.facilities[r.destination].island, "poi-same-island",
                    "point-of-injury request '" + r.id + "' must stay on its island");
  }
}

inline nlohmann::json to_json(const Scenario& s, const EvacRequest& r) {
  return {{"id", r.id},
          {"injury_time", r.injury_time},
          {"origin", s.facilities[r.origin].id},
          {"destination", s.facilities[r.destination].id},
          {"patients", r.patients},
          {"kind", to_string(r.kind)}};
}

inline EvacRequest request_from_json(const Scenario& s, const nlohmann::json& j, const std::string& path = "") {
  using namespace detail;
  EvacRequest r;
  r.id = string_field(j, "id", path);
  r.injury_time = number_field(j, "injury_time", path);
  r.origin = resolve(s, string_field(j, "origin", path), path + "/origin");
  r.destination = resolve(s, string_field(j, "destination", path), path + "/destination");
  const auto& p = field(j, "patients", path);
  if (!p.is_number_integer()) throw ParseError(path + "/patients", "expected an integer");
  r.patients = p.get<int>();
  r.kind = parse_request_kind(string_field(j, "kind", path));
  validate_request(s, r);
  return r;
}

/// One request per line.
inline void write_thread_jsonl(std::ostream& out, const Scenario& s, const std::vector<EvacRequest>& thread) {
  for (const auto& r : thread) out << to_json(s, r).dump() << '\n';
}

inline std::vector<EvacRequest> read_thread_jsonl(std::istream& in, const Scenario& s) {
  std::vector<EvacRequest> thread;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("line " + std::to_string(n), e.what());
    }
    thread.push_back(request_from_json(s, j, "line " + std::to_string(n)));
  }
  return thread;
}

}  // namespace medevac
