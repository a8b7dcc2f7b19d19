#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nstw/core.hpp"

namespace nstw::sim {

enum class VehicleKind { TrajectoryLeader, CAV, AV };

inline const char* to_string(VehicleKind k) {
  switch (k) {
    case VehicleKind::TrajectoryLeader: return "TL";
    case VehicleKind::CAV: return "CAV";
    case VehicleKind::AV: return "AV";
  }
  return "?";
}

struct VehicleState {
  int id = 0;
  VehicleKind kind = VehicleKind::AV;
  double position = 0.0;  // m, increasing in travel direction
  double speed = 0.0;     // m/s
  double accel = 0.0;     // m/s^2, last applied
  int group = -1;         // platoon index; -1 for the trajectory leader
};

struct Group {
  int cav = 0;
  std::vector<int> avs;  // front to back
};

// Intelligent Driver Model parameters.
struct IdmParams {
  double desired_speed = 40.0;
  double time_headway = 1.0;
  double max_accel = 1.3;
  double comfortable_decel = 2.0;
  double accel_exponent = 4.0;
  double jam_distance = 2.0;

  void validate() const {
    if (!(desired_speed > 0 && time_headway > 0 && max_accel > 0 && comfortable_decel > 0 &&
          jam_distance > 0))
      throw ConfigError("idm parameters must be strictly positive");
    if (!(accel_exponent >= 1.0)) throw ConfigError("idm.accel_exponent must be >= 1");
  }
};

// Parameters of the safe-distance rule D_s = v_e*t0 + (v_e^2 - v_f^2)/(2*a_max) + d0.
struct SafetyParams {
  double reaction_time = 0.2;  // t0, communication delay
  double max_decel = 4.5;      // a_max, magnitude
  double min_gap = 2.0;        // d0
  double ttc_limit = 4.0;

  void validate() const {
    if (!(max_decel > 0)) throw ConfigError("safety.max_decel must be > 0");
    if (!(reaction_time >= 0)) throw ConfigError("safety.reaction_time must be >= 0");
    if (!(min_gap > 0)) throw ConfigError("safety.min_gap must be > 0");
    if (!(ttc_limit > 0)) throw ConfigError("safety.ttc_limit must be > 0");
  }
};

struct ScenarioConfig {
  int groups = 10;
  int avs_per_group = 19;
  double spacing = 40.0;        // initial front-to-front distance
  double road_length = 2.5e4;
  double dt = 0.1;
  double vehicle_length = 5.0;
  double rsu_span = 1000.0;     // length of road covered by one RSU
  double comm_reach = 250.0;    // CAV to non-connected vehicle V2V range
  double collision_penalty = -100.0;
  IdmParams idm;
  SafetyParams safety;

  std::size_t vehicle_count() const {
    return 1 + static_cast<std::size_t>(groups) * (1 + static_cast<std::size_t>(avs_per_group));
  }

  void validate() const {
    if (groups < 1) throw ConfigError("scenario.groups must be >= 1");
    if (avs_per_group < 0) throw ConfigError("scenario.avs_per_group must be >= 0");
    if (!(spacing > vehicle_length)) throw ConfigError("scenario.spacing must exceed vehicle_length");
    if (!(dt > 0)) throw ConfigError("scenario.dt must be > 0");
    if (!(vehicle_length > 0)) throw ConfigError("scenario.vehicle_length must be > 0");
    if (!(rsu_span > 0)) throw ConfigError("scenario.rsu_span must be > 0");
    if (!(comm_reach > 0)) throw ConfigError("scenario.comm_reach must be > 0");
    const double span = static_cast<double>(vehicle_count() - 1) * spacing;
    if (!(span < road_length))
      throw ConfigError("scenario: platoon length " + std::to_string(span) +
                        " m exceeds road length " + std::to_string(road_length) + " m");
    idm.validate();
    safety.validate();
  }
};

struct WorldState {
  double time = 0.0;
  std::vector<VehicleState> vehicles;  // front to back; vehicles[i].id == i
  std::vector<Group> groups;
  double rsu_span = 1000.0;
  double comm_reach = 250.0;
  double vehicle_length = 5.0;
  bool collision_flag = false;

  // Bumper gap from vehicle i to the vehicle directly ahead of it.
  double gap(std::size_t i) const {
    return vehicles[i - 1].position - vehicles[i].position - vehicle_length;
  }

  std::vector<int> cav_ids() const {
    std::vector<int> ids;
    ids.reserve(groups.size());
    for (const auto& g : groups) ids.push_back(g.cav);
    return ids;
  }

  int rsu_cell(double x) const { return static_cast<int>(std::floor(x / rsu_span)); }
};

}  // namespace nstw::sim
