#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "nstw/sim/idm.hpp"
#include "nstw/sim/trajectory.hpp"
#include "nstw/sim/types.hpp"

namespace nstw::sim {

// Leader first, then each group as one CAV followed by its AVs, all at uniform
// spacing. The last vehicle starts at x = 0.
inline WorldState build_scenario(const ScenarioConfig& cfg, const LeaderTrajectory& traj) {
  cfg.validate();
  WorldState w;
  w.rsu_span = cfg.rsu_span;
  w.comm_reach = cfg.comm_reach;
  w.vehicle_length = cfg.vehicle_length;
  const double v0 = traj.speed_at(traj.start_time());
  w.time = 0.0;

  const std::size_t m = cfg.vehicle_count();
  w.vehicles.reserve(m);
  auto place = [&](VehicleKind kind, int group) {
    const int id = static_cast<int>(w.vehicles.size());
    const double x = static_cast<double>(m - 1 - w.vehicles.size()) * cfg.spacing;
    w.vehicles.push_back({id, kind, x, v0, 0.0, group});
    return id;
  };
  place(VehicleKind::TrajectoryLeader, -1);
  for (int g = 0; g < cfg.groups; ++g) {
    Group grp;
    grp.cav = place(VehicleKind::CAV, g);
    for (int k = 0; k < cfg.avs_per_group; ++k) grp.avs.push_back(place(VehicleKind::AV, g));
    w.groups.push_back(std::move(grp));
  }
  return w;
}

// IDM accelerations for every CAV; used by the pure-IDM baseline.
inline std::vector<double> idm_cav_actions(const WorldState& w, const IdmParams& p) {
  std::vector<double> a;
  a.reserve(w.groups.size());
  for (const auto& g : w.groups) {
    const auto i = static_cast<std::size_t>(g.cav);
    a.push_back(idm_acceleration(w.vehicles[i], w.vehicles[i - 1], p, w.vehicle_length));
  }
  return a;
}

// One semi-implicit Euler step. Accelerations are computed from the current
// state for all vehicles, then v' = max(0, v + a*dt), x' = x + v'*dt.
// The recorded accel is the effective (v' - v)/dt.
inline WorldState step(const WorldState& world, std::span<const double> cav_actions,
                       const LeaderTrajectory& traj, double dt, const IdmParams& idm) {
  if (cav_actions.size() != world.groups.size())
    throw StructureError("step: expected " + std::to_string(world.groups.size()) + " CAV actions, got " +
                         std::to_string(cav_actions.size()));
  for (double a : cav_actions)
    if (std::isnan(a)) throw NumericError("step: NaN CAV action");
  if (world.collision_flag) return world;

  WorldState next = world;
  const auto n = world.vehicles.size();
  std::vector<double> accel(n, 0.0);

  const auto& lead = world.vehicles[0];
  const double target = traj.speed_at(world.time + dt);
  accel[0] = clamp_accel((target - lead.speed) / dt);

  std::size_t cav_index = 0;
  for (std::size_t i = 1; i < n; ++i) {
    const auto& v = world.vehicles[i];
    if (v.kind == VehicleKind::CAV) {
      accel[i] = clamp_accel(cav_actions[cav_index++]);
    } else {
      accel[i] = idm_acceleration(v, world.vehicles[i - 1], idm, world.vehicle_length);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto& v = next.vehicles[i];
    const double speed = std::max(0.0, v.speed + accel[i] * dt);
    v.accel = (speed - v.speed) / dt;
    v.speed = speed;
    v.position += speed * dt;
  }
  next.time = world.time + dt;
  for (std::size_t i = 1; i < n; ++i) {
    if (next.gap(i) <= 0.0) {
      next.collision_flag = true;
      break;
    }
  }
  return next;
}

}  // namespace nstw::sim
