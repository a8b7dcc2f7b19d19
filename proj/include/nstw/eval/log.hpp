#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nstw/core.hpp"
#include "nstw/reward/energy.hpp"
#include "nstw/rl/agent.hpp"
#include "nstw/rl/env.hpp"

namespace nstw::eval {

// All vehicles at one instant, indexed by vehicle id. The ledger holds the
// energy spent on the step that ended here (empty for the first frame).
struct Frame {
  double time = 0.0;
  std::vector<double> x, v, a;
  std::vector<reward::EnergyEntry> ledger;
};

struct RunLog {
  std::vector<sim::VehicleKind> kind;
  std::vector<int> group;  // -1 for the trajectory leader
  double dt = 0.1;
  double vehicle_length = 5.0;
  double trajectory_duration = 0.0;
  sim::SafetyParams safety;
  std::vector<Frame> frames;
  bool collided = false;
  std::uint64_t seed = 0;
  nlohmann::json config;

  std::size_t vehicles() const { return kind.size(); }
  double start_time() const { return frames.empty() ? 0.0 : frames.front().time; }
  double end_time() const { return frames.empty() ? 0.0 : frames.back().time; }

  void validate() const {
    if (group.size() != kind.size()) throw StructureError("run log: kind/group size mismatch");
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const auto& f = frames[k];
      if (f.x.size() != vehicles() || f.v.size() != vehicles() || f.a.size() != vehicles())
        throw StructureError("run log: frame " + std::to_string(k) + " is not dense in vehicles");
      if (k > 0 && !(f.time > frames[k - 1].time))
        throw StructureError("run log: time not increasing at frame " + std::to_string(k));
    }
  }
};

inline Frame snapshot(const sim::WorldState& w) {
  Frame f;
  f.time = w.time;
  for (const auto& v : w.vehicles) {
    f.x.push_back(v.position);
    f.v.push_back(v.speed);
    f.a.push_back(v.accel);
  }
  return f;
}

using Controller = std::function<std::vector<double>(const sim::WorldState&)>;

// CAVs driven by IDM as well: the pure-IDM benchmark.
inline Controller idm_controller(const sim::IdmParams& p) {
  return [p](const sim::WorldState& w) { return sim::idm_cav_actions(w, p); };
}

// Noise-free policy actions.
inline Controller policy_controller(rl::Agent& agent, const rl::ObservationSpec& spec) {
  return [&agent, spec](const sim::WorldState& w) { return agent.policy(rl::observe(w, spec)); };
}

// One pass over the trajectory, stopping early on collision.
inline RunLog rollout(const rl::EnvConfig& cfg, const sim::LeaderTrajectory& traj, const Controller& ctl,
                      std::uint64_t seed = 0) {
  rl::PlatoonEnv env(cfg, traj);
  RunLog log;
  const auto& w0 = env.world();
  for (const auto& v : w0.vehicles) {
    log.kind.push_back(v.kind);
    log.group.push_back(v.group);
  }
  log.dt = cfg.scenario.dt;
  log.vehicle_length = cfg.scenario.vehicle_length;
  log.trajectory_duration = traj.end_time() - traj.start_time();
  log.safety = cfg.scenario.safety;
  log.seed = seed;
  log.frames.push_back(snapshot(w0));
  for (;;) {
    auto s = env.step(ctl(env.world()));
    Frame f = snapshot(s.world);
    f.ledger = std::move(s.reward.ledger);
    log.frames.push_back(std::move(f));
    if (s.terminal) {
      log.collided = true;
      break;
    }
    if (s.truncated) break;
  }
  return log;
}

}  // namespace nstw::eval
