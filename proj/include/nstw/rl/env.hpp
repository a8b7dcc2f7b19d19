#pragma once

#include <vector>

#include "nstw/reward/reward.hpp"
#include "nstw/rl/observation.hpp"
#include "nstw/sim/simulator.hpp"

namespace nstw::rl {

struct EnvConfig {
  sim::ScenarioConfig scenario;
  reward::RewardParams reward;
  ObservationSpec observation;
};

struct EnvStep {
  sim::WorldState world;
  reward::StepReward reward;
  bool terminal = false;   // collision
  bool truncated = false;  // trajectory exhausted
};

// One episode is one pass over the leader trajectory, starting from the
// scenario's initial layout.
class PlatoonEnv {
 public:
  PlatoonEnv(EnvConfig cfg, sim::LeaderTrajectory traj) : cfg_(std::move(cfg)), traj_(std::move(traj)) {
    cfg_.scenario.validate();
    cfg_.reward.validate();
    cfg_.reward.energy.timestep = cfg_.scenario.dt;
    cfg_.reward.collision_penalty = cfg_.scenario.collision_penalty;
    cfg_.reward.safety = cfg_.scenario.safety;
    reset();
  }

  const sim::WorldState& reset() {
    world_ = sim::build_scenario(cfg_.scenario, traj_);
    handoffs_.reset();
    handoffs_.update(world_);
    return world_;
  }

  const sim::WorldState& world() const { return world_; }
  const EnvConfig& config() const { return cfg_; }
  const sim::LeaderTrajectory& trajectory() const { return traj_; }
  int cav_count() const { return static_cast<int>(world_.groups.size()); }

  // Number of steps in a full episode.
  std::int64_t horizon() const {
    return static_cast<std::int64_t>(std::floor((traj_.end_time() - traj_.start_time()) / cfg_.scenario.dt + 1e-9));
  }

  Observation observe() const { return rl::observe(world_, cfg_.observation); }

  EnvStep step(const std::vector<double>& actions) {
    EnvStep out;
    out.world = sim::step(world_, actions, traj_, cfg_.scenario.dt, cfg_.scenario.idm);
    const auto links = reward::active_links(out.world);
    const auto handoffs = handoffs_.update(out.world);
    out.reward = reward::compute_rewards(world_, out.world, links, handoffs, cfg_.reward);
    out.terminal = out.world.collision_flag;
    out.truncated = !out.terminal && out.world.time >= traj_.end_time() - 0.5 * cfg_.scenario.dt;
    world_ = out.world;
    return out;
  }

 private:
  EnvConfig cfg_;
  sim::LeaderTrajectory traj_;
  sim::WorldState world_;
  reward::HandoffTracker handoffs_;
};

}  // namespace nstw::rl
