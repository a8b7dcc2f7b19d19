#pragma once

#include <vector>

#include "nstw/reward/energy.hpp"
#include "nstw/reward/terms.hpp"
#include "nstw/sim/idm.hpp"
#include "nstw/sim/types.hpp"

namespace nstw::reward {

struct RewardWeights {
  double safe = 1.0;
  double task = 1.0;
  double comfort = 1.0;
  double energy = 1.0;

  void validate() const {
    if (safe < 0 || task < 0 || comfort < 0 || energy < 0) throw ConfigError("reward weights must be >= 0");
  }
};

struct RewardParams {
  sim::SafetyParams safety;
  ComfortParams comfort;
  EnergyParams energy;
  RewardWeights weights;
  double desired_gap = 20.0;        // m
  double reference_power = 1.0e4;   // W, energy normalization
  double collision_penalty = -100.0;

  void validate() const {
    safety.validate();
    comfort.validate();
    energy.validate();
    weights.validate();
    if (!(desired_gap > 0)) throw ConfigError("desired gap must be > 0");
    if (!(reference_power > 0)) throw ConfigError("reference power must be > 0");
  }
};

struct RewardVector {
  double safe = 0.0;
  double task = 0.0;
  double comfort = 0.0;
  double energy = 0.0;  // normalized, <= 0
  double scalar = 0.0;
  SafeTerms safe_terms;
  TaskTerms task_terms;
  ComfortTerms comfort_terms;
};

inline double scalarize(const RewardVector& r, const RewardWeights& w) {
  return w.safe * r.safe + w.task * r.task + w.comfort * r.comfort + w.energy * r.energy;
}

struct StepReward {
  std::vector<RewardVector> per_cav;
  std::vector<EnergyEntry> ledger;
  double global = 0.0;  // sum over CAVs, plus the collision penalty
};

// Rewards for the transition prev -> next. Jerk is the change in recorded
// acceleration over one step.
inline StepReward compute_rewards(const sim::WorldState& prev, const sim::WorldState& next,
                                  const std::vector<int>& links, const std::vector<int>& handoffs,
                                  const RewardParams& p) {
  if (prev.vehicles.size() != next.vehicles.size() || prev.groups.size() != next.groups.size())
    throw StructureError("compute_rewards: worlds differ in shape");
  const double dt = p.energy.timestep;
  StepReward out;
  out.ledger = energy_ledger(next, links, handoffs, p.energy);
  out.per_cav.reserve(next.groups.size());
  for (std::size_t g = 0; g < next.groups.size(); ++g) {
    const auto& grp = next.groups[g];
    const auto i = static_cast<std::size_t>(grp.cav);
    const auto& ego = next.vehicles[i];
    const auto& front = next.vehicles[i - 1];
    const double gap = next.gap(i);
    RewardVector r;
    r.safe_terms = r_safe(gap, sim::safe_distance(ego.speed, front.speed, p.safety),
                          sim::ttc(gap, ego.speed, front.speed), p.safety.ttc_limit);
    r.task_terms = r_task(gap, p.desired_gap, ego.speed, front.speed);
    const double jerk = (ego.accel - prev.vehicles[i].accel) / dt;
    r.comfort_terms = r_comfort(ego.accel, jerk, p.comfort);
    r.safe = r.safe_terms.sum();
    r.task = r.task_terms.sum();
    r.comfort = r.comfort_terms.sum();
    double joules = out.ledger[i].total();
    for (int av : grp.avs) joules += out.ledger[static_cast<std::size_t>(av)].total();
    const double members = 1.0 + static_cast<double>(grp.avs.size());
    r.energy = -joules / (p.reference_power * dt * members);
    r.scalar = scalarize(r, p.weights);
    out.global += r.scalar;
    out.per_cav.push_back(r);
  }
  if (next.collision_flag) out.global += p.collision_penalty;
  return out;
}

}  // namespace nstw::reward
