#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "nstw/core.hpp"
#include "nstw/graph/nested_graph.hpp"
#include "nstw/sim/types.hpp"

namespace nstw::reward {

struct EnergyParams {
  double mass = 1600.0;             // kg
  double drag_area = 0.6;           // C_d * A, m^2
  double air_density = 1.2;         // kg/m^3
  double rolling_coeff = 0.01;
  double drivetrain_eff = 0.9;
  double regen_eff = 0.6;
  double regen_cap = 0.0;           // W; battery power never drops below -regen_cap
  double aux_power = 500.0;         // W
  double comm_power = 2.0;          // W per active link
  double migration_energy = 5.0;    // J per handoff
  double local_compute_power = 20.0;  // W per CAV
  double timestep = 0.1;            // s

  void validate() const {
    for (double x : {mass, drag_area, air_density, rolling_coeff, regen_cap, aux_power, comm_power, migration_energy,
                     local_compute_power})
      if (!(x >= 0) || !std::isfinite(x)) throw ConfigError("energy parameters must be finite and >= 0");
    if (!(drivetrain_eff > 0 && drivetrain_eff <= 1)) throw ConfigError("drivetrain efficiency must be in (0, 1]");
    if (!(regen_eff >= 0 && regen_eff <= 1)) throw ConfigError("regen efficiency must be in [0, 1]");
    if (!(timestep > 0)) throw ConfigError("energy timestep must be > 0");
  }
};

// Battery power draw in W for a vehicle at speed v with acceleration a.
inline double drive_power(double v, double a, const EnergyParams& p) {
  if (v < 0.0) throw DomainError("drive_power: speed must be >= 0");
  const double force = p.mass * a + p.mass * kGravity * p.rolling_coeff + 0.5 * p.air_density * p.drag_area * v * v;
  const double wheel = force * v;
  const double battery = wheel >= 0.0 ? wheel / p.drivetrain_eff : wheel * p.regen_eff;
  return std::max(battery + p.aux_power, -p.regen_cap);
}

// Energy spent by one vehicle in one step, J (>= 0 with the default cap).
struct EnergyEntry {
  double time = 0.0;
  int vehicle = 0;
  double battery = 0.0;
  double comm = 0.0;
  double mig = 0.0;
  double cal = 0.0;
  double total() const { return battery + comm + mig + cal; }
};

// Reward-side energy components: negated sums over the fleet, J.
struct EnergyComponents {
  double battery = 0.0;
  double comm = 0.0;
  double mig = 0.0;
  double cal = 0.0;
  double total() const { return battery + comm + mig + cal; }
};

// Active communication links per CAV: its V-V neighbors plus one uplink.
inline std::vector<int> active_links(const sim::WorldState& w) {
  std::vector<int> out;
  out.reserve(w.groups.size());
  for (const auto& g : w.groups) {
    const auto i = static_cast<std::size_t>(g.cav);
    int n = 1;
    for (std::size_t j = 0; j < w.vehicles.size(); ++j)
      if (j != i && graph::vv_connected(w, i, j)) ++n;
    out.push_back(n);
  }
  return out;
}

// Tracks which CAV serves each AV: the nearest CAV within comm reach. A
// handoff is counted for the new CAV whenever an AV's server changes to
// another CAV.
class HandoffTracker {
 public:
  std::vector<int> update(const sim::WorldState& w) {
    std::vector<int> counts(w.groups.size(), 0);
    std::vector<int> now(w.vehicles.size(), -1);
    for (const auto& v : w.vehicles) {
      if (v.kind != sim::VehicleKind::AV) continue;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t g = 0; g < w.groups.size(); ++g) {
        const double d = std::abs(w.vehicles[static_cast<std::size_t>(w.groups[g].cav)].position - v.position);
        if (d <= w.comm_reach && d < best) {
          best = d;
          now[static_cast<std::size_t>(v.id)] = static_cast<int>(g);
        }
      }
    }
    if (serving_.size() == now.size())
      for (std::size_t v = 0; v < now.size(); ++v)
        if (now[v] >= 0 && serving_[v] != now[v]) ++counts[static_cast<std::size_t>(now[v])];
    serving_ = std::move(now);
    return counts;
  }

  const std::vector<int>& serving() const { return serving_; }
  void reset() { serving_.clear(); }

 private:
  std::vector<int> serving_;
};

// Per-vehicle energy for one step. AVs and the leader carry battery energy
// only; CAVs add communication, migration and local computation.
inline std::vector<EnergyEntry> energy_ledger(const sim::WorldState& w, const std::vector<int>& links,
                                              const std::vector<int>& handoffs, const EnergyParams& p) {
  if (links.size() != w.groups.size() || handoffs.size() != w.groups.size())
    throw StructureError("energy_ledger: link/handoff counts must have one entry per CAV");
  std::vector<EnergyEntry> out;
  out.reserve(w.vehicles.size());
  for (const auto& v : w.vehicles) {
    EnergyEntry e;
    e.time = w.time;
    e.vehicle = v.id;
    e.battery = drive_power(v.speed, v.accel, p) * p.timestep;
    out.push_back(e);
  }
  for (std::size_t g = 0; g < w.groups.size(); ++g) {
    if (links[g] < 0 || handoffs[g] < 0) throw DomainError("energy_ledger: negative link or handoff count");
    auto& e = out[static_cast<std::size_t>(w.groups[g].cav)];
    e.comm = p.comm_power * links[g] * p.timestep;
    e.mig = p.migration_energy * handoffs[g];
    e.cal = p.local_compute_power * p.timestep;
  }
  return out;
}

inline EnergyComponents r_energy(const std::vector<EnergyEntry>& ledger) {
  EnergyComponents c;
  for (const auto& e : ledger) {
    c.battery -= e.battery;
    c.comm -= e.comm;
    c.mig -= e.mig;
    c.cal -= e.cal;
  }
  return c;
}

inline EnergyComponents r_energy(const sim::WorldState& w, const std::vector<int>& links,
                                 const std::vector<int>& handoffs, const EnergyParams& p) {
  return r_energy(energy_ledger(w, links, handoffs, p));
}

}  // namespace nstw::reward
