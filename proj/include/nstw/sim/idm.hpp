#pragma once

#include <cmath>
#include <limits>

#include "nstw/sim/types.hpp"

namespace nstw::sim {

// Desired dynamic gap s* = s0 + max(0, v*T + v*dv / (2*sqrt(a*b))).
inline double idm_desired_gap(double v, double dv, const IdmParams& p) {
  const double dyn = v * p.time_headway + v * dv / (2.0 * std::sqrt(p.max_accel * p.comfortable_decel));
  return p.jam_distance + std::max(0.0, dyn);
}

// Raw IDM acceleration for speed v, approach rate dv = v - v_front and bumper gap s.
inline double idm_raw(double v, double dv, double s, const IdmParams& p) {
  if (!(s > 0.0)) throw CollisionError("idm: non-positive gap " + std::to_string(s));
  const double free_term = std::pow(v / p.desired_speed, p.accel_exponent);
  const double ratio = idm_desired_gap(v, dv, p) / s;
  return p.max_accel * (1.0 - free_term - ratio * ratio);
}

inline double idm_acceleration(const VehicleState& ego, const VehicleState& front, const IdmParams& p,
                               double vehicle_length = 5.0) {
  const double gap = front.position - ego.position - vehicle_length;
  return clamp_accel(idm_raw(ego.speed, ego.speed - front.speed, gap, p));
}

// Time to collision; +inf when not closing.
inline double ttc(double gap, double v_ego, double v_front) {
  const double closing = v_ego - v_front;
  if (closing <= 0.0) return std::numeric_limits<double>::infinity();
  return gap / closing;
}

inline double ttc(const VehicleState& ego, const VehicleState& front, double vehicle_length = 5.0) {
  return ttc(front.position - ego.position - vehicle_length, ego.speed, front.speed);
}

inline double safe_distance(double v_ego, double v_front, const SafetyParams& p) {
  return v_ego * p.reaction_time + (v_ego * v_ego - v_front * v_front) / (2.0 * p.max_decel) + p.min_gap;
}

}  // namespace nstw::sim
