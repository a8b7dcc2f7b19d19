#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "nstw/core.hpp"

namespace nstw::reward {

struct SafeTerms {
  double r_ds = 0.0;
  double r_ttc = 0.0;
  double sum() const { return r_ds + r_ttc; }
};

struct TaskTerms {
  double r_gap = 0.0;
  double r_speed = 0.0;
  double sum() const { return r_gap + r_speed; }
};

struct ComfortTerms {
  double r_a = 0.0;
  double r_j = 0.0;
  double sum() const { return r_a + r_j; }
};

struct ComfortParams {
  double c1 = 2.5;          // m/s^2, acceleration scale
  double c2 = 1.0;          // jerk scale above the boundary
  double j_max = 90.0;      // m/s^3
  double j_boundary = 2.94;  // m/s^3

  void validate() const {
    if (!(c1 > 0) || !(c2 >= 0) || !(j_max > 0) || !(j_boundary >= 0))
      throw ConfigError("comfort parameters must be positive");
  }
};

// r_ds penalizes a gap shorter than the safe distance; r_ttc penalizes a
// closing time under the limit on a log scale, floored at -1.
inline SafeTerms r_safe(double delta_d, double safe_distance, double ttc, double ttc_limit = 4.0) {
  SafeTerms r;
  r.r_ds = delta_d < safe_distance ? -1.0 : 0.0;
  if (std::isnan(ttc)) throw NumericError("r_safe: ttc is NaN");
  if (ttc <= 0.0)
    r.r_ttc = -1.0;
  else if (ttc <= ttc_limit)
    r.r_ttc = std::max(-1.0, std::log(ttc / ttc_limit));
  return r;
}

// -tanh(x) for x >= 0. tanh rounds to exactly 1 for x above ~19, while the
// true value stays above -1; return the largest double below 1 in magnitude
// so the open lower bound survives rounding.
inline double neg_tanh(double x) {
  static const double kBelowOne = std::nextafter(1.0, 0.0);
  return -std::min(std::tanh(x), kBelowOne);
}

inline TaskTerms r_task(double delta_d, double delta_d_des, double v_ego, double v_front) {
  if (!(delta_d_des > 0)) throw DomainError("r_task: desired gap must be > 0");
  return {neg_tanh(std::abs(delta_d - delta_d_des)), neg_tanh(std::abs(v_ego - v_front))};
}

inline ComfortTerms r_comfort(double accel, double jerk, const ComfortParams& p = {}) {
  ComfortTerms r;
  const double x = accel / p.c1;
  r.r_a = std::max(-1.0, -x * x);
  const double jj = jerk * jerk / (p.j_max * p.j_max);
  r.r_j = std::abs(jerk) >= p.j_boundary ? std::max(-1.0, -p.c2 * jj) : -jj;
  return r;
}

}  // namespace nstw::reward
