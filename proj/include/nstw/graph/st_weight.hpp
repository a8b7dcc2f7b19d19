#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nstw/core.hpp"

namespace nstw::graph {

enum class StWeightMode {
  // max(ln(1 + D/dd + |dv|/V), 1) if dd < D and |dv| >= V, else 0.
  AsWritten,
  // Zero at dd >= D, rises from 0 at the distance threshold toward 1 as the
  // pair gets closer or the speed difference grows.
  ProseConsistent,
};

inline const char* to_string(StWeightMode m) {
  return m == StWeightMode::AsWritten ? "as-written" : "prose";
}

inline StWeightMode st_weight_mode_from_string(const std::string& s) {
  if (s == "as-written") return StWeightMode::AsWritten;
  if (s == "prose") return StWeightMode::ProseConsistent;
  throw ConfigError("unknown st-weight mode '" + s + "' (expected as-written|prose)");
}

struct StWeightParams {
  double d_max = 100.0;  // m
  double v_max = 40.0;   // m/s
  StWeightMode mode = StWeightMode::AsWritten;

  void validate() const {
    if (!(d_max > 0) || !(v_max > 0)) throw ConfigError("st-weight thresholds must be > 0");
  }
};

inline double st_weight(double delta_d, double delta_v, const StWeightParams& p) {
  if (!(delta_d > 0.0)) throw DomainError("st_weight: relative distance must be > 0");
  if (delta_d >= p.d_max) return 0.0;
  const double dv = std::abs(delta_v);
  const double raw = std::log(1.0 + p.d_max / delta_d + dv / p.v_max);
  if (p.mode == StWeightMode::AsWritten) {
    if (dv < p.v_max) return 0.0;
    return std::max(raw, 1.0);
  }
  // ln 2 is the raw value at (dd -> D, dv -> 0).
  const double base = std::numbers::ln2;
  return std::clamp((raw - base) / base, 0.0, 1.0);
}

}  // namespace nstw::graph
