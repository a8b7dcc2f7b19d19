#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nstw/eval/log.hpp"
#include "nstw/sim/idm.hpp"

namespace nstw::eval {

// Population statistics (divide by n).
struct Stats {
  double max = std::numeric_limits<double>::quiet_NaN();
  double min = std::numeric_limits<double>::quiet_NaN();
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;
};

inline Stats describe(const std::vector<double>& xs) {
  Stats s;
  s.count = xs.size();
  if (xs.empty()) return s;
  s.max = *std::max_element(xs.begin(), xs.end());
  s.min = *std::min_element(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

// ---- throughput ----

struct Window {
  double t0 = 0.0;
  double t1 = 0.0;
};

// Upward crossings of x_star by any vehicle with crossing frame time in
// (t0, t1], scaled to vehicles per hour.
inline double throughput(const RunLog& log, double x_star, Window w) {
  if (!std::isfinite(x_star)) throw DomainError("throughput: x_star must be finite");
  if (!(w.t1 > w.t0)) throw DomainError("throughput: empty window");
  if (log.frames.empty() || w.t0 < log.start_time() - 1e-9 || w.t1 > log.end_time() + 1e-9)
    throw DomainError("throughput: window outside the logged span");
  std::int64_t crossings = 0;
  for (std::size_t k = 1; k < log.frames.size(); ++k) {
    const auto& f = log.frames[k];
    if (!(f.time > w.t0 && f.time <= w.t1)) continue;
    const auto& prev = log.frames[k - 1];
    for (std::size_t i = 0; i < f.x.size(); ++i)
      if (prev.x[i] < x_star && f.x[i] >= x_star) ++crossings;
  }
  return static_cast<double>(crossings) * 3600.0 / (w.t1 - w.t0);
}

struct MetricsOptions {
  std::optional<double> x_star;   // default: the leader's initial position
  double warmup_fraction = 0.1;  // of the leader trajectory duration
};

inline double default_x_star(const RunLog& log, const MetricsOptions& o = {}) {
  if (o.x_star) return *o.x_star;
  if (log.frames.empty()) throw DomainError("metrics: empty log");
  return log.frames.front().x.front();
}

inline Window default_window(const RunLog& log, const MetricsOptions& o = {}) {
  const double t0 = log.start_time() + o.warmup_fraction * log.trajectory_duration;
  return {std::min(t0, log.end_time()), log.end_time()};
}

// ---- spacing ----

struct SpacingStats {
  Stats cav_gap;          // bumper gap from each CAV to the vehicle ahead
  Stats platoon_headway;  // front-to-front distance from each CAV to the preceding CAV (or the leader)
  Stats theta_safe;       // cav_gap minus the safe distance D_s
};

inline SpacingStats spacing_stats(const RunLog& log) {
  std::vector<double> gaps, headways, margins;
  for (const auto& f : log.frames) {
    int prev_head = 0;
    for (std::size_t i = 1; i < log.vehicles(); ++i) {
      if (log.kind[i] != sim::VehicleKind::CAV) continue;
      const double gap = f.x[i - 1] - f.x[i] - log.vehicle_length;
      gaps.push_back(gap);
      headways.push_back(f.x[static_cast<std::size_t>(prev_head)] - f.x[i]);
      margins.push_back(gap - sim::safe_distance(f.v[i], f.v[i - 1], log.safety));
      prev_head = static_cast<int>(i);
    }
  }
  return {describe(gaps), describe(headways), describe(margins)};
}

// ---- acceleration and jerk ----

// Fixed-width bins keyed by floor(value / width); a 1e-9 bin-relative nudge
// keeps exact multiples of the width in their own bin.
struct Histogram {
  double width = 0.1;
  std::map<std::int64_t, std::int64_t> bins;

  void add(double value) { ++bins[static_cast<std::int64_t>(std::floor(value / width + 1e-9))]; }
  std::int64_t total() const {
    std::int64_t n = 0;
    for (const auto& [k, c] : bins) n += c;
    return n;
  }
};

struct AccelJerkStats {
  Histogram accel{0.1, {}};
  Histogram jerk{0.05, {}};
  double a_max = 0.0;
  double a_min = 0.0;
  double j_max = 0.0;   // max |j|
  double j_mean = 0.0;  // mean |j|
};

// Over all followers (the leader's motion is prescribed). Jerk is the
// backward difference of the recorded accel; the first frame's jerk is 0.
inline AccelJerkStats accel_jerk_distributions(const RunLog& log) {
  AccelJerkStats s;
  if (log.frames.empty() || log.vehicles() < 2) return s;
  s.a_max = -std::numeric_limits<double>::infinity();
  s.a_min = std::numeric_limits<double>::infinity();
  double jsum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < log.frames.size(); ++k) {
    const auto& f = log.frames[k];
    for (std::size_t i = 1; i < log.vehicles(); ++i) {
      const double a = f.a[i];
      const double j = k == 0 ? 0.0 : (a - log.frames[k - 1].a[i]) / (f.time - log.frames[k - 1].time);
      s.accel.add(a);
      s.jerk.add(j);
      s.a_max = std::max(s.a_max, a);
      s.a_min = std::min(s.a_min, a);
      s.j_max = std::max(s.j_max, std::abs(j));
      jsum += std::abs(j);
      ++n;
    }
  }
  s.j_mean = jsum / static_cast<double>(n);
  return s;
}

// ---- energy ----

struct EnergyPerMeter {
  std::vector<std::optional<double>> per_group;  // J/m, absent when the group did not move
  std::optional<double> fleet;                   // mean of the present group values
};

// Per platoon: every ledger joule of its members over the log divided by the
// members' travelled distance.
inline EnergyPerMeter energy_per_meter(const RunLog& log) {
  int groups = 0;
  for (int g : log.group) groups = std::max(groups, g + 1);
  std::vector<double> joules(static_cast<std::size_t>(groups), 0.0), meters(static_cast<std::size_t>(groups), 0.0);
  for (const auto& f : log.frames)
    for (const auto& e : f.ledger) {
      const int g = log.group[static_cast<std::size_t>(e.vehicle)];
      if (g >= 0) joules[static_cast<std::size_t>(g)] += e.total();
    }
  if (!log.frames.empty())
    for (std::size_t i = 0; i < log.vehicles(); ++i)
      if (log.group[i] >= 0)
        meters[static_cast<std::size_t>(log.group[i])] += log.frames.back().x[i] - log.frames.front().x[i];
  EnergyPerMeter out;
  double sum = 0.0;
  int present = 0;
  for (int g = 0; g < groups; ++g) {
    const auto k = static_cast<std::size_t>(g);
    if (meters[k] > 0.0) {
      out.per_group.emplace_back(joules[k] / meters[k]);
      sum += joules[k] / meters[k];
      ++present;
    } else {
      out.per_group.emplace_back(std::nullopt);
    }
  }
  if (present > 0) out.fleet = sum / present;
  return out;
}

// ---- speed smoothness ----

// Mean over followers of each follower's population speed variance in time.
inline double follower_speed_variance(const RunLog& log) {
  if (log.frames.empty() || log.vehicles() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 1; i < log.vehicles(); ++i) {
    std::vector<double> v;
    v.reserve(log.frames.size());
    for (const auto& f : log.frames) v.push_back(f.v[i]);
    const auto s = describe(v);
    total += s.std * s.std;
  }
  return total / static_cast<double>(log.vehicles() - 1);
}

// ---- summary ----

inline constexpr std::array<const char*, 14> kSummaryColumns = {
    "x_max", "x_mean", "x_std", "q_mean", "v_min", "a_max", "a_min",
    "j_max", "j_mean", "E_max", "E_min", "theta_safe_max", "theta_safe_mean", "theta_safe_std"};

// Preferred direction per column when marking the best run: +1 higher, -1 lower, 0 none.
inline constexpr std::array<int, 14> kSummaryPreference = {-1, -1, -1, +1, +1, -1, +1, -1, -1, -1, -1, 0, +1, -1};

struct Summary {
  std::string label;
  std::array<double, 14> table{};  // kSummaryColumns order; NaN when absent
  std::map<std::string, double> extra;

  double& operator[](const std::string& column) {
    for (std::size_t k = 0; k < kSummaryColumns.size(); ++k)
      if (column == kSummaryColumns[k]) return table[k];
    throw StructureError("summary: unknown column '" + column + "'");
  }
  double at(const std::string& column) const { return const_cast<Summary&>(*this)[column]; }
};

inline Summary summarize(const RunLog& log, const MetricsOptions& o = {}, std::string label = "") {
  log.validate();
  if (log.frames.empty()) throw DomainError("summary: empty log");
  Summary s;
  s.label = std::move(label);
  const auto sp = spacing_stats(log);
  const auto aj = accel_jerk_distributions(log);
  const auto en = energy_per_meter(log);
  const auto w = default_window(log, o);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  double vmin = std::numeric_limits<double>::infinity();
  for (const auto& f : log.frames)
    for (std::size_t i = 1; i < log.vehicles(); ++i) vmin = std::min(vmin, f.v[i]);
  double emax = -std::numeric_limits<double>::infinity(), emin = std::numeric_limits<double>::infinity();
  for (const auto& e : en.per_group)
    if (e) {
      emax = std::max(emax, *e);
      emin = std::min(emin, *e);
    }
  const bool has_e = std::isfinite(emax);

  s.table = {sp.cav_gap.max,
             sp.cav_gap.mean,
             sp.cav_gap.std,
             w.t1 > w.t0 ? throughput(log, default_x_star(log, o), w) : nan,
             log.vehicles() > 1 ? vmin : nan,
             aj.a_max,
             aj.a_min,
             aj.j_max,
             aj.j_mean,
             has_e ? emax : nan,
             has_e ? emin : nan,
             sp.theta_safe.max,
             sp.theta_safe.mean,
             sp.theta_safe.std};
  s.extra = {{"platoon_headway_max", sp.platoon_headway.max},
             {"platoon_headway_mean", sp.platoon_headway.mean},
             {"platoon_headway_std", sp.platoon_headway.std},
             {"energy_fleet", en.fleet.value_or(nan)},
             {"follower_speed_variance", follower_speed_variance(log)},
             {"collided", log.collided ? 1.0 : 0.0},
             {"duration", log.end_time() - log.start_time()}};
  return s;
}

// Bitwise equality, so NaN columns compare equal to themselves.
inline bool identical(const Summary& a, const Summary& b) {
  auto same = [](double x, double y) { return std::isnan(x) ? std::isnan(y) : x == y; };
  if (a.label != b.label || a.extra.size() != b.extra.size()) return false;
  for (std::size_t k = 0; k < a.table.size(); ++k)
    if (!same(a.table[k], b.table[k])) return false;
  for (const auto& [key, x] : a.extra) {
    auto it = b.extra.find(key);
    if (it == b.extra.end() || !same(x, it->second)) return false;
  }
  return true;
}

}  // namespace nstw::eval
