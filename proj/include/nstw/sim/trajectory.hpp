#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nstw/core.hpp"

namespace nstw::sim {

enum class ScenarioTag { Integrated, HighSpeed, LowSpeed, RapidAccel, EmergencyBrake, Custom };

inline const char* to_string(ScenarioTag t) {
  switch (t) {
    case ScenarioTag::Integrated: return "integrated";
    case ScenarioTag::HighSpeed: return "high-speed";
    case ScenarioTag::LowSpeed: return "low-speed";
    case ScenarioTag::RapidAccel: return "rapid-accel";
    case ScenarioTag::EmergencyBrake: return "emergency-brake";
    case ScenarioTag::Custom: return "custom";
  }
  return "custom";
}

inline ScenarioTag scenario_tag_from_string(const std::string& s) {
  for (auto t : {ScenarioTag::Integrated, ScenarioTag::HighSpeed, ScenarioTag::LowSpeed,
                 ScenarioTag::RapidAccel, ScenarioTag::EmergencyBrake, ScenarioTag::Custom})
    if (s == to_string(t)) return t;
  throw ConfigError("unknown trajectory scenario '" + s + "'");
}

struct SpeedSample {
  double t = 0.0;
  double v = 0.0;
};

class LeaderTrajectory {
 public:
  LeaderTrajectory() = default;

  LeaderTrajectory(std::vector<SpeedSample> samples, ScenarioTag tag = ScenarioTag::Custom)
      : samples_(std::move(samples)), tag_(tag) {
    validate();
  }

  const std::vector<SpeedSample>& samples() const { return samples_; }
  ScenarioTag tag() const { return tag_; }
  bool empty() const { return samples_.empty(); }
  double start_time() const { return samples_.front().t; }
  double end_time() const { return samples_.back().t; }
  double duration() const { return end_time() - start_time(); }

  // Linear interpolation; held constant outside the sampled range.
  double speed_at(double t) const {
    if (samples_.empty()) throw ConfigError("empty leader trajectory");
    if (t <= samples_.front().t) return samples_.front().v;
    if (t >= samples_.back().t) return samples_.back().v;
    auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                               [](double x, const SpeedSample& s) { return x < s.t; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double w = (t - lo.t) / (hi.t - lo.t);
    return lo.v + w * (hi.v - lo.v);
  }

  // Resampled copy on a uniform grid of spacing dt.
  LeaderTrajectory resampled(double dt) const {
    std::vector<SpeedSample> out;
    const auto n = static_cast<std::size_t>(std::floor(duration() / dt + 1e-9));
    out.reserve(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      const double t = start_time() + static_cast<double>(k) * dt;
      out.push_back({t, speed_at(t)});
    }
    return LeaderTrajectory(std::move(out), tag_);
  }

 private:
  void validate() const {
    if (samples_.empty()) throw ConfigError("leader trajectory has no samples");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
      const auto& s = samples_[i];
      if (!std::isfinite(s.t) || !std::isfinite(s.v))
        throw ConfigError("leader trajectory sample " + std::to_string(i) + " is not finite");
      if (s.v < 0.0 || s.v > kMaxSpeed)
        throw ConfigError("leader trajectory speed out of [0, 40] at sample " + std::to_string(i));
      if (i > 0 && !(s.t > samples_[i - 1].t))
        throw ConfigError("leader trajectory times not strictly increasing at sample " +
                          std::to_string(i));
    }
  }

  std::vector<SpeedSample> samples_;
  ScenarioTag tag_ = ScenarioTag::Custom;
};

// ---- procedural profiles ----

struct AccelSegment {
  double accel;     // m/s^2
  double duration;  // s
};

// Integrates a piecewise-constant acceleration schedule from v0 at resolution dt.
inline LeaderTrajectory piecewise_profile(double v0, const std::vector<AccelSegment>& segments,
                                          ScenarioTag tag, double dt = 0.1) {
  std::vector<SpeedSample> out;
  double t = 0.0;
  double v = v0;
  out.push_back({t, v});
  for (const auto& seg : segments) {
    const auto n = static_cast<int>(std::lround(seg.duration / dt));
    for (int k = 0; k < n; ++k) {
      t += dt;
      v = std::clamp(v + seg.accel * dt, 0.0, kMaxSpeed);
      out.push_back({t, v});
    }
  }
  return LeaderTrajectory(std::move(out), tag);
}

// v(t) = mean + amplitude * sin(2*pi*t/period + phase).
inline LeaderTrajectory sinusoid_profile(double mean, double amplitude, double period, double duration,
                                         double phase = 0.0, double dt = 0.1) {
  std::vector<SpeedSample> out;
  const auto n = static_cast<int>(std::lround(duration / dt));
  out.reserve(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    const double v = mean + amplitude * std::sin(2.0 * std::numbers::pi * t / period + phase);
    out.push_back({t, std::clamp(v, 0.0, kMaxSpeed)});
  }
  return LeaderTrajectory(std::move(out), ScenarioTag::Custom);
}

// Cruise near 30 m/s with a mild 40 s oscillation, 120 s.
inline LeaderTrajectory high_speed_profile(double dt = 0.1) {
  auto t = sinusoid_profile(30.0, 1.5, 40.0, 120.0, 0.0, dt);
  return LeaderTrajectory(t.samples(), ScenarioTag::HighSpeed);
}

// Crawl around 6 m/s with a 30 s oscillation, 120 s.
inline LeaderTrajectory low_speed_profile(double dt = 0.1) {
  auto t = sinusoid_profile(6.0, 2.0, 30.0, 120.0, 0.0, dt);
  return LeaderTrajectory(t.samples(), ScenarioTag::LowSpeed);
}

// 8 m/s, then +2 m/s^2 up to 30 m/s, then hold. 120 s.
inline LeaderTrajectory rapid_accel_profile(double dt = 0.1) {
  return piecewise_profile(8.0, {{0.0, 20.0}, {2.0, 11.0}, {0.0, 89.0}}, ScenarioTag::RapidAccel, dt);
}

// 25 m/s, brake at -4 m/s^2 to 2 m/s, hold 10 s, recover at +1.5 m/s^2. 120 s.
inline LeaderTrajectory emergency_brake_profile(double dt = 0.1) {
  return piecewise_profile(25.0, {{0.0, 30.0}, {-4.0, 5.75}, {0.0, 10.0}, {1.5, 15.3}, {0.0, 58.95}},
                           ScenarioTag::EmergencyBrake, dt);
}

// Mixed cruise, acceleration, hard braking, low-speed and recovery phases. ~180 s.
inline LeaderTrajectory integrated_profile(double dt = 0.1) {
  return piecewise_profile(20.0,
                           {{0.0, 30.0},
                            {1.5, 6.7},
                            {0.0, 40.0},
                            {-4.0, 6.3},
                            {0.0, 15.0},
                            {2.0, 7.5},
                            {-1.0, 12.0},
                            {0.0, 20.0},
                            {1.0, 12.0},
                            {0.0, 30.0}},
                           ScenarioTag::Integrated, dt);
}

inline LeaderTrajectory builtin_profile(ScenarioTag tag, double dt = 0.1) {
  switch (tag) {
    case ScenarioTag::Integrated: return integrated_profile(dt);
    case ScenarioTag::HighSpeed: return high_speed_profile(dt);
    case ScenarioTag::LowSpeed: return low_speed_profile(dt);
    case ScenarioTag::RapidAccel: return rapid_accel_profile(dt);
    case ScenarioTag::EmergencyBrake: return emergency_brake_profile(dt);
    case ScenarioTag::Custom: break;
  }
  throw ConfigError("no built-in profile for tag 'custom'");
}

// ---- t,v CSV ----

inline LeaderTrajectory parse_trajectory_csv(std::istream& in, ScenarioTag tag = ScenarioTag::Custom) {
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<SpeedSample> samples;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      std::string h;
      for (char c : line)
        if (!std::isspace(static_cast<unsigned char>(c))) h.push_back(c);
      if (h != "t,v") throw ConfigError("trajectory line " + std::to_string(line_no) + ": expected header 't,v'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("trajectory line " + std::to_string(line_no) + ": expected 't,v'");
    try {
      samples.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw ConfigError("trajectory line " + std::to_string(line_no) + ": not a number");
    }
  }
  if (!header) throw ConfigError("trajectory: missing header 't,v'");
  return LeaderTrajectory(std::move(samples), tag);
}

inline LeaderTrajectory load_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("trajectory file not found: " + path);
  return parse_trajectory_csv(in);
}

inline void write_trajectory_csv(std::ostream& out, const LeaderTrajectory& traj) {
  out << "t,v\n" << std::setprecision(17);
  for (const auto& s : traj.samples()) out << s.t << ',' << s.v << '\n';
}

}  // namespace nstw::sim
