#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nstw/eval/metrics.hpp"
#include "nstw/rl/config.hpp"
#include "nstw/rl/env.hpp"
#include "nstw/sim/trajectory.hpp"

namespace nstw::cli {

using json = nlohmann::json;

// Everything one run needs. Serialized as a flat object of dotted keys.
struct RunConfig {
  sim::ScenarioConfig scenario;
  double penetration = 0.0;  // percent CAVs of 201 vehicles; 0 keeps scenario.groups/avs_per_group
  std::string trajectory = "integrated";
  rl::TrainConfig train;
  rl::ModelConfig model;
  reward::RewardParams reward;
  graph::StWeightParams st;
  graph::FeatureNorm norm;
  double eval_x_star = std::numeric_limits<double>::quiet_NaN();  // NaN: leader's initial position
  double eval_warmup_fraction = 0.1;

  // The scenario with the penetration rate applied: total vehicles stay at
  // 201, the number of groups follows the CAV share.
  sim::ScenarioConfig effective_scenario() const {
    sim::ScenarioConfig s = scenario;
    if (penetration > 0.0) {
      const double groups = penetration / 100.0 * 200.0;
      const auto g = static_cast<int>(std::lround(groups));
      if (std::abs(groups - g) > 1e-9 || g < 1 || 200 % g != 0)
        throw ConfigError("scenario.penetration: " + std::to_string(penetration) +
                          "% does not split 200 followers into equal groups");
      s.groups = g;
      s.avs_per_group = 200 / g - 1;
    }
    return s;
  }

  rl::EnvConfig env() const {
    rl::EnvConfig e;
    e.scenario = effective_scenario();
    e.reward = reward;
    e.observation.ablation = train.ablation;
    e.observation.st = st;
    e.observation.norm = norm;
    return e;
  }

  eval::MetricsOptions metrics() const {
    eval::MetricsOptions o;
    if (!std::isnan(eval_x_star)) o.x_star = eval_x_star;
    o.warmup_fraction = eval_warmup_fraction;
    return o;
  }

  void validate() const {
    effective_scenario().validate();
    train.validate();
    model.validate();
    reward.validate();
    st.validate();
    if (!(norm.road_length > 0 && norm.speed > 0 && norm.accel > 0 && norm.gap > 0))
      throw ConfigError("norm.* must be > 0");
    if (!(eval_warmup_fraction >= 0 && eval_warmup_fraction < 1))
      throw ConfigError("eval.warmup_fraction must lie in [0, 1)");
  }
};

enum class KeyType { Number, Integer, Bool, String };

struct Key {
  std::string name;
  KeyType type;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

// The documented flat key schema.
inline const std::vector<Key>& keys() {
  using RC = RunConfig;
  static const std::vector<Key> k = [] {
    std::vector<Key> v;
    auto num = [&](std::string name, std::function<double&(RC&)> ref) {
      v.push_back({name, KeyType::Number, [ref](const RC& c) { return json(ref(const_cast<RC&>(c))); },
                   [ref](RC& c, const json& x) { ref(c) = x.get<double>(); }});
    };
    auto integer = [&](std::string name, std::function<std::int64_t(const RC&)> get,
                       std::function<void(RC&, std::int64_t)> set) {
      v.push_back({name, KeyType::Integer, [get](const RC& c) { return json(get(c)); },
                   [set](RC& c, const json& x) { set(c, x.get<std::int64_t>()); }});
    };
    auto boolean = [&](std::string name, std::function<bool&(RC&)> ref) {
      v.push_back({name, KeyType::Bool, [ref](const RC& c) { return json(ref(const_cast<RC&>(c))); },
                   [ref](RC& c, const json& x) { ref(c) = x.get<bool>(); }});
    };
    auto text = [&](std::string name, std::function<std::string(const RC&)> get,
                    std::function<void(RC&, const std::string&)> set) {
      v.push_back({name, KeyType::String, [get](const RC& c) { return json(get(c)); },
                   [set](RC& c, const json& x) { set(c, x.get<std::string>()); }});
    };

    integer("scenario.groups", [](const RC& c) { return c.scenario.groups; },
            [](RC& c, std::int64_t x) { c.scenario.groups = static_cast<int>(x); });
    integer("scenario.avs_per_group", [](const RC& c) { return c.scenario.avs_per_group; },
            [](RC& c, std::int64_t x) { c.scenario.avs_per_group = static_cast<int>(x); });
    num("scenario.spacing", [](RC& c) -> double& { return c.scenario.spacing; });
    num("scenario.road_length", [](RC& c) -> double& { return c.scenario.road_length; });
    num("scenario.dt", [](RC& c) -> double& { return c.scenario.dt; });
    num("scenario.vehicle_length", [](RC& c) -> double& { return c.scenario.vehicle_length; });
    num("scenario.rsu_span", [](RC& c) -> double& { return c.scenario.rsu_span; });
    num("scenario.comm_reach", [](RC& c) -> double& { return c.scenario.comm_reach; });
    num("scenario.collision_penalty", [](RC& c) -> double& { return c.scenario.collision_penalty; });
    num("scenario.penetration", [](RC& c) -> double& { return c.penetration; });
    text("trajectory", [](const RC& c) { return c.trajectory; }, [](RC& c, const std::string& s) { c.trajectory = s; });

    num("idm.desired_speed", [](RC& c) -> double& { return c.scenario.idm.desired_speed; });
    num("idm.time_headway", [](RC& c) -> double& { return c.scenario.idm.time_headway; });
    num("idm.max_accel", [](RC& c) -> double& { return c.scenario.idm.max_accel; });
    num("idm.comfortable_decel", [](RC& c) -> double& { return c.scenario.idm.comfortable_decel; });
    num("idm.accel_exponent", [](RC& c) -> double& { return c.scenario.idm.accel_exponent; });
    num("idm.jam_distance", [](RC& c) -> double& { return c.scenario.idm.jam_distance; });

    num("safety.reaction_time", [](RC& c) -> double& { return c.scenario.safety.reaction_time; });
    num("safety.max_decel", [](RC& c) -> double& { return c.scenario.safety.max_decel; });
    num("safety.min_gap", [](RC& c) -> double& { return c.scenario.safety.min_gap; });
    num("safety.ttc_limit", [](RC& c) -> double& { return c.scenario.safety.ttc_limit; });

    integer("seed", [](const RC& c) { return static_cast<std::int64_t>(c.train.seed); },
            [](RC& c, std::int64_t x) {
              if (x < 0) throw ConfigError("seed must be >= 0");
              c.train.seed = static_cast<std::uint64_t>(x);
            });
    text("ablation", [](const RC& c) { return rl::to_string(c.train.ablation); },
         [](RC& c, const std::string& s) { c.train.ablation = rl::ablation_from_string(s); });
    integer("train.total_steps", [](const RC& c) { return c.train.total_steps; },
            [](RC& c, std::int64_t x) { c.train.total_steps = x; });
    integer("train.batch", [](const RC& c) { return c.train.batch; },
            [](RC& c, std::int64_t x) { c.train.batch = static_cast<int>(x); });
    integer("train.exploration_steps", [](const RC& c) { return c.train.exploration_steps; },
            [](RC& c, std::int64_t x) { c.train.exploration_steps = x; });
    num("train.noise_start", [](RC& c) -> double& { return c.train.noise_start; });
    num("train.noise_end", [](RC& c) -> double& { return c.train.noise_end; });
    num("train.lr", [](RC& c) -> double& { return c.train.lr; });
    num("train.actor_lr", [](RC& c) -> double& { return c.train.actor_lr; });
    num("train.critic_lr", [](RC& c) -> double& { return c.train.critic_lr; });
    text("train.rule", [](const RC& c) { return std::string(c.train.rule == nn::UpdateRule::Adam ? "adam" : "sgd"); },
         [](RC& c, const std::string& s) { c.train.rule = nn::update_rule_from_string(s); });
    num("train.clip_norm", [](RC& c) -> double& { return c.train.clip_norm; });
    num("train.tau", [](RC& c) -> double& { return c.train.tau; });
    num("train.gamma", [](RC& c) -> double& { return c.train.gamma; });
    integer("train.replay_capacity", [](const RC& c) { return static_cast<std::int64_t>(c.train.replay_capacity); },
            [](RC& c, std::int64_t x) {
              if (x < 1) throw ConfigError("train.replay_capacity must be >= 1");
              c.train.replay_capacity = static_cast<std::size_t>(x);
            });
    num("train.reward_scale", [](RC& c) -> double& { return c.train.reward_scale; });
    boolean("train.encoder_from_critic", [](RC& c) -> bool& { return c.train.encoder_from_critic; });
    boolean("train.encoder_from_actor", [](RC& c) -> bool& { return c.train.encoder_from_actor; });
    integer("train.checkpoint_every", [](const RC& c) { return c.train.checkpoint_every; },
            [](RC& c, std::int64_t x) { c.train.checkpoint_every = x; });

    integer("model.heads", [](const RC& c) { return c.model.heads; },
            [](RC& c, std::int64_t x) { c.model.heads = static_cast<int>(x); });
    integer("model.head_width", [](const RC& c) { return c.model.head_width; },
            [](RC& c, std::int64_t x) { c.model.head_width = static_cast<int>(x); });
    integer("model.hidden", [](const RC& c) { return c.model.hidden; },
            [](RC& c, std::int64_t x) { c.model.hidden = static_cast<int>(x); });
    num("model.slope", [](RC& c) -> double& { return c.model.slope; });
    num("model.actor_out_init", [](RC& c) -> double& { return c.model.actor_out_init; });

    num("reward.w_safe", [](RC& c) -> double& { return c.reward.weights.safe; });
    num("reward.w_task", [](RC& c) -> double& { return c.reward.weights.task; });
    num("reward.w_comfort", [](RC& c) -> double& { return c.reward.weights.comfort; });
    num("reward.w_energy", [](RC& c) -> double& { return c.reward.weights.energy; });
    num("reward.desired_gap", [](RC& c) -> double& { return c.reward.desired_gap; });
    num("reward.reference_power", [](RC& c) -> double& { return c.reward.reference_power; });
    num("comfort.c1", [](RC& c) -> double& { return c.reward.comfort.c1; });
    num("comfort.c2", [](RC& c) -> double& { return c.reward.comfort.c2; });
    num("comfort.j_max", [](RC& c) -> double& { return c.reward.comfort.j_max; });
    num("comfort.j_boundary", [](RC& c) -> double& { return c.reward.comfort.j_boundary; });

    num("energy.mass", [](RC& c) -> double& { return c.reward.energy.mass; });
    num("energy.drag_area", [](RC& c) -> double& { return c.reward.energy.drag_area; });
    num("energy.air_density", [](RC& c) -> double& { return c.reward.energy.air_density; });
    num("energy.rolling_coeff", [](RC& c) -> double& { return c.reward.energy.rolling_coeff; });
    num("energy.drivetrain_eff", [](RC& c) -> double& { return c.reward.energy.drivetrain_eff; });
    num("energy.regen_eff", [](RC& c) -> double& { return c.reward.energy.regen_eff; });
    num("energy.regen_cap", [](RC& c) -> double& { return c.reward.energy.regen_cap; });
    num("energy.aux_power", [](RC& c) -> double& { return c.reward.energy.aux_power; });
    num("energy.comm_power", [](RC& c) -> double& { return c.reward.energy.comm_power; });
    num("energy.migration_energy", [](RC& c) -> double& { return c.reward.energy.migration_energy; });
    num("energy.local_compute_power", [](RC& c) -> double& { return c.reward.energy.local_compute_power; });

    num("st.d_max", [](RC& c) -> double& { return c.st.d_max; });
    num("st.v_max", [](RC& c) -> double& { return c.st.v_max; });
    text("st.mode", [](const RC& c) { return std::string(graph::to_string(c.st.mode)); },
         [](RC& c, const std::string& s) { c.st.mode = graph::st_weight_mode_from_string(s); });
    num("norm.road_length", [](RC& c) -> double& { return c.norm.road_length; });
    num("norm.speed", [](RC& c) -> double& { return c.norm.speed; });
    num("norm.accel", [](RC& c) -> double& { return c.norm.accel; });
    num("norm.gap", [](RC& c) -> double& { return c.norm.gap; });

    v.push_back({"eval.x_star", KeyType::Number,
                 [](const RC& c) { return std::isnan(c.eval_x_star) ? json(nullptr) : json(c.eval_x_star); },
                 [](RC& c, const json& x) {
                   c.eval_x_star = x.is_null() ? std::numeric_limits<double>::quiet_NaN() : x.get<double>();
                 }});
    num("eval.warmup_fraction", [](RC& c) -> double& { return c.eval_warmup_fraction; });
    return v;
  }();
  return k;
}

inline const Key& find_key(const std::string& name) {
  for (const auto& k : keys())
    if (k.name == name) return k;
  throw ConfigError("unknown config key '" + name + "'");
}

// Assigns one key, checking the JSON type first so errors name the key.
inline void set_key(RunConfig& c, const std::string& name, const json& value) {
  const auto& k = find_key(name);
  const bool ok = (k.type == KeyType::Number && (value.is_number() || (name == "eval.x_star" && value.is_null()))) ||
                  (k.type == KeyType::Integer && value.is_number_integer()) ||
                  (k.type == KeyType::Bool && value.is_boolean()) || (k.type == KeyType::String && value.is_string());
  if (!ok) {
    static const char* names[] = {"a number", "an integer", "a boolean", "a string"};
    throw ConfigError("config key '" + name + "': expected " + names[static_cast<int>(k.type)] + ", got " +
                      value.dump());
  }
  try {
    k.set(c, value);
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + name + "': " + e.what());
  }
}

// Parses a command-line or environment string according to the key's type.
inline json parse_value(const std::string& name, const std::string& text) {
  const auto& k = find_key(name);
  auto fail = [&] { return ConfigError("config key '" + name + "': cannot parse '" + text + "'"); };
  switch (k.type) {
    case KeyType::String: return text;
    case KeyType::Bool:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw fail();
    case KeyType::Integer: {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(text, &used);
      } catch (const std::exception&) {
        throw fail();
      }
      if (used != text.size()) throw fail();
      return v;
    }
    case KeyType::Number: {
      if (name == "eval.x_star" && (text.empty() || text == "null")) return nullptr;
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        throw fail();
      }
      if (used != text.size()) throw fail();
      return v;
    }
  }
  throw fail();
}

inline json to_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& k : keys()) j[k.name] = k.get(c);
  return j;
}

namespace detail {

inline void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (const auto& [key, value] : j.items()) {
    const auto name = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object())
      flatten(value, name, out);
    else
      out.emplace_back(name, value);
  }
}

}  // namespace detail

// Accepts flat dotted keys or the equivalent nested objects.
inline void apply_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  std::vector<std::pair<std::string, json>> flat;
  detail::flatten(j, "", flat);
  for (const auto& [name, value] : flat) set_key(c, name, value);
}

inline RunConfig load_config_file(const std::string& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config not found: " + path);
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  RunConfig c;
  apply_json(c, j);
  return c;
}

inline std::string env_name(const std::string& key) {
  std::string s = "NSTW_";
  for (char ch : key) s += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

// NSTW_<KEY> with dots as underscores, e.g. NSTW_TRAIN_LR.
inline void apply_env(RunConfig& c) {
  for (const auto& k : keys())
    if (const char* v = std::getenv(env_name(k.name).c_str())) set_key(c, k.name, parse_value(k.name, v));
}

// "key=value"
inline void apply_assignment(RunConfig& c, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + kv + "'");
  const auto name = kv.substr(0, eq);
  set_key(c, name, parse_value(name, kv.substr(eq + 1)));
}

// FNV-1a over the canonical JSON text.
inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(to_json(c).dump())); }

// A built-in scenario name, "sinusoid:mean:amplitude:period:duration", or a t,v CSV path.
inline sim::LeaderTrajectory load_trajectory(const std::string& spec, double dt) {
  if (spec.rfind("sinusoid:", 0) == 0) {
    std::vector<double> p;
    std::stringstream ss(spec.substr(9));
    std::string tok;
    while (std::getline(ss, tok, ':')) {
      try {
        p.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("trajectory '" + spec + "': bad number '" + tok + "'");
      }
    }
    if (p.size() != 4) throw ConfigError("trajectory '" + spec + "': expected sinusoid:mean:amplitude:period:duration");
    return sim::sinusoid_profile(p[0], p[1], p[2], p[3], 0.0, dt);
  }
  for (auto t : {sim::ScenarioTag::Integrated, sim::ScenarioTag::HighSpeed, sim::ScenarioTag::LowSpeed,
                 sim::ScenarioTag::RapidAccel, sim::ScenarioTag::EmergencyBrake})
    if (spec == sim::to_string(t)) return sim::builtin_profile(t, dt);
  if (!std::filesystem::exists(spec)) throw ConfigError("trajectory not found: '" + spec + "'");
  return sim::load_trajectory_csv(spec);
}

inline const std::vector<std::string>& builtin_trajectories() {
  static const std::vector<std::string> names = {"integrated", "high-speed", "low-speed", "rapid-accel",
                                                 "emergency-brake"};
  return names;
}

}  // namespace nstw::cli
