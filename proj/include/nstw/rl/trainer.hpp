#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nstw/nn/checkpoint.hpp"
#include "nstw/rl/agent.hpp"
#include "nstw/rl/env.hpp"

namespace nstw::rl {

struct EpisodeRecord {
  int episode = 0;
  std::int64_t steps = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  int collisions = 0;
  double noise_std = 0.0;
};

inline void write_episode_header(std::ostream& o) { o << "episode,steps,mean_reward,std_reward,collisions,noise_std\n"; }

inline void write_episode_row(std::ostream& o, const EpisodeRecord& e) {
  o << e.episode << ',' << e.steps << ',' << std::setprecision(17) << e.mean_reward << ',' << e.std_reward << ','
    << e.collisions << ',' << e.noise_std << '\n';
}

struct RunOptions {
  std::string run_dir;       // empty: keep everything in memory
  std::string config_hash;
  nlohmann::json config;     // recorded in the manifest
  std::function<void(const EpisodeRecord&)> on_episode;
};

struct TrainResult {
  std::vector<EpisodeRecord> episodes;
  std::vector<std::string> checkpoints;
  EncodeCounters counters;
  std::int64_t steps = 0;
  std::int64_t updates = 0;
};

// Independent generator streams derived from one seed.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint32_t which) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), which};
  return std::mt19937_64(seq);
}

inline nn::CheckpointMeta checkpoint_meta(const Agent& agent, const EnvConfig& env, const TrainConfig& tc,
                                          const std::string& config_hash, std::int64_t step) {
  nn::CheckpointMeta m;
  m.config_hash = config_hash;
  m.values = {{"step", static_cast<double>(step)},
              {"seed", static_cast<double>(tc.seed)},
              {"ablation", static_cast<double>(static_cast<int>(agent.ablation()))},
              {"model.heads", agent.model().heads},
              {"model.head_width", agent.model().head_width},
              {"model.hidden", agent.model().hidden},
              {"model.slope", agent.model().slope},
              {"norm.road_length", env.observation.norm.road_length},
              {"norm.speed", env.observation.norm.speed},
              {"norm.accel", env.observation.norm.accel},
              {"norm.gap", env.observation.norm.gap},
              {"st.d_max", env.observation.st.d_max},
              {"st.v_max", env.observation.st.v_max},
              {"st.mode", env.observation.st.mode == graph::StWeightMode::AsWritten ? 0.0 : 1.0}};
  return m;
}

inline void save_agent(const std::string& path, const Agent& agent, const nn::CheckpointMeta& meta) {
  nn::save_checkpoint(path, meta, {{"online", &agent.online()}, {"target", &agent.target()}});
}

struct LoadedAgent {
  Agent agent;
  nn::CheckpointMeta meta;
  ObservationSpec observation;
};

// Rebuilds the agent described by a checkpoint and loads its parameters.
inline LoadedAgent load_agent(const std::string& path) {
  const auto meta = nn::load_checkpoint(path, {});
  auto get = [&](const char* k) {
    auto it = meta.values.find(k);
    if (it == meta.values.end()) throw StructureError(std::string("checkpoint: missing metadata '") + k + "'");
    return it->second;
  };
  ModelConfig model;
  model.heads = static_cast<int>(get("model.heads"));
  model.head_width = static_cast<int>(get("model.head_width"));
  model.hidden = static_cast<int>(get("model.hidden"));
  model.slope = get("model.slope");
  const auto ablation = static_cast<Ablation>(static_cast<int>(get("ablation")));
  LoadedAgent out{Agent(ablation, model, 0), meta, {}};
  nn::load_checkpoint(path, {{"online", &out.agent.online()}, {"target", &out.agent.target()}});
  out.observation.ablation = ablation;
  out.observation.norm = {get("norm.road_length"), get("norm.speed"), get("norm.accel"), get("norm.gap")};
  out.observation.st.d_max = get("st.d_max");
  out.observation.st.v_max = get("st.v_max");
  out.observation.st.mode = get("st.mode") == 0.0 ? graph::StWeightMode::AsWritten : graph::StWeightMode::ProseConsistent;
  return out;
}

namespace detail {

inline void dump_batch(const std::string& path, const TrainingBatch& b, const std::string& what) {
  nlohmann::json j;
  j["error"] = what;
  j["rewards"] = b.rewards;
  j["terminal"] = b.terminal;
  j["actions"] = std::vector<double>(b.actions.data(), b.actions.data() + b.actions.size());
  std::vector<double> flat;
  for (Eigen::Index r = 0; r < b.obs.vv_features.rows(); ++r)
    for (Eigen::Index c = 0; c < b.obs.vv_features.cols(); ++c) flat.push_back(b.obs.vv_features(r, c));
  j["vv_features_rowmajor"] = flat;
  j["vv_features_cols"] = b.obs.vv_features.cols();
  std::ofstream(path) << j.dump(1) << '\n';
}

}  // namespace detail

// Algorithm loop: act with annealed noise, step, store, then one critic step,
// one actor step and one target soft update per environment step once the
// buffer holds a full batch.
inline TrainResult train(const TrainConfig& tc, const ModelConfig& model, const EnvConfig& env_cfg,
                         const sim::LeaderTrajectory& traj, const RunOptions& opts = {}) {
  tc.validate();
  EnvConfig ec = env_cfg;
  ec.observation.ablation = tc.ablation;
  PlatoonEnv env(ec, traj);
  Agent agent(tc.ablation, model, stream(tc.seed, 0)());
  auto noise_rng = stream(tc.seed, 1);
  auto sample_rng = stream(tc.seed, 2);
  ReplayBuffer buffer(tc.replay_capacity);

  namespace fs = std::filesystem;
  std::ofstream log;
  if (!opts.run_dir.empty()) {
    fs::create_directories(opts.run_dir);
    log.open(fs::path(opts.run_dir) / "episodes.csv");
    write_episode_header(log);
  }

  TrainResult result;
  auto checkpoint = [&](std::int64_t step) {
    if (opts.run_dir.empty()) return;
    const auto path = (fs::path(opts.run_dir) / ("ckpt_" + std::to_string(step) + ".bin")).string();
    save_agent(path, agent, checkpoint_meta(agent, env.config(), tc, opts.config_hash, step));
    result.checkpoints.push_back(path);
  };

  std::int64_t step = 0;
  int episode = 0;
  while (step < tc.total_steps) {
    env.reset();
    Observation obs = env.observe();
    std::vector<double> rewards;
    int collisions = 0;
    double noise = anneal_noise(step, tc);
    while (step < tc.total_steps) {
      noise = anneal_noise(step, tc);
      auto action = agent.select_action(obs, noise, noise_rng);
      auto out = env.step(action);
      Transition tr;
      tr.action = action;
      tr.reward = out.reward.global;
      tr.terminal = out.terminal;
      Observation next = out.terminal ? obs : env.observe();
      tr.obs = std::move(obs);
      tr.next = next;
      buffer.add(std::move(tr));
      rewards.push_back(out.reward.global);
      ++step;

      if (buffer.size() >= static_cast<std::size_t>(tc.batch)) {
        const auto batch = make_batch(buffer.sample(static_cast<std::size_t>(tc.batch), sample_rng));
        try {
          agent.critic_update(batch, tc);
          agent.actor_update(batch, tc);
          agent.online().require_finite();
        } catch (const NumericError& e) {
          std::string msg = e.what();
          if (!opts.run_dir.empty()) {
            const auto path = (fs::path(opts.run_dir) / "nan_batch.json").string();
            detail::dump_batch(path, batch, msg);
            msg += " (offending batch written to " + path + ")";
          }
          throw NumericError("training diverged at step " + std::to_string(step) + ": " + msg);
        }
        agent.soft_update(tc.tau);
        ++result.updates;
      }
      if (tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0 && step < tc.total_steps) checkpoint(step);
      if (out.terminal) {
        ++collisions;
        break;
      }
      if (out.truncated) break;
      obs = std::move(next);
    }
    EpisodeRecord rec;
    rec.episode = episode++;
    rec.steps = static_cast<std::int64_t>(rewards.size());
    double sum = 0.0;
    for (double r : rewards) sum += r;
    rec.mean_reward = rewards.empty() ? 0.0 : sum / static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - rec.mean_reward) * (r - rec.mean_reward);
    rec.std_reward = rewards.empty() ? 0.0 : std::sqrt(var / static_cast<double>(rewards.size()));
    rec.collisions = collisions;
    rec.noise_std = noise;
    result.episodes.push_back(rec);
    if (log) {
      write_episode_row(log, rec);
      log.flush();
    }
    if (opts.on_episode) opts.on_episode(rec);
  }
  checkpoint(step);
  result.steps = step;
  result.counters = agent.counters();

  if (!opts.run_dir.empty()) {
    nlohmann::json m;
    m["config_hash"] = opts.config_hash;
    m["seed"] = tc.seed;
    m["ablation"] = to_string(tc.ablation);
    m["steps"] = step;
    m["episodes"] = result.episodes.size();
    std::vector<std::string> names;
    for (const auto& c : result.checkpoints) names.push_back(fs::path(c).filename().string());
    m["checkpoints"] = names;
    m["encode_counters"] = {{"raw_bypass", result.counters.raw_bypass},
                            {"vv_binary", result.counters.vv_binary},
                            {"vv_weighted", result.counters.vv_weighted},
                            {"ff_pass", result.counters.ff_pass}};
    if (!opts.config.is_null()) m["config"] = opts.config;
    std::ofstream(fs::path(opts.run_dir) / "manifest.json") << m.dump(2) << '\n';
  }
  return result;
}

}  // namespace nstw::rl
