#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <string>

#include "nstw/core.hpp"
#include "nstw/nn/params.hpp"

namespace nstw::rl {

enum class Ablation { DDPG, MGAT, STW, NSTW };

inline const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::DDPG: return "ddpg";
    case Ablation::MGAT: return "mgat";
    case Ablation::STW: return "stw";
    case Ablation::NSTW: return "nstw";
  }
  return "nstw";
}

inline Ablation ablation_from_string(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto a : {Ablation::DDPG, Ablation::MGAT, Ablation::STW, Ablation::NSTW})
    if (s == to_string(a)) return a;
  throw ConfigError("unknown ablation '" + s + "' (expected ddpg|mgat|stw|nstw)");
}

inline bool uses_graph(Ablation a) { return a != Ablation::DDPG; }
inline bool uses_st_weights(Ablation a) { return a == Ablation::STW || a == Ablation::NSTW; }
inline bool uses_ff_pass(Ablation a) { return a == Ablation::NSTW; }

struct ModelConfig {
  int heads = 4;
  int head_width = 16;
  int hidden = 128;  // width of the actor and critic hidden layers
  double slope = 0.2;
  double actor_out_init = 0.0;  // > 0: actor output layer drawn from U(-x, x) instead of fan-in

  void validate() const {
    if (heads < 1 || head_width < 1 || hidden < 1) throw ConfigError("model widths must be >= 1");
    if (!(actor_out_init >= 0)) throw ConfigError("model.actor_out_init must be >= 0");
  }
};

struct TrainConfig {
  std::int64_t total_steps = 900000;
  int batch = 64;
  std::int64_t exploration_steps = 600000;
  double noise_start = 0.5;
  double noise_end = 7.5e-3;
  double lr = 7.5e-3;
  double actor_lr = 0.0;   // 0 means: use lr
  double critic_lr = 0.0;  // 0 means: use lr
  nn::UpdateRule rule = nn::UpdateRule::GradientDescent;
  double clip_norm = 0.0;
  double tau = 7.5e-2;
  double gamma = 0.99;
  std::size_t replay_capacity = 100000;
  double reward_scale = 1.0;  // applied to stored rewards inside the critic target
  bool encoder_from_critic = true;
  bool encoder_from_actor = true;
  std::int64_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::uint64_t seed = 1;
  Ablation ablation = Ablation::NSTW;

  double effective_actor_lr() const { return actor_lr > 0 ? actor_lr : lr; }
  double effective_critic_lr() const { return critic_lr > 0 ? critic_lr : lr; }

  void validate() const {
    if (total_steps < 1) throw ConfigError("train.total_steps must be >= 1");
    if (batch < 1) throw ConfigError("train.batch must be >= 1");
    if (exploration_steps < 1) throw ConfigError("train.exploration_steps must be >= 1");
    if (!(noise_start > 0) || !(noise_end > 0)) throw ConfigError("noise levels must be > 0");
    if (noise_end > noise_start) throw ConfigError("train.noise_end must not exceed train.noise_start");
    if (!(lr > 0) || actor_lr < 0 || critic_lr < 0) throw ConfigError("learning rates must be > 0");
    if (!(tau > 0 && tau <= 1)) throw ConfigError("train.tau must lie in (0, 1]");
    if (!(gamma > 0 && gamma < 1)) throw ConfigError("train.gamma must lie in (0, 1)");
    if (replay_capacity < static_cast<std::size_t>(batch))
      throw ConfigError("train.replay_capacity must hold at least one batch");
    if (!(reward_scale > 0)) throw ConfigError("train.reward_scale must be > 0");
    if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  }
};

// Linear decay from noise_start to noise_end over exploration_steps, then flat.
inline double anneal_noise(std::int64_t step, const TrainConfig& c) {
  if (step < 0) throw DomainError("anneal_noise: step must be >= 0");
  if (step >= c.exploration_steps) return c.noise_end;
  const double f = static_cast<double>(step) / static_cast<double>(c.exploration_steps);
  return c.noise_start + f * (c.noise_end - c.noise_start);
}

}  // namespace nstw::rl
