#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nstw/core.hpp"
#include "nstw/nn/layers.hpp"
#include "nstw/rl/config.hpp"
#include "nstw/rl/observation.hpp"
#include "nstw/rl/replay.hpp"

namespace nstw::rl {

// How many times each encoder path ran.
struct EncodeCounters {
  std::int64_t raw_bypass = 0;   // graph-free per-CAV state
  std::int64_t vv_binary = 0;    // V-V attention on 0/1 adjacency
  std::int64_t vv_weighted = 0;  // V-V attention on spatio-temporal weights
  std::int64_t ff_pass = 0;      // F-F attention over platoon nodes
};

// Sampled transitions arranged for one update.
struct TrainingBatch {
  ObservationBatch obs;
  ObservationBatch next;
  Matrix actions;                // (sum of CAVs) x 1, platoon order
  std::vector<double> rewards;   // per sample
  std::vector<double> terminal;  // per sample, 1 for terminal
};

inline TrainingBatch make_batch(const std::vector<const Transition*>& ts) {
  if (ts.empty()) throw DomainError("training batch is empty");
  TrainingBatch b;
  std::vector<const Observation*> o, n;
  std::size_t cavs = 0;
  for (const auto* t : ts) {
    o.push_back(&t->obs);
    n.push_back(&t->next);
    cavs += t->action.size();
    b.rewards.push_back(t->reward);
    b.terminal.push_back(t->terminal ? 1.0 : 0.0);
  }
  b.obs = stack(o);
  b.next = stack(n);
  b.actions.resize(static_cast<Eigen::Index>(cavs), 1);
  Eigen::Index r = 0;
  for (const auto* t : ts)
    for (double a : t->action) b.actions(r++, 0) = a;
  return b;
}

class Agent {
 public:
  static constexpr int kRawWidth = graph::kVehicleFeatures + graph::kPlatoonFeatures;

  Agent(Ablation ablation, const ModelConfig& model, std::uint64_t seed) : ablation_(ablation), model_(model) {
    model.validate();
    std::mt19937_64 rng(seed);
    vv1_ = {graph::kVehicleFeatures, model.heads, model.head_width, model.slope, false, nn::Activation::Elu};
    vv2_ = {vv1_.out_width(), model.heads, model.head_width, model.slope, true, nn::Activation::Tanh};
    ff1_ = {graph::kPlatoonFeatures + vv2_.out_width(), model.heads, model.head_width, model.slope, false,
            nn::Activation::Elu};
    ff2_ = {ff1_.out_width(), model.heads, model.head_width, model.slope, true, nn::Activation::Tanh};
    if (uses_graph(ablation)) {
      nn::init_gat(online_, "enc/vv1", vv1_, rng);
      nn::init_gat(online_, "enc/vv2", vv2_, rng);
    }
    if (uses_ff_pass(ablation)) {
      nn::init_gat(online_, "enc/ff1", ff1_, rng);
      nn::init_gat(online_, "enc/ff2", ff2_, rng);
    }
    actor_spec_ = {{feature_width(), model.hidden, model.hidden, 1},
                   nn::Activation::Relu,
                   nn::Activation::Tanh,
                   kAccelMax};
    critic_spec_ = {{feature_width() + 1, model.hidden, model.hidden, 1},
                    nn::Activation::Relu,
                    nn::Activation::Identity,
                    1.0};
    nn::init_mlp(online_, "actor", actor_spec_, rng);
    nn::init_mlp(online_, "critic", critic_spec_, rng);
    if (model.actor_out_init > 0) {
      // Rescale the fan-in draw so the default stream is untouched.
      const std::string last = "actor/l" + std::to_string(actor_spec_.widths.size() - 2);
      const double k = model.actor_out_init * std::sqrt(static_cast<double>(model.hidden));
      online_.at(last + "/W").value *= k;
      online_.at(last + "/b").value *= k;
    }
    target_ = nn::clone_values(online_);
  }

  Ablation ablation() const { return ablation_; }
  const ModelConfig& model() const { return model_; }

  // Width of one fused feature row.
  int feature_width() const {
    switch (ablation_) {
      case Ablation::DDPG: return kRawWidth;
      case Ablation::MGAT:
      case Ablation::STW: return vv2_.out_width() + graph::kPlatoonFeatures;
      case Ablation::NSTW: return vv2_.out_width() + ff2_.out_width();
    }
    return kRawWidth;
  }

  nn::ParameterStore& online() { return online_; }
  nn::ParameterStore& target() { return target_; }
  const nn::ParameterStore& online() const { return online_; }
  const nn::ParameterStore& target() const { return target_; }
  const EncodeCounters& counters() const { return counters_; }

  // Fused per-CAV features, one row per platoon in batch order.
  nn::Var encode(nn::Tape& t, nn::ParameterStore& s, const ObservationBatch& b, bool track) {
    if (ablation_ == Ablation::DDPG) {
      ++counters_.raw_bypass;
      Matrix raw(b.platoons(), kRawWidth);
      for (int p = 0; p < b.platoons(); ++p)
        raw.row(p) << b.vv_features.row(b.cav_rows[static_cast<std::size_t>(p)]), b.ff_features.row(p);
      return t.constant(std::move(raw));
    }
    if (uses_st_weights(ablation_))
      ++counters_.vv_weighted;
    else
      ++counters_.vv_binary;
    const auto injection = uses_st_weights(ablation_) ? nn::EdgeInjection::LogWeight : nn::EdgeInjection::MaskOnly;
    nn::Var h = nn::gat_layer(t, s, "enc/vv1", vv1_, t.constant(b.vv_features), b.vv_nb, injection, track);
    h = nn::gat_layer(t, s, "enc/vv2", vv2_, h, b.vv_nb, injection, track);
    nn::Var cav = nn::gather_rows(t, h, b.cav_rows);
    if (!uses_ff_pass(ablation_)) return nn::concat_cols(t, cav, t.constant(b.ff_features));

    ++counters_.ff_pass;
    nn::Var pooled = nn::segment_reduce(t, h, b.vehicle_platoon, b.platoons(), true);
    nn::Var f = nn::concat_cols(t, t.constant(b.ff_features), pooled);
    f = nn::gat_layer(t, s, "enc/ff1", ff1_, f, b.ff_nb, nn::EdgeInjection::MaskOnly, track);
    f = nn::gat_layer(t, s, "enc/ff2", ff2_, f, b.ff_nb, nn::EdgeInjection::MaskOnly, track);
    return nn::concat_cols(t, cav, f);
  }

  // Deterministic policy, one acceleration per feature row.
  nn::Var actor(nn::Tape& t, nn::ParameterStore& s, nn::Var features, bool track) {
    return nn::mlp(t, s, "actor", actor_spec_, features, track);
  }

  // Joint value per sample: the sum of per-CAV values q(F_i, a_i / 4.5).
  nn::Var critic(nn::Tape& t, nn::ParameterStore& s, nn::Var features, nn::Var actions, const ObservationBatch& b,
                 bool track) {
    nn::Var in = nn::concat_cols(t, features, nn::scale(t, actions, 1.0 / kAccelMax));
    nn::Var q = nn::mlp(t, s, "critic", critic_spec_, in, track);
    return nn::segment_reduce(t, q, b.platoon_sample, b.samples, false);
  }

  std::vector<double> policy(const Observation& o) {
    const auto b = stack({&o});
    nn::Tape t;
    const Matrix a = t.value(actor(t, online_, encode(t, online_, b, false), false));
    return {a.data(), a.data() + a.size()};
  }

  // Policy output plus independent Gaussian noise per CAV, clipped to the action bounds.
  std::vector<double> select_action(const Observation& o, double noise_std, std::mt19937_64& rng) {
    auto a = policy(o);
    if (noise_std > 0.0) {
      std::normal_distribution<double> n(0.0, noise_std);
      for (auto& x : a) x += n(rng);
    }
    for (auto& x : a) x = clamp_accel(x);
    return a;
  }

  // Mean squared TD error. Targets come from the target stores and are constants.
  nn::Var critic_loss(nn::Tape& t, const TrainingBatch& b, const TrainConfig& c) {
    Matrix y(b.obs.samples, 1);
    {
      nn::Tape tt;
      nn::Var f2 = encode(tt, target_, b.next, false);
      nn::Var a2 = actor(tt, target_, f2, false);
      const Matrix q2 = tt.value(critic(tt, target_, f2, a2, b.next, false));
      for (int s = 0; s < b.obs.samples; ++s) {
        const auto k = static_cast<std::size_t>(s);
        y(s, 0) = c.reward_scale * b.rewards[k] + c.gamma * (1.0 - b.terminal[k]) * q2(s, 0);
      }
    }
    nn::Var f = encode(t, online_, b.obs, c.encoder_from_critic);
    nn::Var q = critic(t, online_, f, t.constant(b.actions), b.obs, true);
    return nn::mse(t, q, y);
  }

  // Negative mean joint value of the current policy; the critic is held fixed.
  nn::Var actor_loss(nn::Tape& t, const TrainingBatch& b, const TrainConfig& c) {
    nn::Var f = encode(t, online_, b.obs, c.encoder_from_actor);
    nn::Var a = actor(t, online_, f, true);
    nn::Var q = critic(t, online_, f, a, b.obs, false);
    return nn::scale(t, nn::mean(t, q), -1.0);
  }

  double critic_update(const TrainingBatch& b, const TrainConfig& c) {
    nn::Tape t;
    nn::Var loss = critic_loss(t, b, c);
    t.backward(loss);
    const auto opt = optimizer(c, c.effective_critic_lr());
    nn::apply_update(online_, opt, "critic/");
    if (c.encoder_from_critic) nn::apply_update(online_, opt, "enc/");
    online_.zero_grad();
    return t.value(loss)(0, 0);
  }

  // Returns the mean joint value before the step.
  double actor_update(const TrainingBatch& b, const TrainConfig& c) {
    nn::Tape t;
    nn::Var loss = actor_loss(t, b, c);
    t.backward(loss);
    const auto opt = optimizer(c, c.effective_actor_lr());
    nn::apply_update(online_, opt, "actor/");
    if (c.encoder_from_actor) nn::apply_update(online_, opt, "enc/");
    online_.zero_grad();
    return -t.value(loss)(0, 0);
  }

  void soft_update(double tau) { nn::soft_update(target_, online_, tau); }

 private:
  static nn::OptimizerConfig optimizer(const TrainConfig& c, double lr) {
    nn::OptimizerConfig o;
    o.rule = c.rule;
    o.lr = lr;
    o.clip_norm = c.clip_norm;
    return o;
  }

  Ablation ablation_;
  ModelConfig model_;
  nn::GatSpec vv1_, vv2_, ff1_, ff2_;
  nn::MlpSpec actor_spec_, critic_spec_;
  nn::ParameterStore online_, target_;
  EncodeCounters counters_;
};

}  // namespace nstw::rl
