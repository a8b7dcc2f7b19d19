#pragma once

#include <random>
#include <string>
#include <vector>

#include "nstw/nn/gat.hpp"
#include "nstw/nn/params.hpp"
#include "nstw/nn/tape.hpp"

namespace nstw::nn {

enum class Activation { Identity, Tanh, Relu, LeakyRelu, Elu };

inline Var activate(Tape& t, Var x, Activation act, double slope = 0.2) {
  switch (act) {
    case Activation::Identity: return x;
    case Activation::Tanh: return tanh(t, x);
    case Activation::Relu: return relu(t, x);
    case Activation::LeakyRelu: return leaky_relu(t, x, slope);
    case Activation::Elu: return elu(t, x);
  }
  return x;
}

// ---- dense ----

inline void init_dense(ParameterStore& s, const std::string& name, int in, int out, std::mt19937_64& rng) {
  s.add(name + "/W", fan_in_uniform(in, out, in, rng));
  s.add(name + "/b", fan_in_uniform(1, out, in, rng));
}

// x (rows x in) -> x W + b
inline Var dense(Tape& t, ParameterStore& s, const std::string& name, Var x, bool track = true) {
  return add_row(t, matmul(t, x, t.param(s.at(name + "/W"), track)), t.param(s.at(name + "/b"), track));
}

struct MlpSpec {
  std::vector<int> widths;  // input, hidden..., output
  Activation hidden = Activation::Relu;
  Activation output = Activation::Identity;
  double output_scale = 1.0;  // applied after the output activation
};

inline void init_mlp(ParameterStore& s, const std::string& prefix, const MlpSpec& spec, std::mt19937_64& rng) {
  if (spec.widths.size() < 2) throw ConfigError("mlp needs at least input and output widths");
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l)
    init_dense(s, prefix + "/l" + std::to_string(l), spec.widths[l], spec.widths[l + 1], rng);
}

inline Var mlp(Tape& t, ParameterStore& s, const std::string& prefix, const MlpSpec& spec, Var x, bool track = true) {
  if (t.value(x).cols() != spec.widths.front())
    throw StructureError("mlp '" + prefix + "': input width " + std::to_string(t.value(x).cols()) + " != " +
                         std::to_string(spec.widths.front()));
  const std::size_t layers = spec.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    x = dense(t, s, prefix + "/l" + std::to_string(l), x, track);
    x = activate(t, x, l + 1 == layers ? spec.output : spec.hidden);
  }
  if (spec.output_scale != 1.0) x = scale(t, x, spec.output_scale);
  return x;
}

// Forward pass without gradient tracking.
inline Matrix mlp_forward(ParameterStore& s, const std::string& prefix, const MlpSpec& spec, const Matrix& x) {
  Tape t;
  return t.value(mlp(t, s, prefix, spec, t.constant(x), false));
}

// ---- graph attention layer ----

struct GatSpec {
  int in = 0;
  int heads = 4;
  int head_width = 16;
  double slope = 0.2;
  bool final_layer = false;  // average heads instead of concatenating
  Activation activation = Activation::Elu;

  int out_width() const { return final_layer ? head_width : heads * head_width; }
};

inline void init_gat(ParameterStore& s, const std::string& name, const GatSpec& spec, std::mt19937_64& rng) {
  if (spec.heads < 1 || spec.head_width < 1 || spec.in < 1) throw ConfigError("gat '" + name + "': bad widths");
  s.add(name + "/W", fan_in_uniform(spec.in, spec.heads * spec.head_width, spec.in, rng));
  s.add(name + "/a_src", fan_in_uniform(spec.heads, spec.head_width, spec.head_width, rng));
  s.add(name + "/a_dst", fan_in_uniform(spec.heads, spec.head_width, spec.head_width, rng));
}

// sigma(heads-combined attention aggregation of x W).
inline Var gat_layer(Tape& t, ParameterStore& s, const std::string& name, const GatSpec& spec, Var x,
                     const Neighborhoods& nb, EdgeInjection injection, bool track = true,
                     AttentionTrace* trace = nullptr) {
  Var z = matmul(t, x, t.param(s.at(name + "/W"), track));
  Var agg = graph_attention(t, z, t.param(s.at(name + "/a_src"), track), t.param(s.at(name + "/a_dst"), track), nb,
                            spec.heads, spec.slope, spec.final_layer, injection, trace);
  return activate(t, agg, spec.activation);
}

}  // namespace nstw::nn
