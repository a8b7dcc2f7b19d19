#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>

#include "nstw/core.hpp"

namespace nstw::nn {

struct Param {
  Matrix value;
  Matrix grad;
  Matrix moment1;  // adaptive-moment state, allocated on first use
  Matrix moment2;
  std::uint64_t steps = 0;
  bool has_grad = false;

  void accumulate(const Matrix& g) {
    if (!has_grad) {
      grad = g;
      has_grad = true;
    } else {
      grad += g;
    }
  }

  void clear_grad() {
    has_grad = false;
    grad.setZero(value.rows(), value.cols());
  }
};

// Named parameter matrices with gradient slots. Iteration is in name order.
class ParameterStore {
 public:
  Param& add(const std::string& name, Matrix init) {
    if (!init.allFinite()) throw NumericError("parameter '" + name + "' initialized with non-finite values");
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw StructureError("duplicate parameter '" + name + "'");
    it->second.value = std::move(init);
    it->second.clear_grad();
    return it->second;
  }

  Param& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw StructureError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Param& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw StructureError("unknown parameter '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& [_, p] : params_) p.clear_grad();
  }

  void require_finite() const {
    for (const auto& [name, p] : params_)
      if (!p.value.allFinite()) throw NumericError("parameter '" + name + "' is not finite");
  }

 private:
  std::map<std::string, Param> params_;
};

inline bool has_prefix(std::string_view name, std::string_view prefix) {
  return name.substr(0, prefix.size()) == prefix;
}

enum class UpdateRule { GradientDescent, Adam };

inline UpdateRule update_rule_from_string(const std::string& s) {
  if (s == "sgd") return UpdateRule::GradientDescent;
  if (s == "adam") return UpdateRule::Adam;
  throw ConfigError("unknown update rule '" + s + "' (expected sgd|adam)");
}

struct OptimizerConfig {
  UpdateRule rule = UpdateRule::GradientDescent;
  double lr = 7.5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // per-parameter gradient norm cap; 0 disables
};

// Moves every parameter under `prefix` that holds a gradient, then clears the
// gradient. Parameters without a gradient are left untouched.
inline void apply_update(ParameterStore& store, const OptimizerConfig& cfg, std::string_view prefix = "") {
  for (auto& [name, p] : store) {
    if (!has_prefix(name, prefix)) continue;
    if (!p.has_grad) continue;
    if (!p.grad.allFinite()) throw NumericError("non-finite gradient for '" + name + "'");
    Matrix g = p.grad;
    if (cfg.clip_norm > 0.0) {
      const double norm = g.norm();
      if (norm > cfg.clip_norm) g *= cfg.clip_norm / norm;
    }
    if (cfg.rule == UpdateRule::GradientDescent) {
      p.value -= cfg.lr * g;
    } else {
      if (p.moment1.size() != p.value.size()) {
        p.moment1 = Matrix::Zero(p.value.rows(), p.value.cols());
        p.moment2 = Matrix::Zero(p.value.rows(), p.value.cols());
      }
      ++p.steps;
      p.moment1 = cfg.beta1 * p.moment1 + (1.0 - cfg.beta1) * g;
      p.moment2 = cfg.beta2 * p.moment2 + (1.0 - cfg.beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p.steps));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p.steps));
      p.value.array() -= cfg.lr * (p.moment1.array() / c1) / ((p.moment2.array() / c2).sqrt() + cfg.epsilon);
    }
    if (!p.value.allFinite()) throw NumericError("update made '" + name + "' non-finite");
    p.clear_grad();
  }
}

// target <- tau * online + (1 - tau) * target, for every parameter.
inline void soft_update(ParameterStore& target, const ParameterStore& online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("soft_update: tau must lie in [0, 1]");
  if (target.size() != online.size()) throw StructureError("soft_update: stores differ in parameter count");
  for (auto& [name, t] : target) {
    const auto& o = online.at(name);
    if (o.value.rows() != t.value.rows() || o.value.cols() != t.value.cols())
      throw StructureError("soft_update: shape mismatch for '" + name + "'");
    t.value = tau * o.value + (1.0 - tau) * t.value;
  }
}

// Copies values only; gradient and optimizer state start fresh.
inline ParameterStore clone_values(const ParameterStore& src) {
  ParameterStore out;
  for (const auto& [name, p] : src) out.add(name, p.value);
  return out;
}

// Sum of squared differences over all parameters.
inline double squared_distance(const ParameterStore& a, const ParameterStore& b) {
  double d = 0.0;
  for (const auto& [name, p] : a) d += (p.value - b.at(name).value).squaredNorm();
  return d;
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline Matrix fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  return m;
}

}  // namespace nstw::nn
