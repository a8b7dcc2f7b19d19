#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "nstw/core.hpp"
#include "nstw/rl/observation.hpp"

namespace nstw::rl {

struct Transition {
  Observation obs;
  std::vector<double> action;  // one acceleration per CAV
  double reward = 0.0;         // global step reward
  Observation next;
  bool terminal = false;
};

inline void check_transition(const Transition& t) {
  if (t.action.size() != t.obs.cav_nodes.size()) throw StructureError("transition: one action per CAV expected");
  for (double a : t.action)
    if (!(a >= kAccelMin && a <= kAccelMax)) throw DomainError("transition: action outside [-4.5, 4.5]");
  if (!std::isfinite(t.reward)) throw NumericError("transition: reward is not finite");
}

// Fixed-capacity FIFO store; uniform sampling without replacement in a batch.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be >= 1");
    ring_.reserve(std::min<std::size_t>(capacity, 4096));
  }

  void add(Transition t) {
    check_transition(t);
    if (ring_.size() < capacity_) {
      ring_.push_back(std::move(t));
    } else {
      ring_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
    ++inserted_;
  }

  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t inserted() const { return inserted_; }

  // Oldest first.
  const Transition& at(std::size_t i) const { return ring_[(head_ + i) % ring_.size()]; }

  std::vector<const Transition*> sample(std::size_t count, std::mt19937_64& rng) const {
    if (count == 0 || count > ring_.size()) throw DomainError("replay: cannot sample " + std::to_string(count) +
                                                              " of " + std::to_string(ring_.size()));
    std::uniform_int_distribution<std::size_t> pick(0, ring_.size() - 1);
    std::vector<std::size_t> chosen;
    chosen.reserve(count);
    while (chosen.size() < count) {
      const auto i = pick(rng);
      if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) chosen.push_back(i);
    }
    std::vector<const Transition*> out;
    out.reserve(count);
    for (auto i : chosen) out.push_back(&ring_[i]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::size_t inserted_ = 0;
  std::vector<Transition> ring_;
};

}  // namespace nstw::rl
