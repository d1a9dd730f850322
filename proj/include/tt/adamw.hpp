#pragma once

#include <cstdint>
#include <vector>

#include "tt/parameters.hpp"

namespace tt {

struct AdamwConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled-weight-decay Adam. Moment buffers are kept in store order; the
// step count increases once per call.
class OptimizerState {
 public:
  OptimizerState(const ParameterStore& store, AdamwConfig cfg);

  const AdamwConfig& config() const { return cfg_; }
  int64_t step_count() const { return step_; }
  const Tensor& first_moment(size_t i) const { return m_[i]; }
  const Tensor& second_moment(size_t i) const { return v_[i]; }

  friend void adamw_step(ParameterStore& store, OptimizerState& state);

 private:
  AdamwConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  int64_t step_ = 0;
};

// One optimizer step over every parameter in the store, in insertion order.
// Applies bias-corrected moment updates plus decoupled decay, then zeroes all
// gradients. A parameter whose grad buffer is missing or mis-shaped raises a
// ConfigError naming it.
void adamw_step(ParameterStore& store, OptimizerState& state);

}  // namespace tt
