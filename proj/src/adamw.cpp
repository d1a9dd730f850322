#include "tt/adamw.hpp"

#include <cmath>

namespace tt {

OptimizerState::OptimizerState(const ParameterStore& store, AdamwConfig cfg) : cfg_(cfg) {
  m_.reserve(store.size());
  v_.reserve(store.size());
  for (const auto& p : store.items()) {
    m_.emplace_back(p.value.shape());
    v_.emplace_back(p.value.shape());
  }
}

void adamw_step(ParameterStore& store, OptimizerState& state) {
  if (state.m_.size() != store.size())
    throw ConfigError("optimizer state tracks " + std::to_string(state.m_.size()) +
                      " parameters, store has " + std::to_string(store.size()));
  state.step_ += 1;
  const AdamwConfig& c = state.cfg_;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_));
  for (size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store.items()[i];
    if (!p.grad.same_shape(p.value))
      throw ConfigError("missing or mis-shaped gradient for parameter '" + p.id + "'");
    ArrayX& m = state.m_[i].array();
    ArrayX& v = state.v_[i].array();
    const ArrayX& grad = p.grad.array();
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.square();
    p.value.array() -= c.lr * ((m / bc1) / ((v / bc2).sqrt() + c.eps) + c.weight_decay * p.value.array());
    p.grad.set_zero();
  }
}

}  // namespace tt
