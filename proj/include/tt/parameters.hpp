#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "tt/errors.hpp"
#include "tt/rng.hpp"
#include "tt/tensor.hpp"

namespace tt {

// A trainable tensor with a persistent gradient buffer of the same shape.
struct Parameter {
  std::string id;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string id_, Tensor value_) : id(std::move(id_)), value(std::move(value_)) {
    grad = Tensor(value.shape());
  }
};

// Ordered parameter registry. Iteration follows insertion order so that
// optimizer sweeps, checkpoints and RNG draws are deterministic.
class ParameterStore {
 public:
  explicit ParameterStore(uint64_t seed = 0) : rng_(seed), seed_(seed) {}

  // Registers a new parameter initialized uniformly in [lo, hi] from the
  // store's seeded RNG. Entries are drawn in row-major order.
  Parameter& add_uniform(const std::string& id, std::vector<Index> shape, double lo = -0.05,
                         double hi = 0.05) {
    Tensor t(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = rng_.uniform(lo, hi);
    return add(id, std::move(t));
  }

  Parameter& add_zeros(const std::string& id, std::vector<Index> shape) {
    return add(id, Tensor(std::move(shape)));
  }

  Parameter& add_constant(const std::string& id, std::vector<Index> shape, double fill) {
    return add(id, Tensor(std::move(shape), fill));
  }

  Parameter& add(const std::string& id, Tensor value) {
    if (index_.count(id)) throw ConfigError("duplicate parameter id: " + id);
    index_[id] = params_.size();
    params_.emplace_back(id, std::move(value));
    return params_.back();
  }

  Parameter& at(const std::string& id) {
    auto it = index_.find(id);
    if (it == index_.end()) throw ConfigError("unknown parameter id: " + id);
    return params_[it->second];
  }
  const Parameter& at(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ConfigError("unknown parameter id: " + id);
    return params_[it->second];
  }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  // Deque keeps Parameter addresses stable across add() calls, so
  // long-lived handles into the store stay valid.
  std::deque<Parameter>& items() { return params_; }
  const std::deque<Parameter>& items() const { return params_; }
  size_t size() const { return params_.size(); }

  Index total_entries() const {
    Index n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p.grad.set_zero();
  }

  uint64_t seed() const { return seed_; }
  Rng& rng() { return rng_; }

 private:
  std::deque<Parameter> params_;
  std::unordered_map<std::string, size_t> index_;
  Rng rng_;
  uint64_t seed_;
};

}  // namespace tt
