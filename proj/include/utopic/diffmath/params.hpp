#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "utopic/diffmath/tensor.hpp"

namespace utopic::diffmath {

/// Named, ordered collection of learnable tensors. Iteration order is the
/// lexicographic name order, which keeps checkpoints and updates deterministic.
class ParamStore {
 public:
  void set(const std::string& name, Tensor t) { tensors_[name] = std::move(t); }

  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

  const Tensor& at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
  }
  Tensor& at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ContractError("unknown parameter '" + name + "'");
    return it->second;
  }

  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  std::map<std::string, Tensor>& tensors() { return tensors_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : tensors_) n += t.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& [_, t] : tensors_)
      if (!t.all_finite()) return false;
    return true;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.tensors_ == b.tensors_; }

 private:
  std::map<std::string, Tensor> tensors_;
};

using Gradients = std::map<std::string, Tensor>;

/// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
template <class Rng>
Tensor fan_in_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

/// He uniform, bound sqrt(6 / fan_in); keeps activation variance through
/// stacks of leaky-ReLU layers.
template <class Rng>
Tensor he_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in == 0 ? 1 : fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace utopic::diffmath
