#pragma once

#include <vector>

#include "affd/nn/tensor.hpp"

namespace affd::nn {

/// SGD with classical momentum: v <- momentum * v + g; p <- p - lr * v.
template <typename T>
class Sgd {
 public:
  Sgd(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {
    if (!(learning_rate > 0.0)) throw ConfigError("sgd: learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("sgd: momentum must lie in [0, 1)");
  }

  void step(const StateRefs<T>& refs) {
    if (velocity_.empty()) {
      for (const auto& [name, p] : refs.params) velocity_.emplace_back(p->value.numel(), T(0));
    }
    if (velocity_.size() != refs.params.size()) throw DimensionError("sgd: parameter set changed between steps");
    for (std::size_t k = 0; k < refs.params.size(); ++k) {
      Param<T>& p = *refs.params[k].second;
      auto& v = velocity_[k];
      if (v.size() != p.value.numel()) throw DimensionError("sgd: velocity shape mismatch for " + refs.params[k].first);
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = static_cast<T>(momentum_ * v[i] + p.grad.data[i]);
        p.value.data[i] = static_cast<T>(p.value.data[i] - lr_ * v[i]);
      }
    }
  }

  double learning_rate() const { return lr_; }
  double momentum() const { return momentum_; }
  const std::vector<std::vector<T>>& velocity() const { return velocity_; }

 private:
  double lr_;
  double momentum_;
  std::vector<std::vector<T>> velocity_;
};

template <typename T>
void zero_grad(const StateRefs<T>& refs) {
  for (const auto& [name, p] : refs.params) p->zero_grad();
}

}  // namespace affd::nn
