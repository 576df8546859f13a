#pragma once

#include <cmath>
#include <vector>

#include "affd/nn/tensor.hpp"

namespace affd::nn {

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor<T> grad;            // d loss / d logits
  Tensor<T> probabilities;   // softmax rows
  std::size_t correct = 0;   // argmax hits
};

/// Mean softmax cross-entropy over the batch. Labels index the logit columns
/// (0 = real, 1 = fake for the detector head).
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  const std::size_t N = logits.n(), K = logits.sample_size();
  if (labels.size() != N) throw DimensionError("softmax_cross_entropy: label count differs from batch size");
  LossResult<T> r;
  r.grad = Tensor<T>::like(logits);
  r.probabilities = Tensor<T>::like(logits);
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const T* z = logits.sample(n);
    const auto label = static_cast<std::size_t>(labels[n]);
    if (labels[n] < 0 || label >= K) throw DomainError("softmax_cross_entropy: label out of range");
    double mx = z[0];
    std::size_t arg = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (z[k] > mx) {
        mx = z[k];
        arg = k;
      }
    double se = 0.0;
    for (std::size_t k = 0; k < K; ++k) se += std::exp(z[k] - mx);
    const double lse = mx + std::log(se);
    total += lse - z[label];
    for (std::size_t k = 0; k < K; ++k) {
      const double p = std::exp(z[k] - lse);
      r.probabilities.sample(n)[k] = static_cast<T>(p);
      r.grad.sample(n)[k] = static_cast<T>((p - (k == label ? 1.0 : 0.0)) / static_cast<double>(N));
    }
    if (arg == label) ++r.correct;
  }
  r.loss = N ? total / static_cast<double>(N) : 0.0;
  return r;
}

}  // namespace affd::nn
