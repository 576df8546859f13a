#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "affd/error.hpp"

namespace affd::nn {

enum class Mode { train, eval };

/// Dense N x C x H x W tensor, row-major. Lower-rank data uses trailing 1s.
template <typename T>
struct Tensor {
  std::array<std::size_t, 4> shape{0, 0, 0, 0};
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::size_t n, std::size_t c, std::size_t h, std::size_t w, T fill = T(0))
      : shape{n, c, h, w}, data(n * c * h * w, fill) {}

  static Tensor like(const Tensor& o, T fill = T(0)) { return Tensor(o.n(), o.c(), o.h(), o.w(), fill); }

  std::size_t n() const { return shape[0]; }
  std::size_t c() const { return shape[1]; }
  std::size_t h() const { return shape[2]; }
  std::size_t w() const { return shape[3]; }
  std::size_t numel() const { return data.size(); }
  std::size_t plane() const { return shape[2] * shape[3]; }
  std::size_t sample_size() const { return shape[1] * shape[2] * shape[3]; }

  T& at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  T at(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }

  T* sample(std::size_t i) { return data.data() + i * sample_size(); }
  const T* sample(std::size_t i) const { return data.data() + i * sample_size(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(n(), c(), h(), w());
    std::transform(data.begin(), data.end(), out.data.begin(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline std::string shape_string(const std::array<std::size_t, 4>& s) {
  return "[" + std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]) + "x" +
         std::to_string(s[3]) + "]";
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape) + " vs " + shape_string(b.shape));
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return std::all_of(t.data.begin(), t.data.end(), [](T v) { return std::isfinite(v); });
}

/// Trainable tensor with its gradient accumulator.
template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  Param() = default;
  explicit Param(Tensor<T> v) : value(std::move(v)), grad(Tensor<T>::like(value)) {}

  void zero_grad() { grad.fill(T(0)); }
};

/// Flat, ordered view of a module tree's named parameters and buffers.
template <typename T>
struct StateRefs {
  std::vector<std::pair<std::string, Param<T>*>> params;
  std::vector<std::pair<std::string, Tensor<T>*>> buffers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params) n += p->value.numel();
    return n;
  }
};

template <typename T>
void he_uniform(Tensor<T>& w, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : w.data) v = static_cast<T>(u(rng));
}

}  // namespace affd::nn
