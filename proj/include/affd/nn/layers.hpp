#pragma once

// Layers with hand-written backward passes. Each layer caches what its backward needs during
// forward; backward accumulates into parameter gradients and returns the input gradient.

#include <cmath>
#include <random>
#include <string>

#include "affd/nn/parallel.hpp"
#include "affd/nn/tensor.hpp"

namespace affd::nn {

namespace kernels {

// C[M x N] += A[M x K] * B[K x N]
template <typename T>
void gemm_acc(std::size_t M, std::size_t N, std::size_t K, const T* A, const T* B, T* C) {
  for (std::size_t i = 0; i < M; ++i) {
    T* c = C + i * N;
    for (std::size_t k = 0; k < K; ++k) {
      const T a = A[i * K + k];
      const T* b = B + k * N;
      for (std::size_t j = 0; j < N; ++j) c[j] += a * b[j];
    }
  }
}

}  // namespace kernels

enum class Padding { valid, same };

struct ConvGeometry {
  std::size_t out_h = 0, out_w = 0;
  std::size_t pad_top = 0, pad_left = 0;
};

/// Output size and leading padding. "same" pads symmetrically with the odd zero trailing.
inline ConvGeometry conv_geometry(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw, std::size_t stride,
                                  Padding padding) {
  ConvGeometry g;
  if (padding == Padding::valid) {
    if (h < kh || w < kw)
      throw DimensionError("conv2d: input " + std::to_string(h) + "x" + std::to_string(w) + " smaller than kernel " +
                           std::to_string(kh) + "x" + std::to_string(kw));
    g.out_h = (h - kh) / stride + 1;
    g.out_w = (w - kw) / stride + 1;
    return g;
  }
  g.out_h = (h + stride - 1) / stride;
  g.out_w = (w + stride - 1) / stride;
  const std::size_t need_h = (g.out_h - 1) * stride + kh;
  const std::size_t need_w = (g.out_w - 1) * stride + kw;
  g.pad_top = need_h > h ? (need_h - h) / 2 : 0;
  g.pad_left = need_w > w ? (need_w - w) / 2 : 0;
  return g;
}

/// 2-D convolution, weights out x in x kh x kw, optional bias.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw, std::size_t stride, Padding padding,
         bool bias, std::mt19937_64& rng)
      : in_ch_(in_ch), out_ch_(out_ch), kh_(kh), kw_(kw), stride_(stride), padding_(padding), has_bias_(bias) {
    weight = Param<T>(Tensor<T>(out_ch, in_ch, kh, kw));
    he_uniform(weight.value, in_ch * kh * kw, rng);
    if (bias) this->bias = Param<T>(Tensor<T>(out_ch, 1, 1, 1));
  }

  Param<T> weight;
  Param<T> bias;

  std::size_t in_channels() const { return in_ch_; }
  std::size_t out_channels() const { return out_ch_; }

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.c() != in_ch_)
      throw DimensionError("conv2d: input " + shape_string(x.shape) + " has " + std::to_string(x.c()) +
                           " channels, weight " + shape_string(weight.value.shape) + " expects " +
                           std::to_string(in_ch_));
    x_ = x;
    geo_ = conv_geometry(x.h(), x.w(), kh_, kw_, stride_, padding_);
    const std::size_t P = geo_.out_h * geo_.out_w;
    const std::size_t K = in_ch_ * kh_ * kw_;
    Tensor<T> y(x.n(), out_ch_, geo_.out_h, geo_.out_w);
    parallel_for(x.n(), [&](std::size_t n, std::size_t) {
      std::vector<T> col(K * P);
      im2col(x.sample(n), x.h(), x.w(), col.data());
      T* out = y.sample(n);
      if (has_bias_)
        for (std::size_t o = 0; o < out_ch_; ++o) std::fill(out + o * P, out + (o + 1) * P, bias.value.data[o]);
      kernels::gemm_acc(out_ch_, P, K, weight.value.data.data(), col.data(), out);
    });
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const std::size_t P = geo_.out_h * geo_.out_w;
    const std::size_t K = in_ch_ * kh_ * kw_;
    if (gy.n() != x_.n() || gy.c() != out_ch_ || gy.h() != geo_.out_h || gy.w() != geo_.out_w)
      throw DimensionError("conv2d backward: gradient shape " + shape_string(gy.shape) + " does not match output");

    // W^T, K x O, shared read-only by all samples.
    std::vector<T> wt(K * out_ch_);
    for (std::size_t o = 0; o < out_ch_; ++o)
      for (std::size_t k = 0; k < K; ++k) wt[k * out_ch_ + o] = weight.value.data[o * K + k];

    Tensor<T> gx = Tensor<T>::like(x_);
    const std::size_t slots = worker_slots(x_.n());
    std::vector<std::vector<T>> gw(slots, std::vector<T>(out_ch_ * K, T(0)));
    std::vector<std::vector<T>> gb(slots, std::vector<T>(out_ch_, T(0)));

    parallel_for(x_.n(), [&](std::size_t n, std::size_t slot) {
      std::vector<T> col(K * P), rowbuf(P * K), dcol(K * P, T(0));
      im2col(x_.sample(n), x_.h(), x_.w(), col.data());
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t p = 0; p < P; ++p) rowbuf[p * K + k] = col[k * P + p];
      const T* g = gy.sample(n);
      kernels::gemm_acc(out_ch_, K, P, g, rowbuf.data(), gw[slot].data());
      if (has_bias_)
        for (std::size_t o = 0; o < out_ch_; ++o) {
          T s = 0;
          for (std::size_t p = 0; p < P; ++p) s += g[o * P + p];
          gb[slot][o] += s;
        }
      kernels::gemm_acc(K, P, out_ch_, wt.data(), g, dcol.data());
      col2im(dcol.data(), x_.h(), x_.w(), gx.sample(n));
    });

    for (std::size_t s = 0; s < slots; ++s) {
      for (std::size_t i = 0; i < gw[s].size(); ++i) weight.grad.data[i] += gw[s][i];
      if (has_bias_)
        for (std::size_t o = 0; o < out_ch_; ++o) bias.grad.data[o] += gb[s][o];
    }
    return gx;
  }

  void collect(StateRefs<T>& refs, const std::string& prefix) {
    refs.params.emplace_back(prefix + ".weight", &weight);
    if (has_bias_) refs.params.emplace_back(prefix + ".bias", &bias);
  }

 private:
  void im2col(const T* x, std::size_t H, std::size_t W, T* col) const {
    const std::size_t OH = geo_.out_h, OW = geo_.out_w;
    std::size_t row = 0;
    for (std::size_t c = 0; c < in_ch_; ++c)
      for (std::size_t i = 0; i < kh_; ++i)
        for (std::size_t j = 0; j < kw_; ++j, ++row) {
          T* dst = col + row * OH * OW;
          for (std::size_t oh = 0; oh < OH; ++oh) {
            const auto ih = static_cast<std::ptrdiff_t>(oh * stride_ + i) - static_cast<std::ptrdiff_t>(geo_.pad_top);
            for (std::size_t ow = 0; ow < OW; ++ow) {
              const auto iw =
                  static_cast<std::ptrdiff_t>(ow * stride_ + j) - static_cast<std::ptrdiff_t>(geo_.pad_left);
              const bool inside = ih >= 0 && iw >= 0 && ih < static_cast<std::ptrdiff_t>(H) &&
                                  iw < static_cast<std::ptrdiff_t>(W);
              dst[oh * OW + ow] = inside ? x[(c * H + static_cast<std::size_t>(ih)) * W + static_cast<std::size_t>(iw)] : T(0);
            }
          }
        }
  }

  void col2im(const T* col, std::size_t H, std::size_t W, T* gx) const {
    const std::size_t OH = geo_.out_h, OW = geo_.out_w;
    std::size_t row = 0;
    for (std::size_t c = 0; c < in_ch_; ++c)
      for (std::size_t i = 0; i < kh_; ++i)
        for (std::size_t j = 0; j < kw_; ++j, ++row) {
          const T* src = col + row * OH * OW;
          for (std::size_t oh = 0; oh < OH; ++oh) {
            const auto ih = static_cast<std::ptrdiff_t>(oh * stride_ + i) - static_cast<std::ptrdiff_t>(geo_.pad_top);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
            for (std::size_t ow = 0; ow < OW; ++ow) {
              const auto iw =
                  static_cast<std::ptrdiff_t>(ow * stride_ + j) - static_cast<std::ptrdiff_t>(geo_.pad_left);
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
              gx[(c * H + static_cast<std::size_t>(ih)) * W + static_cast<std::size_t>(iw)] += src[oh * OW + ow];
            }
          }
        }
  }

  std::size_t in_ch_ = 0, out_ch_ = 0, kh_ = 1, kw_ = 1, stride_ = 1;
  Padding padding_ = Padding::valid;
  bool has_bias_ = false;
  Tensor<T> x_;
  ConvGeometry geo_;
};

/// Per-channel batch normalization over N x H x W.
template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels, double eps = 1e-5, double momentum = 0.1)
      : channels_(channels), eps_(eps), momentum_(momentum) {
    gamma = Param<T>(Tensor<T>(channels, 1, 1, 1, T(1)));
    beta = Param<T>(Tensor<T>(channels, 1, 1, 1, T(0)));
    running_mean = Tensor<T>(channels, 1, 1, 1, T(0));
    running_var = Tensor<T>(channels, 1, 1, 1, T(1));
  }

  Param<T> gamma;
  Param<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (x.c() != channels_)
      throw DimensionError("batchnorm: input " + shape_string(x.shape) + " has " + std::to_string(x.c()) +
                           " channels, expected " + std::to_string(channels_));
    mode_ = mode;
    const std::size_t N = x.n(), C = x.c(), HW = x.plane();
    const double m = static_cast<double>(N * HW);
    xhat_ = Tensor<T>::like(x);
    invstd_.assign(C, 0.0);
    Tensor<T> y = Tensor<T>::like(x);
    for (std::size_t c = 0; c < C; ++c) {
      double mean, var;
      if (mode == Mode::train) {
        double s = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
          const T* p = x.sample(n) + c * HW;
          for (std::size_t i = 0; i < HW; ++i) s += p[i];
        }
        mean = s / m;
        double v = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
          const T* p = x.sample(n) + c * HW;
          for (std::size_t i = 0; i < HW; ++i) v += (p[i] - mean) * (p[i] - mean);
        }
        var = v / m;
        const double unbiased = m > 1 ? var * m / (m - 1) : var;
        running_mean.data[c] = static_cast<T>((1 - momentum_) * running_mean.data[c] + momentum_ * mean);
        running_var.data[c] = static_cast<T>((1 - momentum_) * running_var.data[c] + momentum_ * unbiased);
      } else {
        mean = running_mean.data[c];
        var = running_var.data[c];
      }
      const double inv = 1.0 / std::sqrt(var + eps_);
      invstd_[c] = inv;
      const double g = gamma.value.data[c], b = beta.value.data[c];
      for (std::size_t n = 0; n < N; ++n) {
        const T* p = x.sample(n) + c * HW;
        T* xh = xhat_.sample(n) + c * HW;
        T* q = y.sample(n) + c * HW;
        for (std::size_t i = 0; i < HW; ++i) {
          const double h = (p[i] - mean) * inv;
          xh[i] = static_cast<T>(h);
          q[i] = static_cast<T>(g * h + b);
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    require_same_shape(gy, xhat_, "batchnorm backward");
    const std::size_t N = gy.n(), C = gy.c(), HW = gy.plane();
    const double m = static_cast<double>(N * HW);
    Tensor<T> gx = Tensor<T>::like(gy);
    for (std::size_t c = 0; c < C; ++c) {
      double dg = 0.0, db = 0.0;
      for (std::size_t n = 0; n < N; ++n) {
        const T* g = gy.sample(n) + c * HW;
        const T* xh = xhat_.sample(n) + c * HW;
        for (std::size_t i = 0; i < HW; ++i) {
          dg += g[i] * xh[i];
          db += g[i];
        }
      }
      gamma.grad.data[c] += static_cast<T>(dg);
      beta.grad.data[c] += static_cast<T>(db);
      const double scale = gamma.value.data[c] * invstd_[c];
      for (std::size_t n = 0; n < N; ++n) {
        const T* g = gy.sample(n) + c * HW;
        const T* xh = xhat_.sample(n) + c * HW;
        T* d = gx.sample(n) + c * HW;
        for (std::size_t i = 0; i < HW; ++i) {
          if (mode_ == Mode::train)
            d[i] = static_cast<T>(scale * (g[i] - db / m - xh[i] * dg / m));
          else
            d[i] = static_cast<T>(scale * g[i]);
        }
      }
    }
    return gx;
  }

  void collect(StateRefs<T>& refs, const std::string& prefix) {
    refs.params.emplace_back(prefix + ".gamma", &gamma);
    refs.params.emplace_back(prefix + ".beta", &beta);
    refs.buffers.emplace_back(prefix + ".running_mean", &running_mean);
    refs.buffers.emplace_back(prefix + ".running_var", &running_var);
  }

 private:
  std::size_t channels_ = 0;
  double eps_ = 1e-5, momentum_ = 0.1;
  Mode mode_ = Mode::train;
  Tensor<T> xhat_;
  std::vector<double> invstd_;
};

/// Affine layer on flattened samples: y = x W^T + b, output N x out x 1 x 1.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng) : in_(in), out_(out) {
    weight = Param<T>(Tensor<T>(out, in, 1, 1));
    he_uniform(weight.value, in, rng);
    bias = Param<T>(Tensor<T>(out, 1, 1, 1));
  }

  Param<T> weight;
  Param<T> bias;

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.sample_size() != in_)
      throw DimensionError("linear: input " + shape_string(x.shape) + " flattens to " +
                           std::to_string(x.sample_size()) + ", weight " + shape_string(weight.value.shape) +
                           " expects " + std::to_string(in_));
    x_ = x;
    Tensor<T> y(x.n(), out_, 1, 1);
    for (std::size_t n = 0; n < x.n(); ++n) {
      const T* xi = x.sample(n);
      for (std::size_t o = 0; o < out_; ++o) {
        const T* w = weight.value.data.data() + o * in_;
        T s = bias.value.data[o];
        for (std::size_t i = 0; i < in_; ++i) s += w[i] * xi[i];
        y.data[n * out_ + o] = s;
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx = Tensor<T>::like(x_);
    for (std::size_t n = 0; n < x_.n(); ++n) {
      const T* xi = x_.sample(n);
      T* gxi = gx.sample(n);
      for (std::size_t o = 0; o < out_; ++o) {
        const T g = gy.data[n * out_ + o];
        T* gw = weight.grad.data.data() + o * in_;
        const T* w = weight.value.data.data() + o * in_;
        for (std::size_t i = 0; i < in_; ++i) {
          gw[i] += g * xi[i];
          gxi[i] += g * w[i];
        }
        bias.grad.data[o] += g;
      }
    }
    return gx;
  }

  void collect(StateRefs<T>& refs, const std::string& prefix) {
    refs.params.emplace_back(prefix + ".weight", &weight);
    refs.params.emplace_back(prefix + ".bias", &bias);
  }

 private:
  std::size_t in_ = 0, out_ = 0;
  Tensor<T> x_;
};

// ---- pointwise and pooling ops -------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = Tensor<T>::like(x);
  for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return y;
}

/// Gradient of relu given its forward input.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& gy) {
  require_same_shape(x, gy, "relu backward");
  Tensor<T> gx = Tensor<T>::like(x);
  for (std::size_t i = 0; i < x.numel(); ++i) gx.data[i] = x.data[i] > T(0) ? gy.data[i] : T(0);
  return gx;
}

template <typename T>
T sigmoid(T z) {
  // Branches keep exp() from overflowing for large |z|.
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y = Tensor<T>::like(x);
  for (std::size_t i = 0; i < x.numel(); ++i) y.data[i] = sigmoid(x.data[i]);
  return y;
}

/// Gradient of sigmoid given its forward output.
template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& gy) {
  require_same_shape(y, gy, "sigmoid backward");
  Tensor<T> gx = Tensor<T>::like(y);
  for (std::size_t i = 0; i < y.numel(); ++i) gx.data[i] = gy.data[i] * y.data[i] * (T(1) - y.data[i]);
  return gx;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> y = a;
  for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] += b.data[i];
  return y;
}

/// x (N x C x H x W) scaled by s (N x C x 1 x 1) broadcast over H x W.
template <typename T>
Tensor<T> broadcast_mul_channel(const Tensor<T>& x, const Tensor<T>& s) {
  if (s.n() != x.n() || s.c() != x.c() || s.plane() != 1)
    throw DimensionError("broadcast_mul_channel: scale " + shape_string(s.shape) + " does not broadcast over " +
                         shape_string(x.shape));
  Tensor<T> y = Tensor<T>::like(x);
  const std::size_t HW = x.plane();
  for (std::size_t nc = 0; nc < x.n() * x.c(); ++nc) {
    const T k = s.data[nc];
    for (std::size_t i = 0; i < HW; ++i) y.data[nc * HW + i] = x.data[nc * HW + i] * k;
  }
  return y;
}

template <typename T>
void broadcast_mul_channel_backward(const Tensor<T>& x, const Tensor<T>& s, const Tensor<T>& gy, Tensor<T>& gx,
                                    Tensor<T>& gs) {
  require_same_shape(x, gy, "broadcast_mul_channel backward");
  gx = Tensor<T>::like(x);
  gs = Tensor<T>::like(s);
  const std::size_t HW = x.plane();
  for (std::size_t nc = 0; nc < x.n() * x.c(); ++nc) {
    T acc = 0;
    for (std::size_t i = 0; i < HW; ++i) {
      gx.data[nc * HW + i] = gy.data[nc * HW + i] * s.data[nc];
      acc += gy.data[nc * HW + i] * x.data[nc * HW + i];
    }
    gs.data[nc] = acc;
  }
}

/// x (N x C x H x W) plus g (N x C x 1 x 1) broadcast over H x W.
template <typename T>
Tensor<T> broadcast_add_channel(const Tensor<T>& x, const Tensor<T>& g) {
  if (g.n() != x.n() || g.c() != x.c() || g.plane() != 1)
    throw DimensionError("broadcast_add_channel: " + shape_string(g.shape) + " does not broadcast over " +
                         shape_string(x.shape));
  Tensor<T> y = x;
  const std::size_t HW = x.plane();
  for (std::size_t nc = 0; nc < x.n() * x.c(); ++nc)
    for (std::size_t i = 0; i < HW; ++i) y.data[nc * HW + i] += g.data[nc];
  return y;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  Tensor<T> y(x.n(), x.c(), 1, 1);
  const std::size_t HW = x.plane();
  for (std::size_t nc = 0; nc < x.n() * x.c(); ++nc) {
    T s = 0;
    for (std::size_t i = 0; i < HW; ++i) s += x.data[nc * HW + i];
    y.data[nc] = s / static_cast<T>(HW);
  }
  return y;
}

/// Spreads g / (H*W) to every position; `h`, `w` are the pooled input's spatial dims.
template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& gy, std::size_t h, std::size_t w) {
  Tensor<T> gx(gy.n(), gy.c(), h, w);
  const std::size_t HW = h * w;
  for (std::size_t nc = 0; nc < gy.n() * gy.c(); ++nc) {
    const T g = gy.data[nc] / static_cast<T>(HW);
    for (std::size_t i = 0; i < HW; ++i) gx.data[nc * HW + i] = g;
  }
  return gx;
}

/// Sums the spatial positions of a per-position gradient down to N x C x 1 x 1.
template <typename T>
Tensor<T> reduce_to_channel(const Tensor<T>& g) {
  Tensor<T> r(g.n(), g.c(), 1, 1);
  const std::size_t HW = g.plane();
  for (std::size_t nc = 0; nc < g.n() * g.c(); ++nc) {
    T s = 0;
    for (std::size_t i = 0; i < HW; ++i) s += g.data[nc * HW + i];
    r.data[nc] = s;
  }
  return r;
}

}  // namespace affd::nn
