#pragma once

// Channel attention units: squeeze-and-excitation, multi-scale channel attention (MS-CAM)
// and attentional feature fusion (AFF).

#include <algorithm>
#include <random>
#include <string>

#include "affd/nn/layers.hpp"

namespace affd::blocks {

using nn::Mode;
using nn::Tensor;

inline std::size_t bottleneck_width(std::size_t channels, std::size_t reduction) {
  return std::max<std::size_t>(1, channels / std::max<std::size_t>(1, reduction));
}

/// s = sigmoid(W2 relu(W1 GAP(x))), y = x * s per channel.
template <typename T>
class SEBlock {
 public:
  SEBlock() = default;
  SEBlock(std::size_t channels, std::size_t reduction, std::mt19937_64& rng)
      : fc1(channels, bottleneck_width(channels, reduction), rng),
        fc2(bottleneck_width(channels, reduction), channels, rng),
        channels_(channels) {}

  nn::Linear<T> fc1;
  nn::Linear<T> fc2;

  Tensor<T> forward(const Tensor<T>& x) {
    if (x.c() != channels_)
      throw DimensionError("se: input " + nn::shape_string(x.shape) + " has " + std::to_string(x.c()) +
                           " channels, block expects " + std::to_string(channels_));
    x_ = x;
    h_ = fc1.forward(nn::global_avg_pool(x));
    const Tensor<T> z = fc2.forward(nn::relu(h_));
    s_ = nn::sigmoid(z);
    s_.shape = {x.n(), x.c(), 1, 1};
    return nn::broadcast_mul_channel(x, s_);
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    Tensor<T> gx, gs;
    nn::broadcast_mul_channel_backward(x_, s_, gy, gx, gs);
    Tensor<T> gz = nn::sigmoid_backward(s_, gs);
    gz.shape = {x_.n(), channels_, 1, 1};
    const Tensor<T> gh = nn::relu_backward(h_, fc2.backward(gz));
    const Tensor<T> gp = fc1.backward(gh);
    const Tensor<T> gx2 = nn::global_avg_pool_backward(gp, x_.h(), x_.w());
    for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += gx2.data[i];
    return gx;
  }

  /// Channel gates from the last forward, N x C x 1 x 1.
  const Tensor<T>& gates() const { return s_; }

  void collect(nn::StateRefs<T>& refs, const std::string& prefix) {
    fc1.collect(refs, prefix + ".fc1");
    fc2.collect(refs, prefix + ".fc2");
  }

 private:
  std::size_t channels_ = 0;
  Tensor<T> x_, h_, s_;
};

/// Pointwise-conv bottleneck C -> C/r -> C with batch-norm and relu between the two convs.
/// The first conv has no bias; the batch-norm shift subsumes it.
template <typename T>
class ChannelBottleneck {
 public:
  ChannelBottleneck() = default;
  ChannelBottleneck(std::size_t channels, std::size_t reduction, std::mt19937_64& rng)
      : conv1(channels, bottleneck_width(channels, reduction), 1, 1, 1, nn::Padding::valid, false, rng),
        bn(bottleneck_width(channels, reduction)),
        conv2(bottleneck_width(channels, reduction), channels, 1, 1, 1, nn::Padding::valid, true, rng) {}

  nn::Conv2d<T> conv1;
  nn::BatchNorm2d<T> bn;
  nn::Conv2d<T> conv2;

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    pre_ = bn.forward(conv1.forward(x), mode);
    return conv2.forward(nn::relu(pre_));
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    return conv1.backward(bn.backward(nn::relu_backward(pre_, conv2.backward(gy))));
  }

  void collect(nn::StateRefs<T>& refs, const std::string& prefix) {
    conv1.collect(refs, prefix + ".conv1");
    bn.collect(refs, prefix + ".bn");
    conv2.collect(refs, prefix + ".conv2");
  }

 private:
  Tensor<T> pre_;
};

/// MS-CAM: gate = sigmoid(global(GAP(x)) broadcast + local(x)), same shape as x.
template <typename T>
class MSCAM {
 public:
  MSCAM() = default;
  MSCAM(std::size_t channels, std::size_t reduction, std::mt19937_64& rng)
      : global_branch(channels, reduction, rng), local_branch(channels, reduction, rng), channels_(channels) {}

  ChannelBottleneck<T> global_branch;
  ChannelBottleneck<T> local_branch;

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    if (x.c() != channels_)
      throw DimensionError("ms-cam: input " + nn::shape_string(x.shape) + " has " + std::to_string(x.c()) +
                           " channels, module expects " + std::to_string(channels_));
    h_ = x.h();
    w_ = x.w();
    const Tensor<T> g = global_branch.forward(nn::global_avg_pool(x), mode);
    const Tensor<T> l = local_branch.forward(x, mode);
    m_ = nn::sigmoid(nn::broadcast_add_channel(l, g));
    return m_;
  }

  Tensor<T> backward(const Tensor<T>& gm) {
    const Tensor<T> gz = nn::sigmoid_backward(m_, gm);
    Tensor<T> gx = local_branch.backward(gz);
    const Tensor<T> gg = global_branch.backward(nn::reduce_to_channel(gz));
    const Tensor<T> gx2 = nn::global_avg_pool_backward(gg, h_, w_);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx.data[i] += gx2.data[i];
    return gx;
  }

  void collect(nn::StateRefs<T>& refs, const std::string& prefix) {
    global_branch.collect(refs, prefix + ".global");
    local_branch.collect(refs, prefix + ".local");
  }

 private:
  std::size_t channels_ = 0;
  std::size_t h_ = 0, w_ = 0;
  Tensor<T> m_;
};

/// AFF: m = MS-CAM(x + y), z = m * x + (1 - m) * y.
///
/// Evaluated as y + m * (x - y), so that x == y returns x bitwise for any gate.
template <typename T>
class AFF {
 public:
  AFF() = default;
  AFF(std::size_t channels, std::size_t reduction, std::mt19937_64& rng) : mscam(channels, reduction, rng) {}

  MSCAM<T> mscam;

  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& y, Mode mode) {
    nn::require_same_shape(x, y, "aff");
    diff_ = Tensor<T>::like(x);
    for (std::size_t i = 0; i < x.numel(); ++i) diff_.data[i] = x.data[i] - y.data[i];
    m_ = mscam.forward(nn::add(x, y), mode);
    Tensor<T> z = y;
    for (std::size_t i = 0; i < z.numel(); ++i) z.data[i] += m_.data[i] * diff_.data[i];
    return z;
  }

  /// Returns {dL/dx, dL/dy}.
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& gz) {
    Tensor<T> gm = Tensor<T>::like(gz);
    for (std::size_t i = 0; i < gz.numel(); ++i) gm.data[i] = gz.data[i] * diff_.data[i];
    const Tensor<T> gs = mscam.backward(gm);
    Tensor<T> gx = Tensor<T>::like(gz), gy = Tensor<T>::like(gz);
    for (std::size_t i = 0; i < gz.numel(); ++i) {
      gx.data[i] = gz.data[i] * m_.data[i] + gs.data[i];
      gy.data[i] = gz.data[i] * (T(1) - m_.data[i]) + gs.data[i];
    }
    return {std::move(gx), std::move(gy)};
  }

  /// Fusion weights from the last forward.
  const Tensor<T>& gate() const { return m_; }

  void collect(nn::StateRefs<T>& refs, const std::string& prefix) { mscam.collect(refs, prefix + ".mscam"); }

 private:
  Tensor<T> diff_, m_;
};

}  // namespace affd::blocks
