#pragma once

// SE-ResNet classifiers with one 2x2 stem per input feature and optional AFF fusion.

#include <array>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "affd/blocks/attention.hpp"
#include "affd/nn/layers.hpp"

namespace affd::blocks {

enum class Variant { resnet34_se, resnet50_se };
enum class Fusion { mfcc_only, lfcc_only, aff };

inline const char* to_string(Variant v) { return v == Variant::resnet34_se ? "resnet34_se" : "resnet50_se"; }
inline const char* to_string(Fusion f) {
  switch (f) {
    case Fusion::mfcc_only: return "mfcc_only";
    case Fusion::lfcc_only: return "lfcc_only";
    default: return "aff";
  }
}

struct BackboneConfig {
  Variant variant = Variant::resnet34_se;
  std::array<std::size_t, 4> stage_blocks{3, 4, 6, 3};
  std::size_t base_width = 64;
  Fusion fusion = Fusion::aff;
  bool masking = false;
  std::size_t se_reduction = 16;
  std::size_t mscam_reduction = 4;

  /// base_width 8, one block per stage.
  static BackboneConfig toy(Fusion fusion = Fusion::aff, Variant variant = Variant::resnet34_se) {
    BackboneConfig c;
    c.variant = variant;
    c.stage_blocks = {1, 1, 1, 1};
    c.base_width = 8;
    c.fusion = fusion;
    return c;
  }

  bool uses_mfcc() const { return fusion != Fusion::lfcc_only; }
  bool uses_lfcc() const { return fusion != Fusion::mfcc_only; }

  void validate() const {
    if (base_width == 0) throw ConfigError("backbone: base_width must be positive");
    for (auto b : stage_blocks)
      if (b == 0) throw ConfigError("backbone: every stage needs at least one block");
    if (se_reduction == 0 || mscam_reduction == 0) throw ConfigError("backbone: reduction ratios must be positive");
  }
};

/// Residual unit with SE on the residual branch before the skip addition:
/// out = relu(skip(x) + SE(convstack(x))).
///
/// Basic: 3x3 -> 3x3. Bottleneck: 1x1 -> 3x3 -> 1x1 (4x expansion). The stride sits on the
/// first 3x3 conv; a 1x1 projection + BN replaces the identity skip when the shape changes.
template <typename T>
class SEResidualBlock {
 public:
  SEResidualBlock() = default;
  SEResidualBlock(Variant variant, std::size_t in_ch, std::size_t width, std::size_t stride, std::size_t se_reduction,
                  std::mt19937_64& rng) {
    using nn::Padding;
    if (variant == Variant::resnet34_se) {
      out_ch_ = width;
      convs.emplace_back(in_ch, width, 3, 3, stride, Padding::same, false, rng);
      convs.emplace_back(width, width, 3, 3, 1, Padding::same, false, rng);
    } else {
      out_ch_ = 4 * width;
      convs.emplace_back(in_ch, width, 1, 1, 1, Padding::same, false, rng);
      convs.emplace_back(width, width, 3, 3, stride, Padding::same, false, rng);
      convs.emplace_back(width, out_ch_, 1, 1, 1, Padding::same, false, rng);
    }
    for (const auto& c : convs) bns.emplace_back(c.out_channels());
    se = SEBlock<T>(out_ch_, se_reduction, rng);
    if (stride != 1 || in_ch != out_ch_) {
      has_projection_ = true;
      proj = nn::Conv2d<T>(in_ch, out_ch_, 1, 1, stride, Padding::same, false, rng);
      proj_bn = nn::BatchNorm2d<T>(out_ch_);
    }
  }

  std::vector<nn::Conv2d<T>> convs;
  std::vector<nn::BatchNorm2d<T>> bns;
  SEBlock<T> se;
  nn::Conv2d<T> proj;
  nn::BatchNorm2d<T> proj_bn;

  std::size_t out_channels() const { return out_ch_; }
  bool has_projection() const { return has_projection_; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode) {
    pre_relu_.clear();
    Tensor<T> h = x;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      h = bns[i].forward(convs[i].forward(h), mode);
      if (i + 1 < convs.size()) {
        pre_relu_.push_back(h);
        h = nn::relu(h);
      }
    }
    h = se.forward(h);
    const Tensor<T> skip = has_projection_ ? proj_bn.forward(proj.forward(x), mode) : x;
    nn::require_same_shape(h, skip, "residual add");
    sum_ = nn::add(h, skip);
    return nn::relu(sum_);
  }

  Tensor<T> backward(const Tensor<T>& gy) {
    const Tensor<T> gsum = nn::relu_backward(sum_, gy);
    Tensor<T> g = se.backward(gsum);
    for (std::size_t i = convs.size(); i-- > 0;) {
      if (i + 1 < convs.size()) g = nn::relu_backward(pre_relu_[i], g);
      g = convs[i].backward(bns[i].backward(g));
    }
    const Tensor<T> gskip = has_projection_ ? proj.backward(proj_bn.backward(gsum)) : gsum;
    for (std::size_t i = 0; i < g.numel(); ++i) g.data[i] += gskip.data[i];
    return g;
  }

  /// Zeroes the last batch-norm scale so the residual branch starts as the zero map.
  void zero_last_gamma() { bns.back().gamma.value.fill(T(0)); }

  void collect(nn::StateRefs<T>& refs, const std::string& prefix) {
    for (std::size_t i = 0; i < convs.size(); ++i) {
      convs[i].collect(refs, prefix + ".conv" + std::to_string(i));
      bns[i].collect(refs, prefix + ".bn" + std::to_string(i));
    }
    se.collect(refs, prefix + ".se");
    if (has_projection_) {
      proj.collect(refs, prefix + ".proj");
      proj_bn.collect(refs, prefix + ".proj_bn");
    }
  }

 private:
  std::size_t out_ch_ = 0;
  bool has_projection_ = false;
  std::vector<Tensor<T>> pre_relu_;
  Tensor<T> sum_;
};

/// Dual-stem SE-ResNet detector producing two logits (real, fake).
template <typename T>
class Model {
 public:
  static constexpr std::size_t kClasses = 2;

  explicit Model(const BackboneConfig& cfg, std::uint64_t seed = 0) : cfg_(cfg) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    using nn::Padding;
    if (cfg.uses_mfcc()) stem_mfcc = nn::Conv2d<T>(1, cfg.base_width, 2, 2, 1, Padding::valid, true, rng);
    if (cfg.uses_lfcc()) stem_lfcc = nn::Conv2d<T>(1, cfg.base_width, 2, 2, 1, Padding::valid, true, rng);
    if (cfg.fusion == Fusion::aff) aff = AFF<T>(cfg.base_width, cfg.mscam_reduction, rng);
    std::size_t in_ch = cfg.base_width;
    for (std::size_t s = 0; s < 4; ++s) {
      const std::size_t width = cfg.base_width << s;
      for (std::size_t b = 0; b < cfg.stage_blocks[s]; ++b) {
        const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
        blocks.emplace_back(cfg.variant, in_ch, width, stride, cfg.se_reduction, rng);
        block_names_.push_back("stage" + std::to_string(s + 1) + ".block" + std::to_string(b));
        in_ch = blocks.back().out_channels();
      }
    }
    fc = nn::Linear<T>(in_ch, kClasses, rng);
  }

  nn::Conv2d<T> stem_mfcc;
  nn::Conv2d<T> stem_lfcc;
  AFF<T> aff;
  std::vector<SEResidualBlock<T>> blocks;
  nn::Linear<T> fc;

  const BackboneConfig& config() const { return cfg_; }

  /// Inputs are N x 1 x H x W padded features; pass nullptr for a feature the mode does not use.
  Tensor<T> forward(const Tensor<T>* mfcc, const Tensor<T>* lfcc, Mode mode) {
    if (cfg_.uses_mfcc() && !mfcc)
      throw ConfigError(std::string("model: fusion mode ") + to_string(cfg_.fusion) + " requires an MFCC input");
    if (cfg_.uses_lfcc() && !lfcc)
      throw ConfigError(std::string("model: fusion mode ") + to_string(cfg_.fusion) + " requires an LFCC input");
    Tensor<T> h;
    switch (cfg_.fusion) {
      case Fusion::mfcc_only: h = stem_mfcc.forward(*mfcc); break;
      case Fusion::lfcc_only: h = stem_lfcc.forward(*lfcc); break;
      case Fusion::aff: {
        const Tensor<T> a = stem_mfcc.forward(*mfcc);
        const Tensor<T> b = stem_lfcc.forward(*lfcc);
        h = aff.forward(a, b, mode);
        break;
      }
    }
    for (auto& blk : blocks) h = blk.forward(h, mode);
    pooled_h_ = h.h();
    pooled_w_ = h.w();
    return fc.forward(nn::global_avg_pool(h));
  }

  /// Backpropagates logit gradients; returns {dL/dmfcc, dL/dlfcc} (empty for absent inputs).
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& glogits) {
    Tensor<T> g = nn::global_avg_pool_backward(fc.backward(glogits), pooled_h_, pooled_w_);
    for (std::size_t i = blocks.size(); i-- > 0;) g = blocks[i].backward(g);
    switch (cfg_.fusion) {
      case Fusion::mfcc_only: return {stem_mfcc.backward(g), Tensor<T>{}};
      case Fusion::lfcc_only: return {Tensor<T>{}, stem_lfcc.backward(g)};
      default: {
        auto [ga, gb] = aff.backward(g);
        return {stem_mfcc.backward(ga), stem_lfcc.backward(gb)};
      }
    }
  }

  nn::StateRefs<T> state() {
    nn::StateRefs<T> refs;
    if (cfg_.uses_mfcc()) stem_mfcc.collect(refs, "stem_mfcc");
    if (cfg_.uses_lfcc()) stem_lfcc.collect(refs, "stem_lfcc");
    if (cfg_.fusion == Fusion::aff) aff.collect(refs, "aff");
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(refs, block_names_[i]);
    fc.collect(refs, "fc");
    return refs;
  }

  std::size_t parameter_count() { return state().parameter_count(); }

 private:
  BackboneConfig cfg_;
  std::vector<std::string> block_names_;
  std::size_t pooled_h_ = 0, pooled_w_ = 0;
};

}  // namespace affd::blocks
