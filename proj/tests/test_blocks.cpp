#include <gtest/gtest.h>

#include <map>

#include "affd/blocks/attention.hpp"
#include "affd/blocks/model.hpp"
#include "affd/nn/optim.hpp"
#include "test_util.hpp"

using namespace affd;
using namespace affd::blocks;
using affd::testing::max_grad_error;
using affd::testing::random_tensor;
using nn::Mode;
using nn::StateRefs;
using nn::Tensor;

namespace {

void zero(nn::Param<double>& p) { p.value.fill(0.0); }

bool all_in_open_unit(const Tensor<double>& t) {
  return std::all_of(t.data.begin(), t.data.end(), [](double v) { return v > 0.0 && v < 1.0; });
}

// Parameter count from layer shapes alone, for basic-block backbones.
std::size_t expected_parameters(const BackboneConfig& c) {
  const std::size_t w = c.base_width;
  std::size_t n = 0;
  const std::size_t stems = c.fusion == Fusion::aff ? 2 : 1;
  n += stems * (w * 4 + w);
  if (c.fusion == Fusion::aff) {
    const std::size_t b = std::max<std::size_t>(1, w / c.mscam_reduction);
    n += 2 * (w * b + 2 * b + (b * w + w));
  }
  std::size_t in = w;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t out = w << s;
    for (std::size_t k = 0; k < c.stage_blocks[s]; ++k) {
      const bool down = s > 0 && k == 0;
      n += in * out * 9 + out * out * 9 + 2 * 2 * out;
      const std::size_t b = std::max<std::size_t>(1, out / c.se_reduction);
      n += out * b + b + b * out + out;
      if (down || in != out) n += in * out + 2 * out;
      in = out;
    }
  }
  return n + in * 2 + 2;
}

void copy_matching_state(Model<double>& from, Model<double>& to) {
  auto src = from.state();
  std::map<std::string, nn::Param<double>*> params(src.params.begin(), src.params.end());
  std::map<std::string, Tensor<double>*> buffers(src.buffers.begin(), src.buffers.end());
  auto dst = to.state();
  for (auto& [name, p] : dst.params) p->value = params.at(name)->value;
  for (auto& [name, b] : dst.buffers) *b = *buffers.at(name);
}

}  // namespace

TEST(SEBlock, ZeroSecondLayerHalvesInput) {
  std::mt19937_64 rng(1);
  SEBlock<double> se(8, 16, rng);
  zero(se.fc2.weight);
  zero(se.fc2.bias);
  const auto x = random_tensor(2, 8, 4, 4, 2);
  const auto y = se.forward(x);
  for (double g : se.gates().data) EXPECT_EQ(g, 0.5);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.data[i], x.data[i] / 2);
}

TEST(SEBlock, SymmetricWeightsGiveEqualGates) {
  std::mt19937_64 rng(3);
  SEBlock<double> se(6, 2, rng);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t i = 0; i < 6; ++i) se.fc1.weight.value.data[o * 6 + i] = 0.1 * static_cast<double>(o + 1);
  for (std::size_t o = 0; o < 6; ++o)
    for (std::size_t i = 0; i < 3; ++i) se.fc2.weight.value.data[o * 3 + i] = 0.3 - 0.2 * static_cast<double>(i);
  Tensor<double> x(1, 6, 3, 3);
  const auto plane = random_tensor(1, 1, 3, 3, 4);
  for (std::size_t c = 0; c < 6; ++c) std::copy(plane.data.begin(), plane.data.end(), x.data.begin() + c * 9);
  se.forward(x);
  for (double g : se.gates().data) EXPECT_EQ(g, se.gates().data[0]);
}

TEST(SEBlock, GatesInOpenUnitIntervalAndGradients) {
  std::mt19937_64 rng(5);
  SEBlock<double> se(8, 4, rng);
  auto x = random_tensor(2, 8, 4, 4, 6);
  se.forward(x);
  EXPECT_TRUE(all_in_open_unit(se.gates()));
  StateRefs<double> refs;
  se.collect(refs, "se");
  EXPECT_LT(max_grad_error(
                x, refs, [&] { return se.forward(x); }, [&](const Tensor<double>& g) { return se.backward(g); }, 7),
            1e-4);
  EXPECT_THROW(se.forward(random_tensor(1, 4, 2, 2, 8)), DimensionError);
}

TEST(MSCAM, SpatiallyConstantInputGivesConstantGate) {
  std::mt19937_64 rng(9);
  MSCAM<double> cam(8, 4, rng);
  Tensor<double> x(2, 8, 5, 6);
  const auto per_channel = random_tensor(2, 8, 1, 1, 10);
  for (std::size_t nc = 0; nc < 16; ++nc)
    for (std::size_t i = 0; i < 30; ++i) x.data[nc * 30 + i] = per_channel.data[nc];
  const auto m = cam.forward(x, Mode::eval);
  for (std::size_t nc = 0; nc < 16; ++nc)
    for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(m.data[nc * 30 + i], m.data[nc * 30]);
  EXPECT_TRUE(all_in_open_unit(m));
}

TEST(MSCAM, ZeroWeightsGiveHalf) {
  std::mt19937_64 rng(11);
  MSCAM<double> cam(8, 4, rng);
  for (auto* br : {&cam.global_branch, &cam.local_branch}) {
    zero(br->conv1.weight);
    zero(br->conv2.weight);
    zero(br->conv2.bias);
  }
  const auto m = cam.forward(random_tensor(2, 8, 3, 3, 12), Mode::train);
  for (double v : m.data) EXPECT_EQ(v, 0.5);
}

TEST(MSCAM, GradientCheck) {
  std::mt19937_64 rng(13);
  MSCAM<double> cam(8, 4, rng);
  auto x = random_tensor(2, 8, 6, 6, 14);
  StateRefs<double> refs;
  cam.collect(refs, "cam");
  EXPECT_LT(max_grad_error(
                x, refs, [&] { return cam.forward(x, Mode::train); },
                [&](const Tensor<double>& g) { return cam.backward(g); }, 15),
            1e-4);
}

TEST(AFF, EqualInputsReturnedExactly) {
  std::mt19937_64 rng(16);
  AFF<double> aff(8, 4, rng);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = random_tensor(2, 8, 4, 3, 100 + s, -5.0, 5.0);
    EXPECT_EQ(aff.forward(x, x, Mode::train), x);
    EXPECT_EQ(aff.forward(x, x, Mode::eval), x);
  }
}

TEST(AFF, HalfGateAverages) {
  std::mt19937_64 rng(17);
  AFF<double> aff(8, 4, rng);
  zero(aff.mscam.global_branch.conv2.weight);
  zero(aff.mscam.global_branch.conv2.bias);
  zero(aff.mscam.local_branch.conv2.weight);
  zero(aff.mscam.local_branch.conv2.bias);
  const auto x = random_tensor(1, 8, 3, 3, 18);
  const auto y = random_tensor(1, 8, 3, 3, 19);
  const auto z = aff.forward(x, y, Mode::train);
  for (std::size_t i = 0; i < z.numel(); ++i) EXPECT_NEAR(z.data[i], (x.data[i] + y.data[i]) / 2, 1e-15);
  EXPECT_THROW(aff.forward(x, random_tensor(1, 8, 3, 2, 20), Mode::train), DimensionError);
}

TEST(AFF, GradientCheckBothInputsAndParams) {
  std::mt19937_64 rng(21);
  AFF<double> aff(8, 4, rng);
  auto x = random_tensor(2, 8, 4, 4, 22);
  auto y = random_tensor(2, 8, 4, 4, 23);
  StateRefs<double> refs;
  aff.collect(refs, "aff");
  Tensor<double> gy_last;
  const double ex = max_grad_error(
      x, refs, [&] { return aff.forward(x, y, Mode::train); },
      [&](const Tensor<double>& g) {
        auto [gx, gy] = aff.backward(g);
        gy_last = gy;
        return gx;
      },
      24);
  EXPECT_LT(ex, 1e-4);
  const auto R = random_tensor(2, 8, 4, 4, 25);
  aff.forward(x, y, Mode::train);
  const auto gy = aff.backward(R).second;
  auto f = [&] { return affd::testing::dot(aff.forward(x, y, Mode::train), R); };
  EXPECT_LT(nn::gradient_check(f, y.data, gy.data, 1e-6).max_relative_error, 1e-4);
}

TEST(SEResidualBlock, ZeroLastGammaGivesReluSkip) {
  std::mt19937_64 rng(26);
  SEResidualBlock<double> same(Variant::resnet34_se, 8, 8, 1, 16, rng);
  same.zero_last_gamma();
  const auto x = random_tensor(2, 8, 5, 5, 27);
  EXPECT_EQ(same.forward(x, Mode::train), nn::relu(x));

  SEResidualBlock<double> down(Variant::resnet34_se, 8, 16, 2, 16, rng);
  ASSERT_TRUE(down.has_projection());
  down.zero_last_gamma();
  const auto y = down.forward(x, Mode::eval);
  const auto skip = down.proj_bn.forward(down.proj.forward(x), Mode::eval);
  EXPECT_EQ(y, nn::relu(skip));
}

TEST(SEResidualBlock, ZeroInputGivesZero) {
  std::mt19937_64 rng(28);
  for (Variant v : {Variant::resnet34_se, Variant::resnet50_se}) {
    const std::size_t in = v == Variant::resnet34_se ? 8 : 32;
    SEResidualBlock<double> blk(v, in, 8, 1, 16, rng);
    EXPECT_FALSE(blk.has_projection());
    const Tensor<double> x(2, in, 4, 4);
    for (Mode m : {Mode::train, Mode::eval}) EXPECT_EQ(blk.forward(x, m), x);
  }
}

TEST(SEResidualBlock, GradientCheck) {
  std::mt19937_64 rng(29);
  for (Variant v : {Variant::resnet34_se, Variant::resnet50_se}) {
    SEResidualBlock<double> blk(v, 4, 4, 2, 4, rng);
    auto x = random_tensor(2, 4, 5, 5, 30);
    StateRefs<double> refs;
    blk.collect(refs, "blk");
    EXPECT_LT(max_grad_error(
                  x, refs, [&] { return blk.forward(x, Mode::train); },
                  [&](const Tensor<double>& g) { return blk.backward(g); }, 31),
              1e-4)
        << to_string(v);
  }
}

TEST(Model, ToyParameterCount) {
  for (Fusion f : {Fusion::aff, Fusion::mfcc_only, Fusion::lfcc_only}) {
    Model<double> m(BackboneConfig::toy(f), 1);
    EXPECT_EQ(m.parameter_count(), expected_parameters(m.config())) << to_string(f);
  }
  Model<float> toy(BackboneConfig::toy(), 0);
  EXPECT_EQ(toy.parameter_count(), 78234u);
  BackboneConfig full;
  EXPECT_EQ(Model<float>(full, 0).parameter_count(), expected_parameters(full));
}

TEST(Model, OutputShapeForEveryVariant) {
  for (Variant v : {Variant::resnet34_se, Variant::resnet50_se})
    for (Fusion f : {Fusion::aff, Fusion::mfcc_only, Fusion::lfcc_only})
      for (std::size_t n : {1u, 3u}) {
        Model<float> m(BackboneConfig::toy(f, v), 2);
        const Tensor<float> a = random_tensor(n, 1, 136, 44, 3).cast<float>();
        const Tensor<float> b = random_tensor(n, 1, 136, 44, 4).cast<float>();
        const auto y = m.forward(&a, &b, Mode::eval);
        EXPECT_EQ(y.shape, (std::array<std::size_t, 4>{n, 2, 1, 1}));
        EXPECT_TRUE(nn::all_finite(y));
      }
}

TEST(Model, StemGeometry) {
  std::mt19937_64 rng(5);
  Model<double> m(BackboneConfig::toy(), 5);
  const auto s = m.stem_mfcc.forward(Tensor<double>(1, 1, 136, 44));
  EXPECT_EQ(s.shape, (std::array<std::size_t, 4>{1, 8, 135, 43}));
}

TEST(Model, MissingInputIsConfigError) {
  const Tensor<float> a(1, 1, 136, 44);
  Model<float> aff(BackboneConfig::toy(Fusion::aff), 1);
  EXPECT_THROW(aff.forward(&a, nullptr, Mode::eval), ConfigError);
  EXPECT_THROW(aff.forward(nullptr, &a, Mode::eval), ConfigError);
  Model<float> m(BackboneConfig::toy(Fusion::mfcc_only), 1);
  EXPECT_THROW(m.forward(nullptr, &a, Mode::eval), ConfigError);
  EXPECT_NO_THROW(m.forward(&a, nullptr, Mode::eval));
  Model<float> l(BackboneConfig::toy(Fusion::lfcc_only), 1);
  EXPECT_THROW(l.forward(&a, nullptr, Mode::eval), ConfigError);
}

TEST(Model, AffWithIdenticalInputsMatchesSinglePath) {
  Model<double> aff(BackboneConfig::toy(Fusion::aff), 7);
  aff.stem_lfcc.weight.value = aff.stem_mfcc.weight.value;
  aff.stem_lfcc.bias.value = aff.stem_mfcc.bias.value;
  Model<double> single(BackboneConfig::toy(Fusion::mfcc_only), 99);
  copy_matching_state(aff, single);
  const auto x = random_tensor(2, 1, 136, 44, 8);
  for (Mode mode : {Mode::eval, Mode::train}) {
    const auto za = aff.forward(&x, &x, mode);
    const auto zs = single.forward(&x, nullptr, mode);
    EXPECT_EQ(za, zs);
  }
}

TEST(Model, Deterministic) {
  Model<float> a(BackboneConfig::toy(), 11), b(BackboneConfig::toy(), 11);
  const Tensor<float> x = random_tensor(2, 1, 136, 44, 12).cast<float>();
  const Tensor<float> y = random_tensor(2, 1, 136, 44, 13).cast<float>();
  EXPECT_EQ(a.forward(&x, &y, Mode::train), b.forward(&x, &y, Mode::train));
}

TEST(Model, FullGradientCheckSmallWidth) {
  BackboneConfig cfg = BackboneConfig::toy();
  cfg.base_width = 4;
  cfg.se_reduction = 4;
  Model<double> m(cfg, 13);
  ASSERT_LT(m.parameter_count(), 50000u);
  auto a = random_tensor(2, 1, 12, 10, 14);
  auto b = random_tensor(2, 1, 12, 10, 15);
  auto refs = m.state();
  const auto R = random_tensor(2, 2, 1, 1, 16);
  nn::zero_grad(refs);
  m.forward(&a, &b, Mode::train);
  const auto [ga, gb] = m.backward(R);
  auto f = [&] { return affd::testing::dot(m.forward(&a, &b, Mode::train), R); };
  double worst = nn::gradient_check(f, a.data, ga.data, 1e-6).max_relative_error;
  worst = std::max(worst, nn::gradient_check(f, b.data, gb.data, 1e-6).max_relative_error);
  for (const auto& [name, p] : refs.params) {
    const auto analytic = p->grad.data;
    worst = std::max(worst, nn::gradient_check(f, p->value.data, analytic, 1e-6).max_relative_error);
  }
  EXPECT_LT(worst, 1e-3);
}
