#pragma once

// Baseline: flattened single-feature matrix -> 5 -> 2 -> 2 MLP (relu, softmax head), SGD on log-loss.

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "affd/nn/layers.hpp"
#include "affd/nn/loss.hpp"
#include "affd/nn/optim.hpp"
#include "affd/pipeline/train.hpp"

namespace affd::pipeline {

template <typename T>
class Mlp {
 public:
  static constexpr std::size_t kHidden1 = 5;
  static constexpr std::size_t kHidden2 = 2;
  static constexpr std::size_t kClasses = 2;

  Mlp(std::size_t inputs, std::uint64_t seed, bool zero_head = false) : inputs_(inputs) {
    std::mt19937_64 rng(seed);
    fc1 = nn::Linear<T>(inputs, kHidden1, rng);
    fc2 = nn::Linear<T>(kHidden1, kHidden2, rng);
    fc3 = nn::Linear<T>(kHidden2, kClasses, rng);
    if (zero_head) {
      fc3.weight.value.fill(T(0));
      fc3.bias.value.fill(T(0));
    }
  }

  nn::Linear<T> fc1, fc2, fc3;

  std::size_t inputs() const { return inputs_; }

  nn::Tensor<T> forward(const nn::Tensor<T>& x) {
    h1_ = fc1.forward(x);
    h2_ = fc2.forward(nn::relu(h1_));
    return fc3.forward(nn::relu(h2_));
  }

  nn::Tensor<T> backward(const nn::Tensor<T>& glogits) {
    auto g = nn::relu_backward(h2_, fc3.backward(glogits));
    g = nn::relu_backward(h1_, fc2.backward(g));
    return fc1.backward(g);
  }

  nn::StateRefs<T> state() {
    nn::StateRefs<T> refs;
    fc1.collect(refs, "fc1");
    fc2.collect(refs, "fc2");
    fc3.collect(refs, "fc3");
    return refs;
  }

 private:
  std::size_t inputs_;
  nn::Tensor<T> h1_, h2_;
};

/// Per-dimension standardization statistics over flattened training vectors.
struct FlatStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline FlatStats flat_stats(const std::vector<const FeatureMatrix*>& mats) {
  FlatStats s;
  if (mats.empty()) return s;
  const std::size_t D = mats.front()->values.size();
  s.mean.assign(D, 0.0);
  s.stddev.assign(D, 0.0);
  for (const auto* m : mats) {
    if (m->values.size() != D) throw DimensionError("mlp: feature matrices differ in size");
    for (std::size_t d = 0; d < D; ++d) s.mean[d] += m->values[d];
  }
  const double n = static_cast<double>(mats.size());
  for (auto& v : s.mean) v /= n;
  for (const auto* m : mats)
    for (std::size_t d = 0; d < D; ++d) s.stddev[d] += (m->values[d] - s.mean[d]) * (m->values[d] - s.mean[d]);
  for (auto& v : s.stddev) {
    v = std::sqrt(v / n);
    if (!(v > 1e-8)) v = 1.0;
  }
  return s;
}

inline nn::Tensor<double> flat_batch(const std::vector<const FeatureMatrix*>& mats, const std::vector<std::size_t>& ids,
                                     const FlatStats& s) {
  const std::size_t D = s.mean.size();
  nn::Tensor<double> x(ids.size(), D, 1, 1);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& v = mats[ids[i]]->values;
    if (v.size() != D)
      throw DimensionError("mlp: input has " + std::to_string(v.size()) + " values, model expects " + std::to_string(D));
    for (std::size_t d = 0; d < D; ++d) x.sample(i)[d] = (v[d] - s.mean[d]) / s.stddev[d];
  }
  return x;
}

struct MlpOutcome {
  metrics::EvalReport report;
  std::vector<EpochLog> epochs;
  std::size_t input_dim = 0;
};

/// Trains the MLP on split=train with the configured single feature, evaluates on cfg.mlp.eval_split,
/// writes mlp_report_<split>.* and mlp_train_log.csv.
inline MlpOutcome cmd_baseline_mlp(const fs::path& index_path, const RunConfig& cfg, const fs::path& out_dir,
                                   bool zero_head = false) {
  const MlpConfig& mc = cfg.mlp;
  const FeatureKinds need{mc.feature == FeatureKind::mfcc, mc.feature == FeatureKind::lfcc};
  const Split eval_split = parse_split(mc.eval_split);
  const auto train = load_split(index_path, Split::train, need);
  const auto test = load_split(index_path, eval_split, need);
  if (train.empty()) throw DegenerateInputError("baseline-mlp: split train is empty");
  if (test.empty()) throw DegenerateInputError("baseline-mlp: split " + mc.eval_split + " is empty");

  auto pick = [&](const std::vector<Segment>& segs) {
    std::vector<const FeatureMatrix*> v;
    for (const auto& s : segs) v.push_back(mc.feature == FeatureKind::mfcc ? &s.mfcc : &s.lfcc);
    return v;
  };
  const auto train_x = pick(train), test_x = pick(test);
  const FlatStats stats = flat_stats(train_x);

  MlpOutcome out;
  out.input_dim = stats.mean.size();
  Mlp<double> mlp(out.input_dim, mix_seed(cfg.seed, {0x4D4C50ULL}), zero_head);
  const auto refs = mlp.state();
  nn::Sgd<double> opt(mc.learning_rate, mc.momentum);
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 0; epoch < mc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(cfg.seed, {0x4D4C50ULL, epoch}));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += mc.batch_size) {
      const std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + mc.batch_size)));
      std::vector<int> labels;
      for (auto i : ids) labels.push_back(train[i].label);
      const auto lr = nn::softmax_cross_entropy(mlp.forward(flat_batch(train_x, ids, stats)), labels);
      nn::zero_grad(refs);
      mlp.backward(lr.grad);
      opt.step(refs);
      loss_sum += lr.loss * static_cast<double>(ids.size());
      correct += lr.correct;
    }
    const double n = static_cast<double>(train.size());
    out.epochs.push_back({epoch + 1, loss_sum / n, static_cast<double>(correct) / n});
  }

  std::vector<std::size_t> all(test.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto logits = mlp.forward(flat_batch(test_x, all, stats));
  std::vector<metrics::ScoredSample> scored;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const float z[2] = {static_cast<float>(logits.sample(i)[0]), static_cast<float>(logits.sample(i)[1])};
    scored.push_back({fake_probability(z), test[i].label, test[i].source_tag});
  }
  out.report = metrics::evaluate(scored, cfg.eval.threshold);
  const std::string title = std::string("mlp baseline ") + std::to_string(out.input_dim) + "-5-2-2 / " + to_string(mc.feature);
  write_reports(out_dir, "mlp_report_" + mc.eval_split, out.report, title, mc.eval_split);
  write_text(out_dir / "mlp_train_log.csv", format_train_log(out.epochs, 1));
  return out;
}

}  // namespace affd::pipeline
