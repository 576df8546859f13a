// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "affd/affd.hpp"
#include "test_util.hpp"

using namespace affd;
using affd::testing::max_grad_error;
using affd::testing::random_tensor;
using affd::testing::TempDir;
using nn::Mode;
using nn::StateRefs;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kFftTol = 1e-9;
constexpr double kParsevalTol = 1e-6;
constexpr double kDctTol = 1e-9;
constexpr double kDspBudgetS = 30.0;
constexpr double kMaskSumTol = 1e-5;
constexpr double kLayerGradTol = 1e-4;
constexpr double kModelGradTol = 1e-3;
constexpr double kAucTol = 1e-9;
constexpr double kEerTol = 5e-3;
constexpr double kE2eAccuracy = 0.95;
constexpr double kE2eEer = 0.10;
constexpr double kE2eBudgetS = 600.0;
constexpr double kAblationMargin = 0.02;

// End-to-end run.
constexpr std::size_t kE2ePerClass = 250;
constexpr std::uint64_t kE2eSeed = 7;
constexpr std::size_t kE2eEpochs = 30;

// Ablation run.
constexpr std::size_t kAblPerClass = 100;
constexpr std::uint64_t kAblSeed = 21;
constexpr std::size_t kAblEpochs = 10;

// Reproducibility run.
constexpr std::size_t kRepPerClass = 20;
constexpr std::size_t kRepEpochs = 2;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

int failures = 0;

void run(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %-16s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

AudioClip noise_clip(int sr, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  AudioClip c;
  c.sample_rate = sr;
  c.samples.resize(n);
  for (auto& s : c.samples) s = u(rng);
  return c;
}

// ---- dsp

Outcome dsp_numerics() {
  Outcome o;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  double fft_err = 0.0;
  std::size_t vectors = 0;
  for (std::size_t n = 2; n <= 1024; n *= 2)
    for (int rep = 0; rep < 12; ++rep, ++vectors) {
      const auto x = random_vec(n, rng);
      const auto X = dsp::fft(x, n);
      for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
          const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
          acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        fft_err = std::max(fft_err, std::abs(X[k] - acc));
      }
    }
  o.require(vectors >= 100, "fewer than 100 fft vectors");
  o.require(fft_err < kFftTol, "fft vs dft " + fmt_g(fft_err));

  // Parseval on every frame of a real extraction setup.
  const auto frames = dsp::frame_signal(noise_clip(22050, 22050, 2), dsp::FrameConfig{});
  double parseval = 0.0;
  for (std::size_t t = 0; t < frames.n_frames; ++t) {
    const auto f = frames.frame(t);
    const std::vector<double> v(f.begin(), f.end());
    const auto P = dsp::power_spectrum(v, frames.n_fft);
    double time = 0.0;
    for (double s : v) time += s * s;
    const std::size_t n = frames.n_fft;
    double freq = P[0] + P[n / 2];
    for (std::size_t k = 1; k < n / 2; ++k) freq += 2.0 * P[k];
    freq /= static_cast<double>(n);
    parseval = std::max(parseval, std::abs(time - freq) / std::max(time, 1e-300));
  }
  o.require(parseval < kParsevalTol, "parseval " + fmt_g(parseval));

  // DCT-II followed by an independent DCT-III inverse.
  double dct_err = 0.0;
  for (std::size_t n : {2u, 13u, 40u, 128u}) {
    const auto v = random_vec(n, rng);
    const auto c = dsp::dct2(v, n);
    for (std::size_t j = 0; j < n; ++j) {
      double x = c[0] * std::sqrt(1.0 / n);
      for (std::size_t k = 1; k < n; ++k)
        x += c[k] * std::sqrt(2.0 / n) * std::cos(std::numbers::pi * k * (2.0 * j + 1.0) / (2.0 * n));
      dct_err = std::max(dct_err, std::abs(x - v[j]));
    }
  }
  o.require(dct_err < kDctTol, "dct round trip " + fmt_g(dct_err));
  const double secs = seconds_since(t0);
  o.require(secs <= kDspBudgetS, "over time budget");
  o.note("fft " + fmt_g(fft_err) + " over " + std::to_string(vectors) + " vectors, parseval " + fmt_g(parseval) +
         ", dct " + fmt_g(dct_err));
  return o;
}

// ---- features

Outcome feature_geometry() {
  Outcome o;
  for (int sr : {8000, 16000, 22050, 44100}) {
    const auto m = features::pad_center(dsp::extract_mfcc(noise_clip(sr, static_cast<std::size_t>(sr), sr)));
    o.require(m.src_rows == 20 && m.src_cols == 44, "mfcc shape at " + std::to_string(sr));
    o.require(m.row_offset == 58 && m.row_offset + m.src_rows - 1 == 77, "mfcc rows at " + std::to_string(sr));
    o.require(m.values.rows == 136 && m.values.cols == 44, "grid at " + std::to_string(sr));
  }
  const auto l = features::pad_center(dsp::extract_lfcc(noise_clip(16000, 16000, 3)));
  o.require(l.src_rows == 98 && l.src_cols == 13, "lfcc shape");
  o.require(l.row_offset == 19, "lfcc row offset");
  const std::size_t left = l.col_offset, right = 44 - l.col_offset - l.src_cols;
  o.require(left == 15 && right == 16, "lfcc column padding " + std::to_string(left) + "/" + std::to_string(right));
  double outside = 0.0;
  for (std::size_t r = 0; r < 136; ++r)
    for (std::size_t c = 0; c < 44; ++c)
      if (r < 19 || r > 116 || c < 15 || c > 27) outside += std::abs(l.values.at(r, c));
  o.require(outside == 0.0, "nonzero padding");
  o.note("mfcc rows 58..77, lfcc cols " + std::to_string(left) + "+13+" + std::to_string(right));
  return o;
}

Outcome masking_invariants() {
  Outcome o;
  o.require(features::band_width(0.07, 136) == 9, "band width");
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 4.0);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    FeatureMatrix m(136, 44, FeatureKind::mfcc, Axis::coefficient, Axis::time);
    for (auto& v : m.values) v = nd(rng);
    const auto p = features::pad_center(m);
    for (auto axis : {features::MaskAxis::frequency, features::MaskAxis::time}) {
      features::MaskBand band;
      const auto q = features::apply_mask(p, {axis, 0.07, seed}, &band);
      const bool rows = band.along_rows;
      bool outside_same = true;
      for (std::size_t r = 0; r < 136; ++r)
        for (std::size_t c = 0; c < 44; ++c) {
          const std::size_t line = rows ? r : c;
          if ((line < band.start || line >= band.start + band.width) && q.values.at(r, c) != p.values.at(r, c))
            outside_same = false;
        }
      o.require(outside_same, "cells outside the band changed");
      for (std::size_t line = band.start; line < band.start + band.width; ++line) {
        double before = 0.0, after = 0.0;
        for (std::size_t i = 0; i < (rows ? 44u : 136u); ++i) {
          before += rows ? p.values.at(line, i) : p.values.at(i, line);
          after += rows ? q.values.at(line, i) : q.values.at(i, line);
        }
        worst = std::max(worst, std::abs(after - before) / std::max(std::abs(before), 1e-8));
      }
    }
  }
  o.require(worst < kMaskSumTol, "relative line sum drift " + fmt_g(worst));
  FeatureMatrix k(136, 44, FeatureKind::mfcc, Axis::coefficient, Axis::time);
  for (auto& v : k.values) v = -2.5;
  const auto pk = features::pad_center(k);
  o.require(features::apply_mask(pk, {features::MaskAxis::frequency, 0.07, 9}).values == pk.values,
            "constant grid not fixed");
  o.note("width 9, relative line sum drift " + fmt_g(worst));
  return o;
}

// ---- nn and blocks

Outcome gradient_suite() {
  Outcome o;
  std::mt19937_64 rng(5);
  double layer = 0.0;
  {
    nn::Conv2d<double> conv(3, 4, 3, 3, 2, nn::Padding::same, true, rng);
    auto x = random_tensor(2, 3, 7, 6, 1);
    StateRefs<double> refs;
    conv.collect(refs, "conv");
    layer = std::max(layer, max_grad_error(
                                x, refs, [&] { return conv.forward(x); },
                                [&](const Tensor<double>& g) { return conv.backward(g); }, 2));
  }
  for (Mode mode : {Mode::train, Mode::eval}) {
    nn::BatchNorm2d<double> bn(3);
    auto x = random_tensor(4, 3, 3, 3, 3);
    StateRefs<double> refs;
    bn.collect(refs, "bn");
    const auto saved_mean = bn.running_mean, saved_var = bn.running_var;
    layer = std::max(layer, max_grad_error(
                                x, refs,
                                [&] {
                                  bn.running_mean = saved_mean;
                                  bn.running_var = saved_var;
                                  return bn.forward(x, mode);
                                },
                                [&](const Tensor<double>& g) { return bn.backward(g); }, 4));
  }
  {
    nn::Linear<double> fc(12, 5, rng);
    auto x = random_tensor(3, 12, 1, 1, 5);
    StateRefs<double> refs;
    fc.collect(refs, "fc");
    layer = std::max(layer, max_grad_error(
                                x, refs, [&] { return fc.forward(x); },
                                [&](const Tensor<double>& g) { return fc.backward(g); }, 6));
  }
  {
    blocks::SEBlock<double> se(8, 4, rng);
    auto x = random_tensor(2, 8, 4, 4, 7);
    StateRefs<double> refs;
    se.collect(refs, "se");
    layer = std::max(layer, max_grad_error(
                                x, refs, [&] { return se.forward(x); },
                                [&](const Tensor<double>& g) { return se.backward(g); }, 8));
  }
  {
    blocks::AFF<double> aff(8, 4, rng);
    auto x = random_tensor(2, 8, 4, 4, 9);
    const auto y = random_tensor(2, 8, 4, 4, 10);
    StateRefs<double> refs;
    aff.collect(refs, "aff");
    layer = std::max(layer, max_grad_error(
                                x, refs, [&] { return aff.forward(x, y, Mode::train); },
                                [&](const Tensor<double>& g) { return aff.backward(g).first; }, 11));
  }
  for (auto v : {blocks::Variant::resnet34_se, blocks::Variant::resnet50_se}) {
    blocks::SEResidualBlock<double> blk(v, 4, 4, 2, 4, rng);
    auto x = random_tensor(2, 4, 5, 5, 12);
    StateRefs<double> refs;
    blk.collect(refs, "blk");
    layer = std::max(layer, max_grad_error(
                                x, refs, [&] { return blk.forward(x, Mode::train); },
                                [&](const Tensor<double>& g) { return blk.backward(g); }, 13));
  }
  o.require(layer < kLayerGradTol, "layer gradient error " + fmt_g(layer));

  blocks::BackboneConfig cfg = blocks::BackboneConfig::toy();
  cfg.base_width = 4;
  cfg.se_reduction = 4;
  blocks::Model<double> m(cfg, 13);
  auto a = random_tensor(2, 1, 12, 10, 14);
  auto b = random_tensor(2, 1, 12, 10, 15);
  auto refs = m.state();
  const auto R = random_tensor(2, 2, 1, 1, 16);
  nn::zero_grad(refs);
  m.forward(&a, &b, Mode::train);
  const auto [ga, gb] = m.backward(R);
  auto f = [&] { return testing::dot(m.forward(&a, &b, Mode::train), R); };
  double model = nn::gradient_check(f, a.data, ga.data, 1e-6).max_relative_error;
  model = std::max(model, nn::gradient_check(f, b.data, gb.data, 1e-6).max_relative_error);
  for (const auto& [name, p] : refs.params) {
    const auto analytic = p->grad.data;
    model = std::max(model, nn::gradient_check(f, p->value.data, analytic, 1e-6).max_relative_error);
  }
  o.require(model < kModelGradTol, "model gradient error " + fmt_g(model));
  o.note("layers " + fmt_g(layer) + ", model " + fmt_g(model) + " with " + std::to_string(m.parameter_count()) +
         " params");
  return o;
}

Outcome block_identities() {
  Outcome o;
  std::mt19937_64 rng(17);
  blocks::AFF<double> aff(8, 4, rng);
  blocks::SEBlock<double> se(8, 4, rng);
  std::size_t exact = 0;
  bool gates_ok = true;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto x = random_tensor(2, 8, 4, 3, 1000 + s, -10.0, 10.0);
    exact += aff.forward(x, x, s % 2 ? Mode::train : Mode::eval) == x;
    const auto g = aff.mscam.forward(x, Mode::eval);
    se.forward(x);
    for (const auto* t : {&g, &se.gates()})
      for (double v : t->data) gates_ok = gates_ok && v > 0.0 && v < 1.0;
  }
  o.require(exact == 100, "aff(x, x) != x in " + std::to_string(100 - exact) + " cases");
  o.require(gates_ok, "gate outside (0, 1)");
  o.note("aff(x, x) == x in " + std::to_string(exact) + "/100");
  return o;
}

// ---- metrics

Outcome metric_properties() {
  Outcome o;
  using metrics::ScoredSample;
  auto sample = [](std::size_t n, std::uint64_t seed, bool quantize) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> fd(0.2, 1.0), rd(0.0, 0.8);
    std::vector<ScoredSample> v;
    for (std::size_t i = 0; i < n; ++i) {
      const int label = i % 2 ? metrics::fake : metrics::real;
      double s = label == metrics::fake ? fd(rng) : rd(rng);
      if (quantize) s = std::round(s * 20.0) / 20.0;
      v.push_back({s, label, "t"});
    }
    return v;
  };
  double auc_err = 0.0, eer_err = 0.0, sym_err = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto v = sample(1000, seed, seed % 2 == 0);
    const auto roc = metrics::roc_curve(v);
    double wins = 0.0, pairs = 0.0;
    for (const auto& f : v)
      if (f.label == metrics::fake)
        for (const auto& r : v)
          if (r.label == metrics::real) {
            wins += f.score > r.score ? 1.0 : f.score == r.score ? 0.5 : 0.0;
            pairs += 1.0;
          }
    auc_err = std::max(auc_err, std::abs(metrics::auc(roc) - wins / pairs));

    if (seed % 2 == 1) {
      double best_gap = 2.0, swept = 0.0;
      double P = 0, N = 0;
      for (const auto& s : v) (s.label == metrics::fake ? P : N) += 1;
      std::vector<double> fake_s, real_s;
      for (const auto& s : v) (s.label == metrics::fake ? fake_s : real_s).push_back(s.score);
      std::sort(fake_s.begin(), fake_s.end());
      std::sort(real_s.begin(), real_s.end());
      constexpr int steps = 100000;
      for (int k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) / steps;
        const double fn = static_cast<double>(std::lower_bound(fake_s.begin(), fake_s.end(), t) - fake_s.begin());
        const double fp =
            static_cast<double>(real_s.end() - std::lower_bound(real_s.begin(), real_s.end(), t));
        const double gap = std::abs(fp / N - fn / P);
        if (gap < best_gap) {
          best_gap = gap;
          swept = 0.5 * (fp / N + fn / P);
        }
      }
      eer_err = std::max(eer_err, std::abs(metrics::eer(roc).eer - swept));
    }

    const double e = metrics::eer(roc).eer;
    for (auto& s : v) {
      s.label = s.label == metrics::fake ? metrics::real : metrics::fake;
      s.score = 1.0 - s.score;
    }
    sym_err = std::max(sym_err, std::abs(metrics::eer(metrics::roc_curve(v)).eer - e));
  }
  o.require(auc_err < kAucTol, "auc vs pairwise " + fmt_g(auc_err));
  o.require(eer_err < kEerTol, "eer vs sweep " + fmt_g(eer_err));
  o.require(sym_err < 1e-12, "eer asymmetric " + fmt_g(sym_err));
  o.note("auc " + fmt_g(auc_err) + ", eer " + fmt_g(eer_err) + ", swap " + fmt_g(sym_err));
  return o;
}

// ---- pipeline

struct RunResult {
  metrics::EvalReport report;
  double train_s = 0.0;
  std::size_t parameters = 0;
};

RunResult full_run(const fs::path& root, const pipeline::SynthTaskSpec& spec, const pipeline::RunConfig& cfg) {
  pipeline::cmd_synthgen(spec, root / "corpus");
  pipeline::cmd_extract(root / "corpus" / "manifest.csv", cfg, root / "feat");
  RunResult r;
  const auto t0 = Clock::now();
  r.parameters = pipeline::cmd_train(root / "feat" / "index.csv", cfg, root / "run").parameters;
  r.train_s = seconds_since(t0);
  r.report = pipeline::cmd_eval(root / "run" / pipeline::kCheckpointFile, root / "feat" / "index.csv",
                                pipeline::Split::test, root / "run", cfg.eval)
                 .report;
  return r;
}

pipeline::SynthTaskSpec split_spec(std::size_t per_class, std::uint64_t seed) {
  pipeline::SynthTaskSpec spec;
  spec.n_per_class = per_class;
  spec.seed = seed;
  spec.train_fraction = 0.8;
  spec.test_fraction = 0.2;
  return spec;
}

Outcome end_to_end() {
  Outcome o;
  TempDir dir("accept_e2e");
  pipeline::RunConfig cfg;
  cfg.optimizer.epochs = kE2eEpochs;
  const auto t0 = Clock::now();
  const auto r = full_run(dir.path, split_spec(kE2ePerClass, kE2eSeed), cfg);
  const double total = seconds_since(t0);
  o.require(r.report.accuracy >= kE2eAccuracy, "accuracy " + fmt_g(r.report.accuracy));
  o.require(r.report.eer <= kE2eEer, "eer " + fmt_g(r.report.eer));
  o.require(total <= kE2eBudgetS, "runtime " + fmt_g(total) + "s");
  char buf[160];
  std::snprintf(buf, sizeof buf, "accuracy %.4f, auc %.4f, eer %.4f, %zu params, train %.0fs, total %.0fs",
                r.report.accuracy, r.report.auc, r.report.eer, r.parameters, r.train_s, total);
  o.note(buf);
  return o;
}

Outcome ablation() {
  Outcome o;
  TempDir dir("accept_abl");
  auto spec = split_spec(kAblPerClass, kAblSeed);
  spec.recipe = pipeline::SynthRecipe::split_band;
  pipeline::cmd_synthgen(spec, dir.path / "corpus");
  pipeline::RunConfig base;
  base.optimizer.epochs = kAblEpochs;
  pipeline::cmd_extract(dir.path / "corpus" / "manifest.csv", base, dir.path / "feat");
  const fs::path index = dir.path / "feat" / "index.csv";
  double auc[3] = {};
  const blocks::Fusion modes[3] = {blocks::Fusion::aff, blocks::Fusion::mfcc_only, blocks::Fusion::lfcc_only};
  for (int i = 0; i < 3; ++i) {
    pipeline::RunConfig cfg = base;
    cfg.model = blocks::BackboneConfig::toy(modes[i]);
    const fs::path out = dir.path / blocks::to_string(modes[i]);
    pipeline::cmd_train(index, cfg, out);
    auc[i] = pipeline::cmd_eval(out / pipeline::kCheckpointFile, index, pipeline::Split::test, out).report.auc;
  }
  const double single = std::max(auc[1], auc[2]);
  o.require(auc[0] >= single - kAblationMargin, "aff below best single path");
  char buf[128];
  std::snprintf(buf, sizeof buf, "auc aff %.4f, mfcc %.4f, lfcc %.4f", auc[0], auc[1], auc[2]);
  o.note(buf);
  return o;
}

Outcome reproducibility() {
  Outcome o;
  // Both runs use the same working path, since reports record source paths.
  TempDir dir("accept_rep");
  const fs::path work = dir.path / "work";
  pipeline::RunConfig cfg;
  cfg.optimizer.epochs = kRepEpochs;
  cfg.masking.enabled = true;
  auto snapshot = [&] {
    full_run(work, split_spec(kRepPerClass, 3), cfg);
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(work / "run")) files[e.path().filename().string()] = slurp(e.path());
    fs::remove_all(work);
    return files;
  };
  const auto first = snapshot();
  const auto second = snapshot();
  o.require(first.size() >= 5 && first.count(pipeline::kCheckpointFile) == 1, "missing run outputs");
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    o.require(it != second.end() && it->second == bytes, name + " differs");
  }
  o.require(first.size() == second.size(), "different output sets");
  o.note(std::to_string(first.size()) + " run files compared");
  return o;
}

}  // namespace

int main() {
  run("dsp", dsp_numerics);
  run("geometry", feature_geometry);
  run("masking", masking_invariants);
  run("gradients", gradient_suite);
  run("blocks", block_identities);
  run("metrics", metric_properties);
  run("end_to_end", end_to_end);
  run("ablation", ablation);
  run("reproducibility", reproducibility);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
