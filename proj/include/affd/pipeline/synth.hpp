#pragma once

// Synthetic real/fake corpus used in place of a downloaded dataset.
//
// Both classes share a voiced-speech-like base: a harmonic stack with vibrato, two formant
// bumps, a syllabic envelope and a white noise floor. Fake clips add vocoder-style artifacts:
// a narrow high-frequency band (6-7.6 kHz) and per-frame phase discontinuities. The
// split_band recipe instead gives each fake clip exactly one artifact, either the
// high band or a low-band subharmonic buzz, so the evidence is split across the spectrum.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "affd/audio_io.hpp"
#include "affd/pipeline/manifest.hpp"

namespace affd::pipeline {

enum class SynthRecipe { standard, split_band };

struct SynthTaskSpec {
  std::size_t n_per_class = 10;
  double duration_s = 1.0;
  int sample_rate = 16000;
  std::uint64_t seed = 1;
  SynthRecipe recipe = SynthRecipe::standard;
  double train_fraction = 0.70;
  double test_fraction = 0.15;  // the remainder goes to eval
  double artifact_level = 1.0;  // scales every artifact term
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic seed derived from a base seed and a list of integers.
inline std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = splitmix64(base);
  for (auto p : parts) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

struct SynthClip {
  AudioClip clip;
  std::string source_tag;
};

namespace detail_synth {

inline double rms(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace detail_synth

/// Generates clip `index` of the given label. Depends only on (spec, label, index).
inline SynthClip synthesize_clip(const SynthTaskSpec& spec, int label, std::size_t index) {
  using std::numbers::pi;
  std::mt19937_64 rng(mix_seed(spec.seed, {static_cast<std::uint64_t>(label), index}));
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * U(rng); };

  const double sr = spec.sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * sr));

  const double f0 = uni(100.0, 240.0);
  const double vib_rate = uni(3.0, 6.0), vib_phase = uni(0.0, 2 * pi);
  const double syl_rate = uni(2.0, 5.0), syl_phase = uni(0.0, 2 * pi);
  const double f1 = uni(300.0, 900.0), f2 = uni(900.0, 2500.0);
  const double gain = uni(0.3, 0.6);
  const double max_hz = 4000.0;
  const auto n_harm = static_cast<std::size_t>(max_hz / (f0 * 1.03));

  std::vector<double> amp(n_harm), phase(n_harm);
  for (std::size_t k = 0; k < n_harm; ++k) {
    const double hz = f0 * static_cast<double>(k + 1);
    const double formant =
        1.0 + 2.0 * std::exp(-std::pow((hz - f1) / 150.0, 2)) + 1.5 * std::exp(-std::pow((hz - f2) / 250.0, 2));
    amp[k] = formant * uni(0.6, 1.0) / static_cast<double>(k + 1);
    phase[k] = uni(0.0, 2 * pi);
  }

  // Artifact choices are drawn for every clip so real and fake consume the RNG identically.
  const bool want_hf_choice = U(rng) < 0.5;
  const std::size_t frame_len = 256;
  std::vector<double> jumps(n / frame_len + 2);
  for (auto& j : jumps) j = U(rng) < 0.5 ? uni(-0.5 * pi, 0.5 * pi) : 0.0;
  constexpr std::size_t kBandTones = 12;
  std::vector<double> band_hz(kBandTones), band_phase(kBandTones);
  for (std::size_t b = 0; b < kBandTones; ++b) {
    band_hz[b] = uni(6000.0, 7600.0);
    band_phase[b] = uni(0.0, 2 * pi);
  }
  const double sub_phase = uni(0.0, 2 * pi);

  bool hf = false, phase_jumps = false, lf = false;
  std::string tag = "natural";
  if (label == 1) {
    if (spec.recipe == SynthRecipe::standard) {
      hf = phase_jumps = true;
      tag = "vocoder-hf";
    } else if (want_hf_choice) {
      hf = true;
      tag = "vocoder-hf";
    } else {
      lf = true;
      tag = "vocoder-lf";
    }
  }

  std::vector<double> voice(n, 0.0), sub(n, 0.0);
  double f0_phase = 0.0;
  double sub_acc = sub_phase;
  for (std::size_t t = 0; t < n; ++t) {
    const double time = static_cast<double>(t) / sr;
    const double inst_f0 = f0 * (1.0 + 0.03 * std::sin(2 * pi * vib_rate * time + vib_phase));
    const double dphi = 2 * pi * inst_f0 / sr;
    f0_phase += dphi;
    const double jump = (phase_jumps && t % frame_len == 0) ? jumps[t / frame_len] : 0.0;
    double v = 0.0;
    for (std::size_t k = 0; k < n_harm; ++k) {
      phase[k] += dphi * static_cast<double>(k + 1) + jump * static_cast<double>(k + 1);
      v += amp[k] * std::sin(phase[k]);
    }
    const double env = 0.55 + 0.45 * std::sin(2 * pi * syl_rate * time + syl_phase);
    voice[t] = v * env;
    sub_acc += 0.5 * dphi;
    sub[t] = env * (std::sin(sub_acc) + 0.6 * std::sin(3.0 * sub_acc));
  }
  const double peak = [&] {
    double p = 1e-12;
    for (double v : voice) p = std::max(p, std::abs(v));
    return p;
  }();
  for (auto& v : voice) v *= gain / peak;
  const double voice_rms = detail_synth::rms(voice);

  std::normal_distribution<double> noise(0.0, 0.002);
  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.resize(n);
  const double band_amp = 0.06 * spec.artifact_level * voice_rms / std::sqrt(kBandTones / 2.0);
  const double sub_amp = 0.25 * spec.artifact_level * voice_rms;
  for (std::size_t t = 0; t < n; ++t) {
    const double time = static_cast<double>(t) / sr;
    double s = voice[t] + noise(rng);
    if (hf) {
      double b = 0.0;
      for (std::size_t k = 0; k < kBandTones; ++k) b += std::sin(2 * pi * band_hz[k] * time + band_phase[k]);
      s += band_amp * b;
    }
    if (lf) s += sub_amp * sub[t];
    clip.samples[t] = std::clamp(s, -1.0, 1.0);
  }
  return {std::move(clip), tag};
}

/// Writes `wav/{real,fake}_NNNN.wav` and `manifest.csv` under `out_dir`; returns the entries.
/// Splits are assigned per class from a seeded shuffle so every split stays balanced.
inline std::vector<ManifestEntry> cmd_synthgen(const SynthTaskSpec& spec, const fs::path& out_dir) {
  if (spec.n_per_class == 0) throw ConfigError("synthgen: n_per_class must be positive");
  if (!(spec.train_fraction >= 0 && spec.test_fraction >= 0 && spec.train_fraction + spec.test_fraction <= 1.0 + 1e-12))
    throw ConfigError("synthgen: split fractions must be non-negative and sum to at most 1");
  std::error_code ec;
  fs::create_directories(out_dir / "wav", ec);
  if (ec) throw IoError("synthgen: cannot create '" + (out_dir / "wav").string() + "': " + ec.message());

  const std::size_t n = spec.n_per_class;
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  const auto n_test = std::min(n - std::min(n, n_train),
                               static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n))));

  std::vector<ManifestEntry> entries;
  for (int label : {0, 1}) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::mt19937_64 rng(mix_seed(spec.seed, {0x5117ULL, static_cast<std::uint64_t>(label)}));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Split> split_of(n, Split::eval);
    for (std::size_t r = 0; r < n; ++r)
      split_of[order[r]] = r < n_train ? Split::train : (r < n_train + n_test ? Split::test : Split::eval);

    for (std::size_t i = 0; i < n; ++i) {
      auto sc = synthesize_clip(spec, label, i);
      char name[64];
      std::snprintf(name, sizeof(name), "wav/%s_%04zu.wav", label_name(label), i);
      const fs::path path = out_dir / name;
      try {
        write_wav_pcm16(path.string(), sc.clip);
      } catch (const IoError& e) {
        throw IoError(std::string("synthgen: ") + e.what());
      }
      entries.push_back({name, label, split_of[i], sc.source_tag});
    }
  }
  write_manifest(out_dir / "manifest.csv", entries);
  return entries;
}

}  // namespace affd::pipeline
