#pragma once

// MFCC / LFCC extraction: frames -> power spectrum -> filterbank -> log -> DCT-II.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "affd/audio_io.hpp"
#include "affd/dsp/fft.hpp"
#include "affd/dsp/filterbank.hpp"
#include "affd/dsp/framing.hpp"
#include "affd/error.hpp"

namespace affd {

enum class FeatureKind : std::uint8_t { mfcc = 0, lfcc = 1 };
enum class Axis : std::uint8_t { coefficient, time };

inline const char* to_string(FeatureKind k) { return k == FeatureKind::mfcc ? "mfcc" : "lfcc"; }

/// Dense row-major real matrix tagged with feature kind and axis meaning.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  FeatureKind kind = FeatureKind::mfcc;
  Axis axis0 = Axis::coefficient;
  Axis axis1 = Axis::time;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c, FeatureKind k, Axis a0, Axis a1)
      : rows(r), cols(c), values(r * c, 0.0), kind(k), axis0(a0), axis1(a1) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

/// Default axis layout for each kind: MFCC is coefficient x time, LFCC time x coefficient.
inline std::pair<Axis, Axis> default_axes(FeatureKind kind) {
  return kind == FeatureKind::mfcc ? std::pair{Axis::coefficient, Axis::time} : std::pair{Axis::time, Axis::coefficient};
}

namespace dsp {

/// Orthonormal DCT-II, keeping the first n_out coefficients.
inline std::vector<double> dct2(std::span<const double> v, std::size_t n_out) {
  const std::size_t n = v.size();
  if (n_out > n) throw ConfigError("dct2: n_out exceeds input length");
  std::vector<double> c(n_out, 0.0);
  if (n == 0) return c;
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double sk = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n_out; ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      acc += v[j] * std::cos(std::numbers::pi * static_cast<double>(k) * (2.0 * static_cast<double>(j) + 1.0) /
                             (2.0 * static_cast<double>(n)));
    c[k] = (k == 0 ? s0 : sk) * acc;
  }
  return c;
}

struct CepstralConfig {
  int sample_rate = 22050;  // clips are resampled to this rate first
  FrameConfig frame;
  std::size_t n_filters = 128;
  double fmin = 0.0;
  double fmax = 11025.0;
  FreqScale scale = FreqScale::mel;
  std::size_t n_coeffs = 20;
  double log_floor = 1e-10;

  /// 22.05 kHz, 2048-point FFT, hop 512, centered hann, 128 mel filters, 20 coefficients.
  static CepstralConfig mfcc_default() {
    CepstralConfig c;
    c.sample_rate = 22050;
    c.frame = {2048, 512, 2048, WindowKind::hann, true};
    c.n_filters = 128;
    c.fmin = 0.0;
    c.fmax = 11025.0;
    c.scale = FreqScale::mel;
    c.n_coeffs = 20;
    return c;
  }

  /// 16 kHz, 512-point FFT, 25 ms hamming window, 10 ms hop, 24 linear filters, 13 coefficients.
  static CepstralConfig lfcc_default() {
    CepstralConfig c;
    c.sample_rate = 16000;
    c.frame = {512, 160, 400, WindowKind::hamming, false};
    c.n_filters = 24;
    c.fmin = 0.0;
    c.fmax = 8000.0;
    c.scale = FreqScale::linear;
    c.n_coeffs = 13;
    return c;
  }

  void validate() const {
    frame.validate();
    if (n_coeffs == 0 || n_coeffs > n_filters) throw ConfigError("cepstral config: need 0 < n_coeffs <= n_filters");
    if (!(log_floor > 0.0)) throw ConfigError("cepstral config: log floor must be positive");
  }
};

/// Cepstra as n_frames x n_coeffs (time-major), before any axis reordering.
inline std::vector<double> cepstra_time_major(const AudioClip& clip, const CepstralConfig& cfg, const Filterbank& fb,
                                              std::size_t& n_frames) {
  const AudioClip rs = resample(clip, cfg.sample_rate);
  const Frames frames = frame_signal(rs, cfg.frame);
  n_frames = frames.n_frames;
  std::vector<double> out(n_frames * cfg.n_coeffs);
  std::vector<double> log_e(cfg.n_filters);
  for (std::size_t t = 0; t < n_frames; ++t) {
    const auto power = power_spectrum(frames.frame(t), cfg.frame.n_fft);
    const auto energies = fb.apply(power);
    for (std::size_t f = 0; f < cfg.n_filters; ++f) log_e[f] = std::log(std::max(energies[f], cfg.log_floor));
    const auto c = dct2(log_e, cfg.n_coeffs);
    std::copy(c.begin(), c.end(), out.begin() + static_cast<std::ptrdiff_t>(t * cfg.n_coeffs));
  }
  return out;
}

inline Filterbank filterbank_for(const CepstralConfig& cfg) {
  return build_filterbank(cfg.n_filters, cfg.frame.n_fft, cfg.sample_rate, cfg.fmin, cfg.fmax, cfg.scale);
}

/// Coefficient-major MFCC matrix (20 x 44 under the default config).
inline FeatureMatrix extract_mfcc(const AudioClip& clip, const CepstralConfig& cfg, const Filterbank& fb) {
  cfg.validate();
  std::size_t n_frames = 0;
  const auto tm = cepstra_time_major(clip, cfg, fb, n_frames);
  FeatureMatrix m(cfg.n_coeffs, n_frames, FeatureKind::mfcc, Axis::coefficient, Axis::time);
  for (std::size_t t = 0; t < n_frames; ++t)
    for (std::size_t k = 0; k < cfg.n_coeffs; ++k) m.at(k, t) = tm[t * cfg.n_coeffs + k];
  return m;
}

inline FeatureMatrix extract_mfcc(const AudioClip& clip, const CepstralConfig& cfg = CepstralConfig::mfcc_default()) {
  cfg.validate();
  return extract_mfcc(clip, cfg, filterbank_for(cfg));
}

/// Time-major LFCC matrix (n_frames x 13 under the default config).
inline FeatureMatrix extract_lfcc(const AudioClip& clip, const CepstralConfig& cfg, const Filterbank& fb) {
  cfg.validate();
  std::size_t n_frames = 0;
  auto tm = cepstra_time_major(clip, cfg, fb, n_frames);
  FeatureMatrix m(n_frames, cfg.n_coeffs, FeatureKind::lfcc, Axis::time, Axis::coefficient);
  m.values = std::move(tm);
  return m;
}

inline FeatureMatrix extract_lfcc(const AudioClip& clip, const CepstralConfig& cfg = CepstralConfig::lfcc_default()) {
  cfg.validate();
  return extract_lfcc(clip, cfg, filterbank_for(cfg));
}

}  // namespace dsp
}  // namespace affd
