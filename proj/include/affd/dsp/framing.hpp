#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "affd/audio_io.hpp"
#include "affd/dsp/fft.hpp"
#include "affd/error.hpp"

namespace affd::dsp {

enum class WindowKind { hann, hamming, rect };

struct FrameConfig {
  std::size_t n_fft = 2048;
  std::size_t hop = 512;
  std::size_t win_length = 2048;
  WindowKind window = WindowKind::hann;
  bool centered = true;  // reflect-pad by n_fft / 2 on both sides

  void validate() const {
    if (!is_power_of_two(n_fft)) throw ConfigError("frame config: n_fft must be a power of two");
    if (hop == 0 || hop > n_fft) throw ConfigError("frame config: hop must be in (0, n_fft]");
    if (win_length == 0 || win_length > n_fft) throw ConfigError("frame config: win_length must be in (0, n_fft]");
  }
};

/// Symmetric window of the given length (both ends of hann are exactly zero).
inline std::vector<double> make_window(WindowKind kind, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (kind == WindowKind::rect || length < 2) return w;
  const double denom = static_cast<double>(length - 1);
  for (std::size_t i = 0; i < length; ++i) {
    const double c = std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
    w[i] = kind == WindowKind::hann ? 0.5 - 0.5 * c : 0.54 - 0.46 * c;
  }
  return w;
}

/// Row-major frames, n_frames x n_fft.
struct Frames {
  std::size_t n_frames = 0;
  std::size_t n_fft = 0;
  std::vector<double> data;

  std::span<const double> frame(std::size_t t) const { return {data.data() + t * n_fft, n_fft}; }
};

namespace detail_framing {
// Index into a signal reflected about its end points (no edge repetition), periodic
// in 2(n-1) so arbitrarily long pads stay in range.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}
}  // namespace detail_framing

/// Slices a clip into windowed, zero-padded frames.
///
/// Centered mode yields 1 + floor(len / hop) frames, frame t centered on sample t*hop.
/// Non-centered mode yields 1 + floor((len - win_length) / hop) frames starting at t*hop.
/// The window is placed in the middle of the n_fft buffer in centered mode and at the
/// start in non-centered mode.
inline Frames frame_signal(const AudioClip& clip, const FrameConfig& cfg) {
  cfg.validate();
  const std::size_t len = clip.samples.size();
  if (len == 0) throw DimensionError("frame_signal: empty clip");
  if (!cfg.centered && len < cfg.win_length)
    throw DimensionError("frame_signal: clip of " + std::to_string(len) + " samples is shorter than window of " +
                         std::to_string(cfg.win_length) + " (no frames)");

  const auto window = make_window(cfg.window, cfg.win_length);
  Frames out;
  out.n_fft = cfg.n_fft;
  out.n_frames = cfg.centered ? 1 + len / cfg.hop : 1 + (len - cfg.win_length) / cfg.hop;
  out.data.assign(out.n_frames * cfg.n_fft, 0.0);

  const auto pad = static_cast<std::ptrdiff_t>(cfg.n_fft / 2);
  const std::size_t win_offset = cfg.centered ? (cfg.n_fft - cfg.win_length) / 2 : 0;
  for (std::size_t t = 0; t < out.n_frames; ++t) {
    double* dst = out.data.data() + t * cfg.n_fft + win_offset;
    if (cfg.centered) {
      const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(t * cfg.hop) - pad + static_cast<std::ptrdiff_t>(win_offset);
      for (std::size_t i = 0; i < cfg.win_length; ++i) {
        const auto idx = detail_framing::reflect_index(start + static_cast<std::ptrdiff_t>(i), len);
        dst[i] = clip.samples[idx] * window[i];
      }
    } else {
      const double* src = clip.samples.data() + t * cfg.hop;
      for (std::size_t i = 0; i < cfg.win_length; ++i) dst[i] = src[i] * window[i];
    }
  }
  return out;
}

}  // namespace affd::dsp
