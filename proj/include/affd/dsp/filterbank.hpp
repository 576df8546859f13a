#pragma once

#include <cmath>
#include <vector>

#include "affd/error.hpp"

namespace affd::dsp {

enum class FreqScale { mel, linear };

/// HTK mel: 2595 * log10(1 + f / 700).
inline double hz_to_scale(double hz, FreqScale scale) {
  if (hz < 0.0 || std::isnan(hz)) throw DomainError("hz_to_scale: negative frequency");
  if (scale == FreqScale::linear) return hz;
  return 2595.0 * std::log10(1.0 + hz / 700.0);
}

inline double scale_to_hz(double value, FreqScale scale) {
  if (value < 0.0 || std::isnan(value)) throw DomainError("scale_to_hz: negative scale value");
  if (scale == FreqScale::linear) return value;
  return 700.0 * (std::pow(10.0, value / 2595.0) - 1.0);
}

/// Triangular filters over the one-sided power spectrum, unit peak, no area normalization.
struct Filterbank {
  std::size_t n_filters = 0;
  std::size_t n_bins = 0;  // n_fft / 2 + 1
  FreqScale scale = FreqScale::mel;
  double fmin = 0.0;
  double fmax = 0.0;
  std::vector<double> breakpoints_hz;  // n_filters + 2
  std::vector<double> weights;         // n_filters x n_bins, row-major

  double weight(std::size_t filter, std::size_t bin) const { return weights[filter * n_bins + bin]; }

  /// Filter energies for one power spectrum.
  std::vector<double> apply(std::span<const double> power) const {
    if (power.size() != n_bins) throw DimensionError("filterbank: spectrum has wrong bin count");
    std::vector<double> e(n_filters, 0.0);
    for (std::size_t f = 0; f < n_filters; ++f) {
      const double* w = weights.data() + f * n_bins;
      double acc = 0.0;
      for (std::size_t b = 0; b < n_bins; ++b) acc += w[b] * power[b];
      e[f] = acc;
    }
    return e;
  }
};

inline Filterbank build_filterbank(std::size_t n_filters, std::size_t n_fft, int sample_rate, double fmin, double fmax,
                                   FreqScale scale) {
  if (n_filters < 1) throw ConfigError("filterbank: need at least one filter");
  if (sample_rate <= 0) throw ConfigError("filterbank: sample rate must be positive");
  const double nyquist = sample_rate / 2.0;
  if (fmax > nyquist)
    throw ConfigError("filterbank: fmax " + std::to_string(fmax) + " Hz exceeds Nyquist " + std::to_string(nyquist));
  if (!(fmin >= 0.0 && fmin < fmax)) throw ConfigError("filterbank: need 0 <= fmin < fmax");

  Filterbank fb;
  fb.n_filters = n_filters;
  fb.n_bins = n_fft / 2 + 1;
  fb.scale = scale;
  fb.fmin = fmin;
  fb.fmax = fmax;

  const double lo = hz_to_scale(fmin, scale);
  const double hi = hz_to_scale(fmax, scale);
  fb.breakpoints_hz.resize(n_filters + 2);
  for (std::size_t i = 0; i < n_filters + 2; ++i) {
    const double s = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_filters + 1);
    fb.breakpoints_hz[i] = scale_to_hz(s, scale);
  }
  fb.breakpoints_hz.front() = fmin;
  fb.breakpoints_hz.back() = fmax;

  fb.weights.assign(n_filters * fb.n_bins, 0.0);
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(n_fft);
  for (std::size_t f = 0; f < n_filters; ++f) {
    const double left = fb.breakpoints_hz[f];
    const double center = fb.breakpoints_hz[f + 1];
    const double right = fb.breakpoints_hz[f + 2];
    for (std::size_t b = 0; b < fb.n_bins; ++b) {
      const double hz = static_cast<double>(b) * bin_hz;
      const double rise = (hz - left) / (center - left);
      const double fall = (right - hz) / (right - center);
      fb.weights[f * fb.n_bins + b] = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

}  // namespace affd::dsp
