#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "affd/error.hpp"

namespace affd::dsp {

inline bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 decimation-in-time FFT (forward, unscaled).
inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  if (!is_power_of_two(n)) throw ConfigError("fft: size " + std::to_string(n) + " is not a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // Twiddles computed directly per index rather than by repeated multiplication,
    // which keeps the error at O(eps log n).
    std::vector<std::complex<double>> tw(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      tw[k] = {std::cos(ang), std::sin(ang)};
    }
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const auto u = a[start + k];
        const auto v = a[start + k + half] * tw[k];
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

/// Spectrum of a real signal zero-padded to n.
inline std::vector<std::complex<double>> fft(std::span<const double> signal, std::size_t n) {
  if (!is_power_of_two(n)) throw ConfigError("fft: size " + std::to_string(n) + " is not a power of two");
  if (signal.size() > n) throw ConfigError("fft: signal longer than transform size");
  std::vector<std::complex<double>> a(n);
  for (std::size_t i = 0; i < signal.size(); ++i) a[i] = signal[i];
  fft_inplace(a);
  return a;
}

/// |X[k]|^2 for k = 0..n/2.
inline std::vector<double> power_spectrum(std::span<const double> frame, std::size_t n_fft) {
  if (frame.size() != n_fft) throw DimensionError("power_spectrum: frame length differs from n_fft");
  const auto spec = fft(frame, n_fft);
  std::vector<double> p(n_fft / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::norm(spec[k]);
  return p;
}

}  // namespace affd::dsp
