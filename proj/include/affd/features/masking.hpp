#pragma once

// Time / frequency band masking with per-line mean replacement.

#include <cmath>
#include <cstdint>
#include <random>

#include "affd/dsp/cepstral.hpp"
#include "affd/features/padding.hpp"

namespace affd::features {

enum class MaskAxis { time, frequency };

struct MaskSpec {
  MaskAxis axis = MaskAxis::time;
  double fraction = 0.07;
  std::uint64_t rng_seed = 0;
};

/// Which lines a mask touched; `width == 0` means nothing changed.
struct MaskBand {
  bool along_rows = true;  // masked lines are rows (true) or columns (false)
  std::size_t start = 0;
  std::size_t width = 0;
};

inline std::size_t band_width(double fraction, std::size_t axis_length) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("mask fraction must lie in [0, 1)");
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(axis_length)));
}

/// Masks `width` contiguous lines at a uniformly drawn start. Each masked line is replaced by
/// its own pre-mask mean. Constant lines are left untouched, which keeps them bitwise fixed.
inline MaskBand mask_lines(FeatureMatrix& m, bool along_rows, double fraction, std::uint64_t seed) {
  const std::size_t n_lines = along_rows ? m.rows : m.cols;
  const std::size_t line_len = along_rows ? m.cols : m.rows;
  MaskBand band;
  band.along_rows = along_rows;
  band.width = band_width(fraction, n_lines);
  if (band.width == 0 || line_len == 0) {
    band.width = 0;
    return band;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n_lines - band.width);
  band.start = pick(rng);

  auto elem = [&](std::size_t line, std::size_t i) -> double& { return along_rows ? m.at(line, i) : m.at(i, line); };
  for (std::size_t line = band.start; line < band.start + band.width; ++line) {
    const double first = elem(line, 0);
    bool constant = true;
    double sum = 0.0;
    for (std::size_t i = 0; i < line_len; ++i) {
      sum += elem(line, i);
      constant = constant && elem(line, i) == first;
    }
    if (constant) continue;
    const double mean = sum / static_cast<double>(line_len);
    for (std::size_t i = 0; i < line_len; ++i) elem(line, i) = mean;
  }
  return band;
}

/// Masks a raw feature using its axis tags: the time axis for time masks, the coefficient axis
/// for frequency masks.
inline MaskBand apply_mask(FeatureMatrix& m, const MaskSpec& spec) {
  const Axis wanted = spec.axis == MaskAxis::time ? Axis::time : Axis::coefficient;
  // Masked lines run perpendicular to the masked axis: masking along axis0 selects rows.
  const bool along_rows = m.axis0 == wanted;
  return mask_lines(m, along_rows, spec.fraction, spec.rng_seed);
}

/// Masks a padded grid literally: frequency masks select rows, time masks select columns.
inline PaddedFeature apply_mask(const PaddedFeature& p, const MaskSpec& spec, MaskBand* band_out = nullptr) {
  PaddedFeature out = p;
  const auto band = mask_lines(out.values, spec.axis == MaskAxis::frequency, spec.fraction, spec.rng_seed);
  if (band_out) *band_out = band;
  return out;
}

}  // namespace affd::features
