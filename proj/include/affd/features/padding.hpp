#pragma once

#include <algorithm>

#include "affd/dsp/cepstral.hpp"

namespace affd::features {

inline constexpr std::size_t kGridRows = 136;
inline constexpr std::size_t kGridCols = 44;

/// A feature matrix embedded in the fixed zero-padded grid.
struct PaddedFeature {
  FeatureMatrix values;     // target_rows x target_cols, same kind/axes as the source
  std::size_t row_offset = 0;  // where the source's first row landed
  std::size_t col_offset = 0;
  std::size_t src_rows = 0;  // extent of the embedded region
  std::size_t src_cols = 0;
};

namespace detail {
// Leading offset when centering `n` inside `target` (extra on the trailing side), or, when
// n > target, the leading crop so the centre of the source is kept.
inline std::size_t lead(std::size_t n, std::size_t target) { return n <= target ? (target - n) / 2 : (n - target) / 2; }
}  // namespace detail

/// Centres `m` inside a target_rows x target_cols zero grid. Odd padding puts the extra zero
/// on the trailing side. Oversized axes are centre-cropped.
inline PaddedFeature pad_center(const FeatureMatrix& m, std::size_t target_rows = kGridRows,
                                std::size_t target_cols = kGridCols) {
  PaddedFeature p;
  p.values = FeatureMatrix(target_rows, target_cols, m.kind, m.axis0, m.axis1);

  const bool crop_r = m.rows > target_rows;
  const bool crop_c = m.cols > target_cols;
  const std::size_t lr = detail::lead(m.rows, target_rows);
  const std::size_t lc = detail::lead(m.cols, target_cols);
  p.row_offset = crop_r ? 0 : lr;
  p.col_offset = crop_c ? 0 : lc;
  p.src_rows = std::min(m.rows, target_rows);
  p.src_cols = std::min(m.cols, target_cols);
  const std::size_t src_r0 = crop_r ? lr : 0;
  const std::size_t src_c0 = crop_c ? lc : 0;

  for (std::size_t r = 0; r < p.src_rows; ++r)
    for (std::size_t c = 0; c < p.src_cols; ++c)
      p.values.at(p.row_offset + r, p.col_offset + c) = m.at(src_r0 + r, src_c0 + c);
  return p;
}

/// The embedded window of a padded feature.
inline FeatureMatrix embedded_region(const PaddedFeature& p) {
  FeatureMatrix m(p.src_rows, p.src_cols, p.values.kind, p.values.axis0, p.values.axis1);
  for (std::size_t r = 0; r < p.src_rows; ++r)
    for (std::size_t c = 0; c < p.src_cols; ++c) m.at(r, c) = p.values.at(p.row_offset + r, p.col_offset + c);
  return m;
}

}  // namespace affd::features
