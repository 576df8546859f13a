#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace affd::nn {

/// Relative error used throughout: |a - n| / max(|a|, |n|, 1e-8).
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) against `analytic`.
/// `x` is perturbed in place and restored. `indices`, if non-empty, restricts the coordinates.
inline GradCheckResult gradient_check(const std::function<double()>& f, std::span<double> x,
                                      std::span<const double> analytic, double eps,
                                      std::span<const std::size_t> indices = {}) {
  GradCheckResult r;
  auto check = [&](std::size_t i) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double fp = f();
    x[i] = orig - eps;
    const double fm = f();
    x[i] = orig;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double err = relative_error(analytic[i], numeric);
    if (err >= r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_index = i;
      r.worst_analytic = analytic[i];
      r.worst_numeric = numeric;
    }
  };
  if (indices.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) check(i);
  } else {
    for (std::size_t i : indices) check(i);
  }
  return r;
}

}  // namespace affd::nn
