#pragma once

// Detection metrics with fake = positive class.
//
// FPR: fraction of real clips scored at or above the threshold (real accepted as fake).
// FNR = 1 - TPR: fraction of fake clips scored below it (fake accepted as real).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "affd/error.hpp"

namespace affd::metrics {

enum Label : int { real = 0, fake = 1 };

struct ScoredSample {
  double score = 0.0;  // probability that the clip is fake
  int label = real;
  std::string source_tag;
};

/// One operating point. Counts are kept so that derived rates are computed identically
/// whichever way the curve is traversed.
struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // classify fake when score >= threshold; +inf for the origin
  std::int64_t fp = 0;     // real at or above threshold
  std::int64_t tp = 0;     // fake at or above threshold
};

struct RocCurve {
  std::vector<RocPoint> points;
  std::int64_t positives = 0;  // fake
  std::int64_t negatives = 0;  // real
};

inline RocCurve roc_curve(const std::vector<ScoredSample>& samples) {
  RocCurve roc;
  for (const auto& s : samples) {
    if (!std::isfinite(s.score)) throw DomainError("roc_curve: non-finite score");
    if (s.label != real && s.label != fake) throw DomainError("roc_curve: label must be 0 (real) or 1 (fake)");
    (s.label == fake ? roc.positives : roc.negatives) += 1;
  }
  if (roc.positives == 0 || roc.negatives == 0)
    throw DegenerateInputError("roc_curve: need at least one real and one fake sample (got " +
                               std::to_string(roc.negatives) + " real, " + std::to_string(roc.positives) + " fake)");

  std::vector<std::pair<double, int>> sorted;
  sorted.reserve(samples.size());
  for (const auto& s : samples) sorted.emplace_back(s.score, s.label);
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  const double P = static_cast<double>(roc.positives), N = static_cast<double>(roc.negatives);
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity(), 0, 0});
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double thr = sorted[i].first;
    // A tie group moves as one step.
    for (; i < sorted.size() && sorted[i].first == thr; ++i) (sorted[i].second == fake ? tp : fp) += 1;
    roc.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P, thr, fp, tp});
  }
  return roc;
}

/// Trapezoidal area, accumulated exactly in integer counts.
inline double auc(const RocCurve& roc) {
  std::int64_t twice_area = 0;  // sum of (fp_{i+1} - fp_i) * (tp_i + tp_{i+1})
  for (std::size_t i = 1; i < roc.points.size(); ++i)
    twice_area += (roc.points[i].fp - roc.points[i - 1].fp) * (roc.points[i].tp + roc.points[i - 1].tp);
  return static_cast<double>(twice_area) / (2.0 * static_cast<double>(roc.positives) * static_cast<double>(roc.negatives));
}

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Equal error rate by linear interpolation of the FPR - FNR sign change along the curve.
inline EerResult eer(const RocCurve& roc) {
  const double P = static_cast<double>(roc.positives), N = static_cast<double>(roc.negatives);
  auto fpr = [&](const RocPoint& p) { return static_cast<double>(p.fp) / N; };
  auto fnr = [&](const RocPoint& p) { return static_cast<double>(roc.positives - p.tp) / P; };
  // FPR - FNR is strictly increasing along the curve, from -1 to +1.
  for (std::size_t i = 0; i < roc.points.size(); ++i) {
    const RocPoint& b = roc.points[i];
    const double db = fpr(b) - fnr(b);
    if (db == 0.0) return {fpr(b), std::isfinite(b.threshold) ? b.threshold : roc.points[1].threshold};
    if (db > 0.0 && i > 0) {
      const RocPoint& a = roc.points[i - 1];
      const double da = fpr(a) - fnr(a);
      const double denom = db - da;
      // Two algebraically equal forms averaged so the result is unchanged when the roles of
      // the classes are swapped.
      const double via_fpr = (fpr(a) * db - fpr(b) * da) / denom;
      const double via_fnr = (fnr(a) * db - fnr(b) * da) / denom;
      const double t = -da / denom;
      const double thr_a = std::isfinite(a.threshold) ? a.threshold : b.threshold;
      return {0.5 * (via_fpr + via_fnr), thr_a + t * (b.threshold - thr_a)};
    }
  }
  return {0.5, roc.points.back().threshold};  // unreachable for a valid curve
}

inline double accuracy(const std::vector<ScoredSample>& samples, double threshold = 0.5) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : samples) hits += ((s.score >= threshold) == (s.label == fake)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

struct TagAccuracy {
  std::string tag;
  std::size_t count = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;
  double auc = 0.0;
  double eer = 0.0;
  double eer_threshold = 0.0;
  double threshold = 0.5;
  std::size_t count = 0;
  RocCurve roc;
  std::vector<TagAccuracy> per_tag;  // sorted by tag
};

inline EvalReport evaluate(const std::vector<ScoredSample>& samples, double threshold = 0.5) {
  EvalReport r;
  r.roc = roc_curve(samples);
  r.auc = auc(r.roc);
  const auto e = eer(r.roc);
  r.eer = e.eer;
  r.eer_threshold = e.threshold;
  r.threshold = threshold;
  r.count = samples.size();
  r.accuracy = accuracy(samples, threshold);

  std::map<std::string, std::vector<ScoredSample>> groups;
  for (const auto& s : samples) groups[s.source_tag].push_back(s);
  for (const auto& [tag, group] : groups) r.per_tag.push_back({tag, group.size(), accuracy(group, threshold)});
  return r;
}

}  // namespace affd::metrics
