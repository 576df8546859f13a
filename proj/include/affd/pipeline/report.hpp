#pragma once

// Report files for one evaluation run:
//   <stem>.txt      human-readable table (Acc(%), AUC, EER) plus per-source accuracy
//   <stem>.kv       key=value metrics
//   <stem>_roc.txt  two columns "fpr tpr"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "affd/metrics.hpp"
#include "affd/pipeline/manifest.hpp"

namespace affd::pipeline {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

inline std::string format_report_text(const metrics::EvalReport& r, const std::string& title, const std::string& split) {
  std::ostringstream o;
  o << "# " << title << '\n';
  o << "split: " << split << '\n';
  o << "samples: " << r.count << '\n';
  o << "threshold: " << fmt("%.4f", r.threshold) << '\n';
  o << '\n';
  o << "Acc(%)    AUC      EER\n";
  o << fmt("%-9.2f", 100.0 * r.accuracy) << ' ' << fmt("%-8.4f", r.auc) << ' ' << fmt("%.4f", r.eer) << '\n';
  o << "eer_threshold: " << fmt("%.6f", r.eer_threshold) << '\n';
  o << '\n';
  o << "per-source accuracy\n";
  o << "source_tag            count   Acc(%)\n";
  for (const auto& t : r.per_tag) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-21s %-7zu %.2f\n", t.tag.c_str(), t.count, 100.0 * t.accuracy);
    o << line;
  }
  return o.str();
}

inline std::string format_report_kv(const metrics::EvalReport& r, const std::string& split) {
  std::ostringstream o;
  o << "split=" << split << '\n';
  o << "samples=" << r.count << '\n';
  o << "threshold=" << fmt("%.6f", r.threshold) << '\n';
  o << "accuracy=" << fmt("%.6f", r.accuracy) << '\n';
  o << "auc=" << fmt("%.6f", r.auc) << '\n';
  o << "eer=" << fmt("%.6f", r.eer) << '\n';
  o << "eer_threshold=" << fmt("%.6f", r.eer_threshold) << '\n';
  for (const auto& t : r.per_tag) {
    o << "tag." << t.tag << ".count=" << t.count << '\n';
    o << "tag." << t.tag << ".accuracy=" << fmt("%.6f", t.accuracy) << '\n';
  }
  return o.str();
}

inline std::string format_roc(const metrics::RocCurve& roc) {
  std::ostringstream o;
  o << "# fpr tpr\n";
  for (const auto& p : roc.points) o << fmt("%.6f", p.fpr) << ' ' << fmt("%.6f", p.tpr) << '\n';
  return o.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

inline void write_reports(const fs::path& dir, const std::string& stem, const metrics::EvalReport& r,
                          const std::string& title, const std::string& split) {
  fs::create_directories(dir);
  write_text(dir / (stem + ".txt"), format_report_text(r, title, split));
  write_text(dir / (stem + ".kv"), format_report_kv(r, split));
  write_text(dir / (stem + "_roc.txt"), format_roc(r.roc));
}

}  // namespace affd::pipeline
