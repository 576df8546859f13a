#pragma once

// Manifest -> per-segment AFFD feature files + index.csv + features.json.

#include <filesystem>
#include <string>
#include <vector>

#include "affd/audio_io.hpp"
#include "affd/dsp/cepstral.hpp"
#include "affd/features/feature_file.hpp"
#include "affd/nn/parallel.hpp"
#include "affd/pipeline/config.hpp"
#include "affd/pipeline/manifest.hpp"
#include "affd/pipeline/report.hpp"

namespace affd::pipeline {

inline constexpr const char* kFeatureMetaFile = "features.json";

/// Which features a fusion mode consumes.
struct FeatureKinds {
  bool mfcc = true;
  bool lfcc = true;
};

inline FeatureKinds kinds_for(blocks::Fusion fusion) {
  return {fusion != blocks::Fusion::lfcc_only, fusion != blocks::Fusion::mfcc_only};
}

/// Filterbanks built once per run and shared read-only across workers.
struct FeatureExtractor {
  FeatureConfig config;
  dsp::Filterbank mfcc_bank;
  dsp::Filterbank lfcc_bank;

  explicit FeatureExtractor(const FeatureConfig& cfg)
      : config(cfg), mfcc_bank(dsp::filterbank_for(cfg.mfcc)), lfcc_bank(dsp::filterbank_for(cfg.lfcc)) {}

  FeatureMatrix mfcc(const AudioClip& seg) const { return dsp::extract_mfcc(seg, config.mfcc, mfcc_bank); }
  FeatureMatrix lfcc(const AudioClip& seg) const { return dsp::extract_lfcc(seg, config.lfcc, lfcc_bank); }
};

struct FeatureMeta {
  std::uint64_t digest = 0;
  FeatureKinds kinds;
  json features;
};

inline void write_feature_meta(const fs::path& dir, const FeatureConfig& cfg, FeatureKinds kinds) {
  json kinds_json = json::array();
  if (kinds.mfcc) kinds_json.push_back("mfcc");
  if (kinds.lfcc) kinds_json.push_back("lfcc");
  const json meta = {{"feature_digest", hex_digest(feature_digest(cfg))}, {"features", to_json(cfg)}, {"kinds", kinds_json}};
  write_text(dir / kFeatureMetaFile, meta.dump(2) + "\n");
}

inline FeatureMeta read_feature_meta(const fs::path& dir) {
  std::ifstream in(dir / kFeatureMetaFile);
  if (!in) throw IoError("missing '" + (dir / kFeatureMetaFile).string() + "' next to the index");
  FeatureMeta m;
  try {
    const json j = json::parse(in);
    m.digest = std::stoull(j.at("feature_digest").get<std::string>(), nullptr, 16);
    m.features = j.at("features");
    m.kinds = {false, false};
    for (const auto& k : j.at("kinds")) {
      if (k == "mfcc") m.kinds.mfcc = true;
      if (k == "lfcc") m.kinds.lfcc = true;
    }
  } catch (const json::exception& e) {
    throw ConfigError("'" + (dir / kFeatureMetaFile).string() + "': " + e.what());
  }
  return m;
}

struct ExtractSummary {
  std::size_t files = 0;
  std::size_t segments = 0;
  std::size_t feature_files = 0;
  std::vector<std::string> failures;  // "path: reason"
  fs::path index_path;
};

/// Extracts every manifest file. Unreadable or corrupt audio is recorded as a failed index row
/// and the run continues. Files are processed in parallel; the index keeps manifest order.
inline ExtractSummary cmd_extract(const fs::path& manifest_path, const RunConfig& cfg, const fs::path& out_dir) {
  const Manifest manifest = read_manifest(manifest_path);
  const FeatureKinds kinds = kinds_for(cfg.model.fusion);
  const FeatureExtractor extractor(cfg.features);

  std::error_code ec;
  fs::create_directories(out_dir / "features", ec);
  if (ec) throw IoError("extract: cannot create '" + (out_dir / "features").string() + "': " + ec.message());

  std::vector<std::vector<IndexRow>> per_file(manifest.entries.size());
  nn::parallel_for_n(manifest.entries.size(), std::max<std::size_t>(1, cfg.threads), [&](std::size_t i, std::size_t) {
    const ManifestEntry& e = manifest.entries[i];
    const std::string source = manifest.resolve(e.path).string();
    auto& rows = per_file[i];
    try {
      const AudioClip clip = load_wav(source);
      const auto segments = segment_one_second(clip);
      if (segments.empty())
        throw AudioTooShortError("audio is " + std::to_string(clip.samples.size()) + " samples at " +
                                 std::to_string(clip.sample_rate) + " Hz; at least 1 s is required");
      for (std::size_t s = 0; s < segments.size(); ++s) {
        IndexRow row{source, static_cast<int>(s), e.label, e.split, e.source_tag, "", "", "ok"};
        char stem[64];
        std::snprintf(stem, sizeof(stem), "features/f%05zu_s%03zu", i, s);
        if (kinds.mfcc) {
          row.mfcc_file = std::string(stem) + ".mfcc.affd";
          features::write_feature((out_dir / row.mfcc_file).string(), extractor.mfcc(segments[s]));
        }
        if (kinds.lfcc) {
          row.lfcc_file = std::string(stem) + ".lfcc.affd";
          features::write_feature((out_dir / row.lfcc_file).string(), extractor.lfcc(segments[s]));
        }
        rows.push_back(std::move(row));
      }
    } catch (const std::exception& ex) {
      rows.clear();
      std::string why = ex.what();
      for (char& ch : why)
        if (ch == ',' || ch == '\n') ch = ';';
      rows.push_back({source, -1, e.label, e.split, e.source_tag, "", "", "error: " + why});
    }
  });

  ExtractSummary summary;
  summary.files = manifest.entries.size();
  std::vector<IndexRow> all;
  for (auto& rows : per_file)
    for (auto& r : rows) {
      if (r.ok()) {
        ++summary.segments;
        summary.feature_files += (r.mfcc_file.empty() ? 0 : 1) + (r.lfcc_file.empty() ? 0 : 1);
      } else {
        summary.failures.push_back(r.source_path + ": " + r.status);
      }
      all.push_back(std::move(r));
    }
  summary.index_path = out_dir / "index.csv";
  write_index(summary.index_path, all);
  write_feature_meta(out_dir, cfg.features, kinds);
  return summary;
}

}  // namespace affd::pipeline
