#pragma once

// Run configuration, read from JSON. Every key is optional; unknown keys are rejected.

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "affd/blocks/model.hpp"
#include "affd/detail/binary_io.hpp"
#include "affd/dsp/cepstral.hpp"
#include "affd/features/padding.hpp"
#include "affd/nn/checkpoint.hpp"

namespace affd::pipeline {

using json = nlohmann::json;

struct FeatureConfig {
  dsp::CepstralConfig mfcc = dsp::CepstralConfig::mfcc_default();
  dsp::CepstralConfig lfcc = dsp::CepstralConfig::lfcc_default();
  std::size_t grid_rows = features::kGridRows;
  std::size_t grid_cols = features::kGridCols;
};

enum class MaskStage { raw, padded };

struct MaskingConfig {
  bool enabled = false;
  double fraction = 0.07;
  std::uint64_t seed = 0;
  MaskStage stage = MaskStage::raw;
};

struct OptimizerConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
};

enum class Pooling { segment, file };

struct EvalConfig {
  double threshold = 0.5;
  Pooling pooling = Pooling::segment;
};

struct MlpConfig {
  FeatureKind feature = FeatureKind::mfcc;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
  std::string eval_split = "test";
};

struct RunConfig {
  FeatureConfig features;
  blocks::BackboneConfig model = blocks::BackboneConfig::toy();
  MaskingConfig masking;
  OptimizerConfig optimizer;
  EvalConfig eval;
  MlpConfig mlp;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out_dir;
};

// ---- enum <-> string ------------------------------------------------------------------------

namespace detail_cfg {

template <typename E>
E parse_enum(const json& j, std::initializer_list<std::pair<const char*, E>> table, const std::string& ctx) {
  if (!j.is_string()) throw ConfigError(ctx + ": expected a string");
  const auto s = j.get<std::string>();
  for (const auto& [name, value] : table)
    if (s == name) return value;
  std::string allowed;
  for (const auto& [name, value] : table) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  throw ConfigError(ctx + ": unknown value '" + s + "' (allowed: " + allowed + ")");
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError(ctx + ": unknown key '" + key + "'");
}

template <typename V>
void read(const json& j, const char* key, V& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(ctx + "." + key + ": " + e.what());
  }
}

inline const char* window_name(dsp::WindowKind w) {
  switch (w) {
    case dsp::WindowKind::hann: return "hann";
    case dsp::WindowKind::hamming: return "hamming";
    default: return "rect";
  }
}

}  // namespace detail_cfg

inline json to_json(const dsp::CepstralConfig& c) {
  return {{"sample_rate", c.sample_rate},
          {"n_fft", c.frame.n_fft},
          {"hop", c.frame.hop},
          {"win_length", c.frame.win_length},
          {"window", detail_cfg::window_name(c.frame.window)},
          {"centered", c.frame.centered},
          {"n_filters", c.n_filters},
          {"fmin", c.fmin},
          {"fmax", c.fmax},
          {"scale", c.scale == dsp::FreqScale::mel ? "mel" : "linear"},
          {"n_coeffs", c.n_coeffs},
          {"log_floor", c.log_floor}};
}

inline void from_json_strict(const json& j, dsp::CepstralConfig& c, const std::string& ctx) {
  using namespace detail_cfg;
  check_keys(j,
             {"sample_rate", "n_fft", "hop", "win_length", "window", "centered", "n_filters", "fmin", "fmax", "scale",
              "n_coeffs", "log_floor"},
             ctx);
  read(j, "sample_rate", c.sample_rate, ctx);
  read(j, "n_fft", c.frame.n_fft, ctx);
  read(j, "hop", c.frame.hop, ctx);
  read(j, "win_length", c.frame.win_length, ctx);
  if (j.contains("window"))
    c.frame.window = parse_enum<dsp::WindowKind>(
        j["window"], {{"hann", dsp::WindowKind::hann}, {"hamming", dsp::WindowKind::hamming}, {"rect", dsp::WindowKind::rect}},
        ctx + ".window");
  read(j, "centered", c.frame.centered, ctx);
  read(j, "n_filters", c.n_filters, ctx);
  read(j, "fmin", c.fmin, ctx);
  read(j, "fmax", c.fmax, ctx);
  if (j.contains("scale"))
    c.scale = parse_enum<dsp::FreqScale>(j["scale"], {{"mel", dsp::FreqScale::mel}, {"linear", dsp::FreqScale::linear}},
                                         ctx + ".scale");
  read(j, "n_coeffs", c.n_coeffs, ctx);
  read(j, "log_floor", c.log_floor, ctx);
  c.validate();
}

inline json to_json(const FeatureConfig& f) {
  return {{"mfcc", to_json(f.mfcc)}, {"lfcc", to_json(f.lfcc)}, {"grid_rows", f.grid_rows}, {"grid_cols", f.grid_cols}};
}

inline void from_json_strict(const json& j, FeatureConfig& f, const std::string& ctx) {
  detail_cfg::check_keys(j, {"mfcc", "lfcc", "grid_rows", "grid_cols"}, ctx);
  if (j.contains("mfcc")) from_json_strict(j["mfcc"], f.mfcc, ctx + ".mfcc");
  if (j.contains("lfcc")) from_json_strict(j["lfcc"], f.lfcc, ctx + ".lfcc");
  detail_cfg::read(j, "grid_rows", f.grid_rows, ctx);
  detail_cfg::read(j, "grid_cols", f.grid_cols, ctx);
  if (f.grid_rows < 2 || f.grid_cols < 2) throw ConfigError(ctx + ": grid must be at least 2x2");
}

inline json to_json(const blocks::BackboneConfig& b) {
  return {{"variant", blocks::to_string(b.variant)},
          {"stage_blocks", b.stage_blocks},
          {"base_width", b.base_width},
          {"fusion", blocks::to_string(b.fusion)},
          {"masking", b.masking},
          {"se_reduction", b.se_reduction},
          {"mscam_reduction", b.mscam_reduction}};
}

inline void from_json_strict(const json& j, blocks::BackboneConfig& b, const std::string& ctx) {
  using namespace detail_cfg;
  check_keys(j, {"variant", "stage_blocks", "base_width", "fusion", "masking", "se_reduction", "mscam_reduction"}, ctx);
  if (j.contains("variant"))
    b.variant = parse_enum<blocks::Variant>(
        j["variant"], {{"resnet34_se", blocks::Variant::resnet34_se}, {"resnet50_se", blocks::Variant::resnet50_se}},
        ctx + ".variant");
  read(j, "stage_blocks", b.stage_blocks, ctx);
  read(j, "base_width", b.base_width, ctx);
  if (j.contains("fusion"))
    b.fusion = parse_enum<blocks::Fusion>(j["fusion"],
                                          {{"mfcc_only", blocks::Fusion::mfcc_only},
                                           {"lfcc_only", blocks::Fusion::lfcc_only},
                                           {"aff", blocks::Fusion::aff}},
                                          ctx + ".fusion");
  read(j, "masking", b.masking, ctx);
  read(j, "se_reduction", b.se_reduction, ctx);
  read(j, "mscam_reduction", b.mscam_reduction, ctx);
  b.validate();
}

inline RunConfig parse_run_config(const json& j) {
  using namespace detail_cfg;
  RunConfig c;
  check_keys(j, {"features", "model", "masking", "optimizer", "eval", "mlp", "seed", "threads", "out_dir"}, "config");
  if (j.contains("features")) from_json_strict(j["features"], c.features, "config.features");
  if (j.contains("model")) from_json_strict(j["model"], c.model, "config.model");
  if (j.contains("masking")) {
    const auto& m = j["masking"];
    check_keys(m, {"enabled", "fraction", "seed", "stage"}, "config.masking");
    read(m, "enabled", c.masking.enabled, "config.masking");
    read(m, "fraction", c.masking.fraction, "config.masking");
    read(m, "seed", c.masking.seed, "config.masking");
    if (m.contains("stage"))
      c.masking.stage = parse_enum<MaskStage>(m["stage"], {{"raw", MaskStage::raw}, {"padded", MaskStage::padded}},
                                              "config.masking.stage");
    if (!(c.masking.fraction >= 0.0 && c.masking.fraction < 1.0))
      throw ConfigError("config.masking.fraction: must lie in [0, 1)");
  }
  c.model.masking = c.masking.enabled;
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    check_keys(o, {"learning_rate", "momentum", "batch_size", "epochs"}, "config.optimizer");
    read(o, "learning_rate", c.optimizer.learning_rate, "config.optimizer");
    read(o, "momentum", c.optimizer.momentum, "config.optimizer");
    read(o, "batch_size", c.optimizer.batch_size, "config.optimizer");
    read(o, "epochs", c.optimizer.epochs, "config.optimizer");
    if (c.optimizer.batch_size == 0) throw ConfigError("config.optimizer.batch_size: must be positive");
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    check_keys(e, {"threshold", "pooling"}, "config.eval");
    read(e, "threshold", c.eval.threshold, "config.eval");
    if (e.contains("pooling"))
      c.eval.pooling =
          parse_enum<Pooling>(e["pooling"], {{"segment", Pooling::segment}, {"file", Pooling::file}}, "config.eval.pooling");
  }
  if (j.contains("mlp")) {
    const auto& m = j["mlp"];
    check_keys(m, {"feature", "learning_rate", "momentum", "batch_size", "epochs", "eval_split"}, "config.mlp");
    if (m.contains("feature"))
      c.mlp.feature =
          parse_enum<FeatureKind>(m["feature"], {{"mfcc", FeatureKind::mfcc}, {"lfcc", FeatureKind::lfcc}}, "config.mlp.feature");
    read(m, "learning_rate", c.mlp.learning_rate, "config.mlp");
    read(m, "momentum", c.mlp.momentum, "config.mlp");
    read(m, "batch_size", c.mlp.batch_size, "config.mlp");
    read(m, "epochs", c.mlp.epochs, "config.mlp");
    read(m, "eval_split", c.mlp.eval_split, "config.mlp");
    if (c.mlp.batch_size == 0) throw ConfigError("config.mlp.batch_size: must be positive");
  }
  read(j, "seed", c.seed, "config");
  read(j, "threads", c.threads, "config");
  read(j, "out_dir", c.out_dir, "config");
  return c;
}

inline json to_json(const RunConfig& c) {
  return {{"features", to_json(c.features)},
          {"model", to_json(c.model)},
          {"masking",
           {{"enabled", c.masking.enabled},
            {"fraction", c.masking.fraction},
            {"seed", c.masking.seed},
            {"stage", c.masking.stage == MaskStage::raw ? "raw" : "padded"}}},
          {"optimizer",
           {{"learning_rate", c.optimizer.learning_rate},
            {"momentum", c.optimizer.momentum},
            {"batch_size", c.optimizer.batch_size},
            {"epochs", c.optimizer.epochs}}},
          {"eval", {{"threshold", c.eval.threshold}, {"pooling", c.eval.pooling == Pooling::segment ? "segment" : "file"}}},
          {"mlp",
           {{"feature", to_string(c.mlp.feature)},
            {"learning_rate", c.mlp.learning_rate},
            {"momentum", c.mlp.momentum},
            {"batch_size", c.mlp.batch_size},
            {"epochs", c.mlp.epochs},
            {"eval_split", c.mlp.eval_split}}},
          {"seed", c.seed},
          {"threads", c.threads},
          {"out_dir", c.out_dir}};
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_run_config(j);
}

/// Digest of the feature geometry; stored in the extraction index and in checkpoints.
inline std::uint64_t feature_digest(const FeatureConfig& f) { return detail::fnv1a64(to_json(f).dump()); }

inline std::string hex_digest(std::uint64_t v) { return nn::DigestMismatchError::hex(v); }

}  // namespace affd::pipeline
