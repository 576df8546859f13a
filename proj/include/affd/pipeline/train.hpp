#pragma once

// Training, evaluation and single-file inference for the fused SE-ResNet detector.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "affd/blocks/model.hpp"
#include "affd/features/masking.hpp"
#include "affd/features/padding.hpp"
#include "affd/metrics.hpp"
#include "affd/nn/checkpoint.hpp"
#include "affd/nn/loss.hpp"
#include "affd/nn/optim.hpp"
#include "affd/nn/parallel.hpp"
#include "affd/pipeline/config.hpp"
#include "affd/pipeline/extract.hpp"
#include "affd/pipeline/manifest.hpp"
#include "affd/pipeline/report.hpp"
#include "affd/pipeline/synth.hpp"

namespace affd::pipeline {

// ---- per-coefficient normalization ------------------------------------------------------------

struct CoeffStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool empty() const { return mean.empty(); }
};

inline bool coefficients_on_rows(const FeatureMatrix& m) { return m.axis0 == Axis::coefficient; }
inline std::size_t coefficient_count(const FeatureMatrix& m) { return coefficients_on_rows(m) ? m.rows : m.cols; }

inline CoeffStats coefficient_stats(const std::vector<const FeatureMatrix*>& mats) {
  CoeffStats s;
  if (mats.empty()) return s;
  const std::size_t K = coefficient_count(*mats.front());
  std::vector<double> sum(K, 0.0), count(K, 0.0);
  auto visit = [&](auto&& fn) {
    for (const FeatureMatrix* m : mats) {
      if (coefficient_count(*m) != K) throw DimensionError("normalization: inconsistent coefficient counts");
      const bool on_rows = coefficients_on_rows(*m);
      for (std::size_t r = 0; r < m->rows; ++r)
        for (std::size_t c = 0; c < m->cols; ++c) fn(on_rows ? r : c, m->at(r, c));
    }
  };
  visit([&](std::size_t k, double v) {
    sum[k] += v;
    count[k] += 1.0;
  });
  s.mean.resize(K);
  for (std::size_t k = 0; k < K; ++k) s.mean[k] = sum[k] / count[k];
  std::vector<double> ss(K, 0.0);
  visit([&](std::size_t k, double v) { ss[k] += (v - s.mean[k]) * (v - s.mean[k]); });
  s.stddev.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double sd = std::sqrt(ss[k] / count[k]);
    s.stddev[k] = sd > 1e-8 ? sd : 1.0;
  }
  return s;
}

inline void normalize_in_place(FeatureMatrix& m, const CoeffStats& s) {
  if (s.empty()) return;
  if (coefficient_count(m) != s.mean.size())
    throw DimensionError("normalization: feature has " + std::to_string(coefficient_count(m)) +
                         " coefficients, statistics have " + std::to_string(s.mean.size()));
  const bool on_rows = coefficients_on_rows(m);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) {
      const std::size_t k = on_rows ? r : c;
      m.at(r, c) = (m.at(r, c) - s.mean[k]) / s.stddev[k];
    }
}

inline json to_json(const CoeffStats& s) { return {{"mean", s.mean}, {"std", s.stddev}}; }

inline CoeffStats coeff_stats_from_json(const json& j) {
  CoeffStats s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("std").get<std::vector<double>>();
  if (s.mean.size() != s.stddev.size()) throw ConfigError("normalization: mean/std length mismatch");
  return s;
}

// ---- data -------------------------------------------------------------------------------------

struct Segment {
  FeatureMatrix mfcc;
  FeatureMatrix lfcc;
  int label = 0;
  std::string source_path;
  int segment = 0;
  std::string source_tag;
};

inline std::string extract_hint(const fs::path& index_path) {
  return "run `affd extract --manifest <manifest.csv> --config <config> --out " + index_path.parent_path().string() +
         "` with a matching fusion mode";
}

/// Loads every ok row of `split`. Fails with an actionable message when the needed features are absent.
inline std::vector<Segment> load_split(const fs::path& index_path, Split split, FeatureKinds need) {
  if (!is_index_file(index_path))
    throw ConfigError("'" + index_path.string() + "' is not a feature index (expected header '" + kIndexHeader +
                      "'); " + extract_hint(index_path) + " and pass its index.csv");
  const Index idx = read_index(index_path);
  std::vector<Segment> out;
  for (const auto& row : idx.rows) {
    if (!row.ok() || row.split != split) continue;
    Segment s;
    s.label = row.label;
    s.source_path = row.source_path;
    s.segment = row.segment;
    s.source_tag = row.source_tag;
    auto load = [&](const std::string& file, const char* what) {
      if (file.empty())
        throw ConfigError(std::string("index '") + index_path.string() + "' has no " + what + " features for '" +
                          row.source_path + "'; " + extract_hint(index_path));
      const fs::path p = idx.resolve(file);
      if (!fs::exists(p)) throw IoError("missing feature file '" + p.string() + "'; " + extract_hint(index_path));
      return features::read_feature(p.string());
    };
    if (need.mfcc) s.mfcc = load(row.mfcc_file, "MFCC");
    if (need.lfcc) s.lfcc = load(row.lfcc_file, "LFCC");
    out.push_back(std::move(s));
  }
  return out;
}

/// Per-sample mask seeds for one epoch; distinct for every (epoch, sample, feature kind, axis).
inline std::uint64_t mask_seed(const MaskingConfig& m, std::uint64_t run_seed, std::size_t epoch, std::size_t sample,
                               FeatureKind kind, features::MaskAxis axis) {
  return mix_seed(run_seed ^ m.seed, {0x3A5CULL, epoch, sample, static_cast<std::uint64_t>(kind),
                                      static_cast<std::uint64_t>(axis)});
}

/// raw -> (mask) -> normalize -> pad -> (mask, when configured on the padded grid)
inline features::PaddedFeature prepare_input(FeatureMatrix m, const CoeffStats& stats, const FeatureConfig& fc,
                                             const MaskingConfig* mask = nullptr, std::uint64_t seed_freq = 0,
                                             std::uint64_t seed_time = 0) {
  const bool masking = mask && mask->enabled;
  if (masking && mask->stage == MaskStage::raw) {
    features::apply_mask(m, {features::MaskAxis::frequency, mask->fraction, seed_freq});
    features::apply_mask(m, {features::MaskAxis::time, mask->fraction, seed_time});
  }
  normalize_in_place(m, stats);
  features::PaddedFeature p = features::pad_center(m, fc.grid_rows, fc.grid_cols);
  if (masking && mask->stage == MaskStage::padded) {
    p = features::apply_mask(p, {features::MaskAxis::frequency, mask->fraction, seed_freq});
    p = features::apply_mask(p, {features::MaskAxis::time, mask->fraction, seed_time});
  }
  return p;
}

inline void copy_into(nn::Tensor<float>& batch, std::size_t slot, const features::PaddedFeature& p) {
  float* dst = batch.sample(slot);
  for (std::size_t i = 0; i < p.values.values.size(); ++i) dst[i] = static_cast<float>(p.values.values[i]);
}

struct Normalization {
  CoeffStats mfcc;
  CoeffStats lfcc;
};

struct BatchInputs {
  nn::Tensor<float> mfcc;
  nn::Tensor<float> lfcc;
  std::vector<int> labels;
};

/// Builds the input tensors for samples[ids]. `epoch` < 0 disables masking (evaluation).
inline BatchInputs make_batch(const std::vector<Segment>& samples, const std::vector<std::size_t>& ids,
                              FeatureKinds kinds, const Normalization& norm, const FeatureConfig& fc,
                              const MaskingConfig& mask, std::uint64_t run_seed, long epoch) {
  BatchInputs b;
  const std::size_t B = ids.size();
  if (kinds.mfcc) b.mfcc = nn::Tensor<float>(B, 1, fc.grid_rows, fc.grid_cols);
  if (kinds.lfcc) b.lfcc = nn::Tensor<float>(B, 1, fc.grid_rows, fc.grid_cols);
  const MaskingConfig* m = epoch >= 0 ? &mask : nullptr;
  const auto e = static_cast<std::size_t>(std::max(0L, epoch));
  using features::MaskAxis;
  for (std::size_t i = 0; i < B; ++i) {
    const Segment& s = samples[ids[i]];
    const std::size_t id = ids[i];
    if (kinds.mfcc)
      copy_into(b.mfcc, i,
                prepare_input(s.mfcc, norm.mfcc, fc, m, mask_seed(mask, run_seed, e, id, FeatureKind::mfcc, MaskAxis::frequency),
                              mask_seed(mask, run_seed, e, id, FeatureKind::mfcc, MaskAxis::time)));
    if (kinds.lfcc)
      copy_into(b.lfcc, i,
                prepare_input(s.lfcc, norm.lfcc, fc, m, mask_seed(mask, run_seed, e, id, FeatureKind::lfcc, MaskAxis::frequency),
                              mask_seed(mask, run_seed, e, id, FeatureKind::lfcc, MaskAxis::time)));
    b.labels.push_back(s.label);
  }
  return b;
}

inline double fake_probability(const float* logits) {
  return 1.0 / (1.0 + std::exp(static_cast<double>(logits[0]) - static_cast<double>(logits[1])));
}

// ---- checkpoint ------------------------------------------------------------------------------

inline constexpr const char* kCheckpointFile = "model.affc";

inline std::string checkpoint_config_text(const RunConfig& cfg, const Normalization& norm) {
  json n = json::object();
  if (!norm.mfcc.empty()) n["mfcc"] = to_json(norm.mfcc);
  if (!norm.lfcc.empty()) n["lfcc"] = to_json(norm.lfcc);
  const json j = {{"model", to_json(cfg.model)},
                  {"features", to_json(cfg.features)},
                  {"feature_digest", hex_digest(feature_digest(cfg.features))},
                  {"normalization", n}};
  return j.dump();
}

struct LoadedModel {
  std::unique_ptr<blocks::Model<float>> model;
  blocks::BackboneConfig backbone;
  FeatureConfig features;
  std::uint64_t feature_digest = 0;
  Normalization norm;
  std::uint64_t config_digest = 0;
};

inline LoadedModel load_checkpoint(const fs::path& path) {
  const auto bytes = detail::read_file(path.string());
  nn::CheckpointHeader h;
  json j;
  try {
    h = nn::read_checkpoint_header(bytes);
    j = json::parse(h.config);
  } catch (const DecodeError& e) {
    throw DecodeError("'" + path.string() + "': " + e.what());
  } catch (const json::exception& e) {
    throw DecodeError("'" + path.string() + "': embedded config is not valid JSON: " + e.what());
  }
  LoadedModel lm;
  try {
    from_json_strict(j.at("model"), lm.backbone, "checkpoint.model");
    from_json_strict(j.at("features"), lm.features, "checkpoint.features");
    lm.feature_digest = std::stoull(j.at("feature_digest").get<std::string>(), nullptr, 16);
    const json& n = j.at("normalization");
    if (n.contains("mfcc")) lm.norm.mfcc = coeff_stats_from_json(n["mfcc"]);
    if (n.contains("lfcc")) lm.norm.lfcc = coeff_stats_from_json(n["lfcc"]);
  } catch (const json::exception& e) {
    throw DecodeError("'" + path.string() + "': embedded config: " + e.what());
  }
  if (lm.feature_digest != feature_digest(lm.features))
    throw nn::DigestMismatchError(feature_digest(lm.features), lm.feature_digest);
  lm.config_digest = h.digest;
  lm.model = std::make_unique<blocks::Model<float>>(lm.backbone, 0);
  try {
    nn::decode_checkpoint_into<float>(bytes, lm.model->state(), h.digest);
  } catch (const DecodeError& e) {
    throw DecodeError("'" + path.string() + "': " + e.what());
  }
  return lm;
}

// ---- train ------------------------------------------------------------------------------------

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainSummary {
  std::vector<EpochLog> epochs;
  fs::path checkpoint;
  fs::path log;
  std::size_t samples = 0;
  std::size_t parameters = 0;
};

inline std::string format_train_log(const std::vector<EpochLog>& logs, std::size_t threads) {
  std::ostringstream o;
  if (threads > 1) o << "# threads=" << threads << ": parameters are reproducible only at this thread count\n";
  o << "epoch,loss,accuracy\n";
  for (const auto& l : logs) o << l.epoch << ',' << fmt("%.6f", l.loss) << ',' << fmt("%.6f", l.accuracy) << '\n';
  return o.str();
}

/// Trains on split=train of the extracted index; writes model.affc and train_log.csv under out_dir.
inline TrainSummary cmd_train(const fs::path& index_path, const RunConfig& cfg, const fs::path& out_dir) {
  cfg.model.validate();
  const FeatureKinds kinds = kinds_for(cfg.model.fusion);
  auto train = load_split(index_path, Split::train, kinds);
  if (train.empty()) throw DegenerateInputError("train: index '" + index_path.string() + "' has no ok rows in split train");
  const FeatureMeta meta = read_feature_meta(index_path.parent_path());
  if (meta.digest != feature_digest(cfg.features))
    throw nn::DigestMismatchError(feature_digest(cfg.features), meta.digest);

  Normalization norm;
  std::vector<const FeatureMatrix*> ms, ls;
  for (const auto& s : train) {
    if (kinds.mfcc) ms.push_back(&s.mfcc);
    if (kinds.lfcc) ls.push_back(&s.lfcc);
  }
  norm.mfcc = coefficient_stats(ms);
  norm.lfcc = coefficient_stats(ls);

  nn::set_num_threads(std::max<std::size_t>(1, cfg.threads));
  blocks::Model<float> model(cfg.model, mix_seed(cfg.seed, {0x30DE1ULL}));
  const auto refs = model.state();
  nn::Sgd<float> opt(cfg.optimizer.learning_rate, cfg.optimizer.momentum);

  TrainSummary summary;
  summary.samples = train.size();
  summary.parameters = refs.parameter_count();
  std::vector<std::size_t> order(train.size());
  const std::size_t B = cfg.optimizer.batch_size;
  for (std::size_t epoch = 0; epoch < cfg.optimizer.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(cfg.seed, {0xE90CULL, epoch}));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += B) {
      const std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + B)));
      BatchInputs in = make_batch(train, ids, kinds, norm, cfg.features, cfg.masking, cfg.seed, static_cast<long>(epoch));
      const auto logits =
          model.forward(kinds.mfcc ? &in.mfcc : nullptr, kinds.lfcc ? &in.lfcc : nullptr, nn::Mode::train);
      const auto lr = nn::softmax_cross_entropy(logits, in.labels);
      if (!std::isfinite(lr.loss)) throw DomainError("train: loss became non-finite at epoch " + std::to_string(epoch + 1));
      nn::zero_grad(refs);
      model.backward(lr.grad);
      opt.step(refs);
      loss_sum += lr.loss * static_cast<double>(ids.size());
      correct += lr.correct;
    }
    const double n = static_cast<double>(train.size());
    summary.epochs.push_back({epoch + 1, loss_sum / n, static_cast<double>(correct) / n});
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("train: cannot create '" + out_dir.string() + "': " + ec.message());
  summary.checkpoint = out_dir / kCheckpointFile;
  summary.log = out_dir / "train_log.csv";
  detail::write_file(summary.checkpoint.string(), nn::encode_checkpoint(refs, checkpoint_config_text(cfg, norm)));
  write_text(summary.log, format_train_log(summary.epochs, cfg.threads));
  return summary;
}

// ---- eval -------------------------------------------------------------------------------------

inline constexpr std::size_t kEvalBatch = 32;

/// Fake-class probabilities for every segment, in input order, from an eval-mode forward pass.
inline std::vector<double> score_segments(LoadedModel& lm, const std::vector<Segment>& segs) {
  const FeatureKinds kinds = kinds_for(lm.backbone.fusion);
  std::vector<double> scores;
  scores.reserve(segs.size());
  const MaskingConfig no_mask;
  for (std::size_t start = 0; start < segs.size(); start += kEvalBatch) {
    std::vector<std::size_t> ids;
    for (std::size_t i = start; i < std::min(segs.size(), start + kEvalBatch); ++i) ids.push_back(i);
    const BatchInputs in = make_batch(segs, ids, kinds, lm.norm, lm.features, no_mask, 0, -1);
    const auto logits =
        lm.model->forward(kinds.mfcc ? &in.mfcc : nullptr, kinds.lfcc ? &in.lfcc : nullptr, nn::Mode::eval);
    for (std::size_t i = 0; i < ids.size(); ++i) scores.push_back(fake_probability(logits.sample(i)));
  }
  return scores;
}

/// Mean segment score per source file; keeps first-seen order.
inline std::vector<metrics::ScoredSample> pool_by_file(const std::vector<Segment>& segs, const std::vector<double>& scores) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<double, std::size_t>> acc;
  std::map<std::string, metrics::ScoredSample> meta;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    auto [it, fresh] = acc.try_emplace(segs[i].source_path, 0.0, 0);
    if (fresh) {
      order.push_back(segs[i].source_path);
      meta[segs[i].source_path] = {0.0, segs[i].label, segs[i].source_tag};
    }
    it->second.first += scores[i];
    it->second.second += 1;
  }
  std::vector<metrics::ScoredSample> out;
  for (const auto& p : order) {
    auto s = meta[p];
    s.score = acc[p].first / static_cast<double>(acc[p].second);
    out.push_back(s);
  }
  return out;
}

struct EvalOutcome {
  metrics::EvalReport report;
  std::vector<metrics::ScoredSample> scored;
  fs::path report_path;
};

inline std::string format_scores(const std::vector<Segment>& segs, const std::vector<double>& scores) {
  std::ostringstream o;
  o << "source_path,segment,label,source_tag,score\n";
  for (std::size_t i = 0; i < segs.size(); ++i)
    o << segs[i].source_path << ',' << segs[i].segment << ',' << label_name(segs[i].label) << ','
      << segs[i].source_tag << ',' << fmt("%.6f", scores[i]) << '\n';
  return o.str();
}

/// Scores `split` of the index with a checkpoint; writes report_<split>.{txt,kv}, report_<split>_roc.txt
/// and scores_<split>.csv under out_dir.
inline EvalOutcome cmd_eval(const fs::path& checkpoint, const fs::path& index_path, Split split, const fs::path& out_dir,
                            const EvalConfig& ecfg = {}, std::size_t threads = 1) {
  LoadedModel lm = load_checkpoint(checkpoint);
  if (!is_index_file(index_path))
    throw ConfigError("'" + index_path.string() + "' is not a feature index; " + extract_hint(index_path));
  const FeatureMeta meta = read_feature_meta(index_path.parent_path());
  if (meta.digest != lm.feature_digest) throw nn::DigestMismatchError(meta.digest, lm.feature_digest);
  const auto segs = load_split(index_path, split, kinds_for(lm.backbone.fusion));
  if (segs.empty())
    throw DegenerateInputError(std::string("eval: split '") + to_string(split) + "' of '" + index_path.string() +
                               "' is empty");

  nn::set_num_threads(std::max<std::size_t>(1, threads));
  const auto scores = score_segments(lm, segs);
  EvalOutcome out;
  if (ecfg.pooling == Pooling::file) {
    out.scored = pool_by_file(segs, scores);
  } else {
    for (std::size_t i = 0; i < segs.size(); ++i) out.scored.push_back({scores[i], segs[i].label, segs[i].source_tag});
  }
  out.report = metrics::evaluate(out.scored, ecfg.threshold);
  const std::string stem = std::string("report_") + to_string(split);
  const std::string title = std::string("detector ") + blocks::to_string(lm.backbone.variant) + " / " +
                            blocks::to_string(lm.backbone.fusion) +
                            (ecfg.pooling == Pooling::file ? " (file-pooled)" : " (per segment)");
  write_reports(out_dir, stem, out.report, title, to_string(split));
  write_text(out_dir / (std::string("scores_") + to_string(split) + ".csv"), format_scores(segs, scores));
  out.report_path = out_dir / (stem + ".txt");
  return out;
}

// ---- infer ------------------------------------------------------------------------------------

struct InferResult {
  std::vector<double> segment_scores;
  double file_score = 0.0;
};

inline InferResult cmd_infer(const fs::path& checkpoint, const fs::path& wav_path) {
  LoadedModel lm = load_checkpoint(checkpoint);
  const AudioClip clip = load_wav(wav_path.string());
  const auto segments = segment_one_second(clip);
  if (segments.empty())
    throw AudioTooShortError("infer: '" + wav_path.string() + "' lasts " +
                             fmt("%.3f", static_cast<double>(clip.samples.size()) / clip.sample_rate) +
                             " s; at least 1 s of audio is required");
  const FeatureKinds kinds = kinds_for(lm.backbone.fusion);
  const FeatureExtractor fx(lm.features);
  std::vector<Segment> segs(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (kinds.mfcc) segs[i].mfcc = fx.mfcc(segments[i]);
    if (kinds.lfcc) segs[i].lfcc = fx.lfcc(segments[i]);
    segs[i].segment = static_cast<int>(i);
  }
  InferResult r;
  r.segment_scores = score_segments(lm, segs);
  r.file_score = std::accumulate(r.segment_scores.begin(), r.segment_scores.end(), 0.0) /
                 static_cast<double>(r.segment_scores.size());
  return r;
}

}  // namespace affd::pipeline
