// affd: command-line front end for the detection pipeline.
//
//   affd synthgen     --out DIR [--n-per-class N] [--seed S] [--recipe standard|split_band]
//   affd extract      --manifest FILE --out DIR [--config FILE] [--threads N]
//   affd train        --manifest INDEX --out DIR [--config FILE] [--seed S] [--threads N]
//   affd eval         --checkpoint FILE --manifest INDEX --split NAME --out DIR [--config FILE]
//   affd infer        --checkpoint FILE WAV
//   affd baseline-mlp --manifest INDEX --out DIR [--config FILE] [--split NAME] [--seed S]

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "affd/affd.hpp"

namespace {

using namespace affd;
using namespace affd::pipeline;

struct CommonOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

RunConfig resolve_config(const CommonOpts& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  return cfg;
}

std::string out_dir_or(const std::string& flag, const RunConfig& cfg, const char* cmd) {
  if (!flag.empty()) return flag;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  throw ConfigError(std::string(cmd) + ": no output directory (pass --out or set out_dir in the config)");
}

void print_report(const metrics::EvalReport& r) {
  std::printf("Acc(%%)    AUC      EER\n%-9.2f %-8.4f %.4f\n", 100.0 * r.accuracy, r.auc, r.eer);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio deepfake detection toolkit"};
  app.require_subcommand(1);

  // synthgen
  SynthTaskSpec synth;
  std::string synth_out, recipe = "standard";
  auto* cmd_synth = app.add_subcommand("synthgen", "Generate a synthetic real/fake corpus and its manifest");
  cmd_synth->add_option("--out", synth_out, "Output directory")->required();
  cmd_synth->add_option("--n-per-class", synth.n_per_class, "Clips per class");
  cmd_synth->add_option("--seed", synth.seed, "Generator seed");
  cmd_synth->add_option("--recipe", recipe, "standard or split_band")->check(CLI::IsMember({"standard", "split_band"}));
  cmd_synth->add_option("--duration", synth.duration_s, "Clip duration in seconds");
  cmd_synth->add_option("--train-fraction", synth.train_fraction, "Fraction of each class in split train");
  cmd_synth->add_option("--test-fraction", synth.test_fraction, "Fraction of each class in split test");
  cmd_synth->add_option("--artifact-level", synth.artifact_level, "Scale of the fake-class artifacts");

  // extract
  CommonOpts ext_opts;
  std::string ext_manifest, ext_out;
  auto* cmd_ext = app.add_subcommand("extract", "Extract per-segment MFCC/LFCC feature files and an index");
  cmd_ext->add_option("--manifest", ext_manifest, "Manifest CSV")->required();
  cmd_ext->add_option("--out", ext_out, "Output directory");
  cmd_ext->add_option("--config", ext_opts.config, "Run config JSON");
  cmd_ext->add_option("--threads", ext_opts.threads, "Worker threads");

  // train
  CommonOpts tr_opts;
  std::string tr_index, tr_out;
  auto* cmd_tr = app.add_subcommand("train", "Train the detector on split train");
  cmd_tr->add_option("--manifest,--index", tr_index, "index.csv written by extract")->required();
  cmd_tr->add_option("--out", tr_out, "Output directory");
  cmd_tr->add_option("--config", tr_opts.config, "Run config JSON");
  cmd_tr->add_option("--seed", tr_opts.seed, "Run seed");
  cmd_tr->add_option("--threads", tr_opts.threads, "Threads (results reproducible per thread count)");

  // eval
  CommonOpts ev_opts;
  std::string ev_ckpt, ev_index, ev_out, ev_split = "test";
  auto* cmd_ev = app.add_subcommand("eval", "Score a split and write metric reports");
  cmd_ev->add_option("--checkpoint", ev_ckpt, "Checkpoint (.affc)")->required();
  cmd_ev->add_option("--manifest,--index", ev_index, "index.csv written by extract")->required();
  cmd_ev->add_option("--split", ev_split, "train, test or eval");
  cmd_ev->add_option("--out", ev_out, "Report directory");
  cmd_ev->add_option("--config", ev_opts.config, "Run config JSON (eval section)");
  cmd_ev->add_option("--threads", ev_opts.threads, "Threads");

  // infer
  std::string inf_ckpt, inf_wav;
  auto* cmd_inf = app.add_subcommand("infer", "Score one WAV file per 1-second segment");
  cmd_inf->add_option("--checkpoint", inf_ckpt, "Checkpoint (.affc)")->required();
  cmd_inf->add_option("wav,--wav", inf_wav, "WAV file")->required();

  // baseline-mlp
  CommonOpts mlp_opts;
  std::string mlp_index, mlp_out, mlp_split;
  auto* cmd_mlp = app.add_subcommand("baseline-mlp", "Train and evaluate the 5-2 hidden-unit MLP baseline");
  cmd_mlp->add_option("--manifest,--index", mlp_index, "index.csv written by extract")->required();
  cmd_mlp->add_option("--out", mlp_out, "Report directory");
  cmd_mlp->add_option("--config", mlp_opts.config, "Run config JSON (mlp section)");
  cmd_mlp->add_option("--split", mlp_split, "Evaluation split");
  cmd_mlp->add_option("--seed", mlp_opts.seed, "Run seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_synth) {
      synth.recipe = recipe == "split_band" ? SynthRecipe::split_band : SynthRecipe::standard;
      const auto entries = cmd_synthgen(synth, synth_out);
      std::printf("wrote %zu clips and %s\n", entries.size(), (fs::path(synth_out) / "manifest.csv").string().c_str());
    } else if (*cmd_ext) {
      const RunConfig cfg = resolve_config(ext_opts);
      const auto s = cmd_extract(ext_manifest, cfg, out_dir_or(ext_out, cfg, "extract"));
      std::printf("files: %zu  segments: %zu  feature files: %zu  failures: %zu\nindex: %s\n", s.files, s.segments,
                  s.feature_files, s.failures.size(), s.index_path.string().c_str());
      for (const auto& f : s.failures) std::fprintf(stderr, "failed: %s\n", f.c_str());
    } else if (*cmd_tr) {
      const RunConfig cfg = resolve_config(tr_opts);
      const auto s = cmd_train(tr_index, cfg, out_dir_or(tr_out, cfg, "train"));
      if (cfg.threads > 1)
        std::printf("note: %zu threads; results are reproducible only for the same thread count\n", cfg.threads);
      for (const auto& e : s.epochs) std::printf("epoch %3zu  loss %.6f  acc %.4f\n", e.epoch, e.loss, e.accuracy);
      std::printf("samples: %zu  parameters: %zu\ncheckpoint: %s\n", s.samples, s.parameters,
                  s.checkpoint.string().c_str());
    } else if (*cmd_ev) {
      const RunConfig cfg = resolve_config(ev_opts);
      const auto o = cmd_eval(ev_ckpt, ev_index, parse_split(ev_split), out_dir_or(ev_out, cfg, "eval"), cfg.eval,
                              cfg.threads);
      print_report(o.report);
      std::printf("report: %s\n", o.report_path.string().c_str());
    } else if (*cmd_inf) {
      const auto r = cmd_infer(inf_ckpt, inf_wav);
      for (std::size_t i = 0; i < r.segment_scores.size(); ++i) std::printf("segment %zu %.6f\n", i, r.segment_scores[i]);
      std::printf("file %.6f\n", r.file_score);
    } else if (*cmd_mlp) {
      RunConfig cfg = resolve_config(mlp_opts);
      if (!mlp_split.empty()) cfg.mlp.eval_split = mlp_split;
      const auto o = cmd_baseline_mlp(mlp_index, cfg, out_dir_or(mlp_out, cfg, "baseline-mlp"));
      std::printf("input dim: %zu\n", o.input_dim);
      print_report(o.report);
    }
  } catch (const nn::DigestMismatchError& e) {
    std::fprintf(stderr, "affd: error: %s\n  expected digest: %s\n  found digest:    %s\n", e.what(),
                 nn::DigestMismatchError::hex(e.expected()).c_str(), nn::DigestMismatchError::hex(e.found()).c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "affd: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
