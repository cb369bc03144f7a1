// Pipeline entry point: prepare / train / analyze / cost subcommands with
// file-based interchange. Every command writes a manifest next to its outputs
// and can be replayed from one via --from-manifest.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "cotkd/commands.hpp"
#include "cotkd/error.hpp"
#include "cotkd/manifest.hpp"

namespace {

namespace cmds = cotkd::commands;

cotkd::manifest::RunManifest load_replay(const std::string& path, const std::string& command) {
  cotkd::manifest::RunManifest m = cotkd::manifest::read_manifest(path);
  if (m.command != command)
    throw cotkd::ConfigError("manifest " + path + " records a '" + m.command +
                             "' run, not '" + command + "'");
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segment-aware knowledge-distillation pipeline"};
  app.require_subcommand(1);

  // ---- prepare ---------------------------------------------------------
  cmds::PrepareOptions po;
  std::string prep_manifest;
  CLI::App* prep =
      app.add_subcommand("prepare", "Segment a dialogue corpus into train/valid splits");
  prep->add_option("--in", po.in_jsonl, "dialogue JSONL ({\"messages\":[...]} per line)");
  prep->add_option("--tokenizer", po.tokenizer_spec, "\"byte\" or a tokenizer JSON file");
  prep->add_option("--chat-template", po.chat_template, "chatml|minimal");
  prep->add_option("--max-tokens", po.max_tokens,
                   "keep examples strictly shorter than this many tokens");
  prep->add_option("--n-valid", po.n_valid, "number of validation examples");
  CLI::Option* prep_seed = prep->add_option("--seed", po.seed, "split shuffle seed (required)");
  prep->add_option("--out-dir", po.out_dir, "output directory");
  prep->add_option("--synthetic-n", po.synthetic_n,
                   "generate this many synthetic dialogues instead of reading --in");
  prep->add_option("--synthetic-seed", po.synthetic_seed, "synthetic sampling seed");
  prep->add_option("--vocab-seed", po.vocab_seed, "synthetic word-inventory seed");
  prep->add_option("--mean-prompt", po.mean_prompt, "synthetic mean prompt tokens");
  prep->add_option("--mean-cot", po.mean_cot, "synthetic mean reasoning tokens");
  prep->add_option("--mean-answer", po.mean_answer, "synthetic mean answer tokens");
  prep->add_option("--derivation-position", po.derivation_position,
                   "synthetic derivation position in (0,1)");
  prep->add_option("--n-reflections", po.n_reflections, "synthetic reflection cues per example");
  prep->add_option("--from-manifest", prep_manifest, "replay a previous prepare manifest");
  prep->callback([&]() {
    if (!prep_manifest.empty()) {
      cmds::PrepareOptions ro =
          cmds::prepare_options_from_config(load_replay(prep_manifest, "prepare").config);
      if (!po.out_dir.empty()) ro.out_dir = po.out_dir;
      cmds::cmd_prepare(ro);
      return;
    }
    if (prep_seed->count() == 0)
      throw cotkd::ConfigError("--seed is required (seeds are always explicit)");
    if (po.out_dir.empty()) throw cotkd::ConfigError("--out-dir is required");
    cmds::cmd_prepare(po);
  });

  // ---- train -----------------------------------------------------------
  cmds::TrainOptions to;
  std::string train_manifest;
  CLI::App* tr = app.add_subcommand("train", "Run the distillation training loop");
  tr->add_option("--config", to.config_file, "training config JSON");
  tr->add_option("--run-dir", to.run_dir, "output run directory");
  tr->add_option("--regime", to.regime_override,
                 "supervision regime override: a|p+a|cot|cot+a|p+cot|p+cot+a");
  tr->add_option("--truncate", to.truncate_override,
                 "truncation override: none|lsp:<p>|left|right");
  tr->add_option("--lambda", to.lambda_override, "soft/hard blend override in [0,1]");
  tr->add_option("--from-manifest", train_manifest, "replay a previous train manifest");
  tr->callback([&]() {
    if (to.run_dir.empty()) throw cotkd::ConfigError("--run-dir is required");
    if (!train_manifest.empty()) {
      cmds::cmd_train_resolved(load_replay(train_manifest, "train").config, to.run_dir);
      return;
    }
    if (to.config_file.empty()) throw cotkd::ConfigError("--config is required");
    cmds::cmd_train(to);
  });

  // ---- analyze -----------------------------------------------------------
  cmds::AnalyzeOptions ao;
  std::string an_manifest;
  CLI::App* an = app.add_subcommand("analyze", "Post-run analyses and plot-ready exports");
  an->add_option("--mode", ao.mode, "knee|retention|curves|audit|positions");
  an->add_option("--in", ao.in_path, "input file (mode-specific)");
  an->add_option("--out", ao.out_path, "output file");
  an->add_option("--threshold", ao.threshold, "knee sensitivity threshold");
  an->add_option("--smooth-window", ao.smooth_window, "rolling-mean window (1 = none)");
  an->add_option("--run", ao.run_dirs, "run directory (repeat for several)");
  an->add_option("--reference", ao.reference_dir, "reference run for relative curves");
  CLI::Option* num = an->add_option("--numerator", ao.numerator, "retention numerator");
  CLI::Option* den = an->add_option("--denominator", ao.denominator, "retention denominator");
  an->add_option("--judge", ao.judge_spec, "stub:<verdicts.json> or http");
  an->add_option("--tokenizer", ao.tokenizer_spec, "\"byte\" or a tokenizer JSON file");
  an->add_option("--derivations", ao.derivations_path,
                 "JSONL of {\"substring\":...} aligned with --in");
  an->add_option("--from-manifest", an_manifest, "replay a previous analyze manifest");
  an->callback([&]() {
    if (!an_manifest.empty()) {
      cmds::AnalyzeOptions ro =
          cmds::analyze_options_from_config(load_replay(an_manifest, "analyze").config);
      if (!ao.out_path.empty()) ro.out_path = ao.out_path;
      cmds::cmd_analyze(ro);
      return;
    }
    if (ao.mode.empty()) throw cotkd::ConfigError("--mode is required");
    ao.has_ratio_inputs = num->count() > 0 && den->count() > 0;
    cmds::cmd_analyze(ao);
  });

  // ---- cost ------------------------------------------------------------
  cmds::CostOptions co;
  std::string cost_manifest;
  CLI::App* cost_cmd =
      app.add_subcommand("cost", "Analytic FLOPs/memory curves and GPU-hour accounting");
  cost_cmd->add_flag("--grid", co.grid, "GPU-hours accounting mode");
  cost_cmd->add_option("--params", co.n_params, "trainable parameter count");
  cost_cmd->add_option("--layers", co.n_layers, "transformer layers");
  cost_cmd->add_option("--d-model", co.d_model, "model width");
  cost_cmd->add_option("--heads", co.n_heads, "attention heads");
  cost_cmd->add_option("--seq-len", co.seq_len, "full (untruncated) sequence length");
  cost_cmd->add_option("--batch", co.batch, "batch size");
  cost_cmd->add_option("--runs", co.runs, "grid: number of runs");
  cost_cmd->add_option("--train-hours", co.train_hours, "grid: training hours per run");
  cost_cmd->add_option("--train-gpus", co.train_gpus, "grid: GPUs during training");
  cost_cmd->add_option("--eval-hours", co.eval_hours, "grid: hours per benchmark evaluation");
  cost_cmd->add_option("--eval-gpus", co.eval_gpus, "grid: GPUs during evaluation");
  cost_cmd->add_option("--benchmarks", co.n_benchmarks, "grid: benchmarks per run");
  cost_cmd->add_option("--out", co.out_path, "output CSV (curves) or JSON (grid)");
  cost_cmd->add_option("--from-manifest", cost_manifest, "replay a previous cost manifest");
  cost_cmd->callback([&]() {
    if (!cost_manifest.empty()) {
      cmds::CostOptions ro =
          cmds::cost_options_from_config(load_replay(cost_manifest, "cost").config);
      if (!co.out_path.empty()) ro.out_path = co.out_path;
      cmds::cmd_cost(ro);
      return;
    }
    cmds::cmd_cost(co);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const cotkd::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
