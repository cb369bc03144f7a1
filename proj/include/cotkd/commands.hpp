#ifndef COTKD_COMMANDS_HPP
#define COTKD_COMMANDS_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cotkd/error.hpp"

namespace cotkd::commands {

// Each command takes a plain options struct, does its work, and writes a
// manifest holding the fully resolved option snapshot next to its outputs.
// Passing that manifest back through `*_options_from_config` (the
// `--from-manifest` path) re-runs the command with identical parameters, so
// outputs can be reproduced without the original command line.

struct PrepareOptions {
  std::string in_jsonl;                  // dialogue JSONL; unused in synthetic mode
  std::string tokenizer_spec = "byte";   // "byte" or a tokenizer JSON path
  std::string chat_template = "chatml";  // "chatml" | "minimal"
  std::size_t max_tokens = 0;            // strict upper bound; must be > 0
  std::size_t n_valid = 0;
  std::uint64_t seed = 0;  // split shuffle seed (mandatory on the CLI)
  std::string out_dir;

  // Synthetic-corpus mode: generates dialogues instead of reading in_jsonl.
  std::size_t synthetic_n = 0;
  std::uint64_t synthetic_seed = 1;
  std::uint64_t vocab_seed = 1;
  std::size_t mean_prompt = 80;
  std::size_t mean_cot = 240;
  std::size_t mean_answer = 40;
  double derivation_position = 0.5;
  std::size_t n_reflections = 2;
};

nlohmann::json prepare_config_json(const PrepareOptions& o);
PrepareOptions prepare_options_from_config(const nlohmann::json& j);

// linearize -> normalize -> segment -> filter -> split -> stats.
// Writes train.jsonl, valid.jsonl, stats.json, rejects.jsonl, manifest.json
// into out_dir. Examples failing linearization or tag validation land in the
// rejects file with their error text; an empty accepted set is an error.
void cmd_prepare(const PrepareOptions& o);

struct TrainOptions {
  std::string config_file;  // JSON: corpora, model, teacher, train sections
  std::string run_dir;
  // command-line overrides; empty / negative = keep the config file's value
  std::string regime_override;
  std::string truncate_override;
  double lambda_override = -1.0;
};

// Runs the full loop from a resolved config snapshot (the manifest/replay
// entry point). Writes report.json, steps.csv, validation.csv, timing.json,
// checkpoints, and manifest.json into run_dir.
void cmd_train_resolved(const nlohmann::json& resolved, const std::string& run_dir);

// Loads the config file, applies overrides, and delegates to the resolved
// form above.
void cmd_train(const TrainOptions& o);

struct AnalyzeOptions {
  std::string mode;  // knee | retention | curves | audit | positions
  std::string in_path;
  std::string out_path;
  // knee / curves
  double threshold = 0.0;
  std::size_t smooth_window = 1;
  std::vector<std::string> run_dirs;
  std::string reference_dir;
  // retention
  double numerator = 0.0;
  double denominator = 0.0;
  bool has_ratio_inputs = false;
  // audit / positions
  std::string judge_spec;  // "stub:<file>" | "http"
  std::string tokenizer_spec = "byte";
  std::string derivations_path;
};

nlohmann::json analyze_config_json(const AnalyzeOptions& o);
AnalyzeOptions analyze_options_from_config(const nlohmann::json& j);

void cmd_analyze(const AnalyzeOptions& o);

struct CostOptions {
  bool grid = false;
  // curve mode: model shape + sequence grid
  double n_params = 0.0;
  double n_layers = 0.0;
  double d_model = 0.0;
  double n_heads = 0.0;
  double seq_len = 0.0;
  double batch = 1.0;
  // grid mode: GPU-hours accounting
  double runs = 0.0;
  double train_hours = 0.0;
  double train_gpus = 0.0;
  double eval_hours = 0.0;
  double eval_gpus = 0.0;
  double n_benchmarks = 0.0;
  std::string out_path;
};

nlohmann::json cost_config_json(const CostOptions& o);
CostOptions cost_options_from_config(const nlohmann::json& j);

void cmd_cost(const CostOptions& o);

}  // namespace cotkd::commands

#endif  // COTKD_COMMANDS_HPP
