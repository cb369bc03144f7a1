#include "cotkd/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <utility>

#include "cotkd/analysis.hpp"
#include "cotkd/corpus.hpp"
#include "cotkd/cost.hpp"
#include "cotkd/manifest.hpp"
#include "cotkd/microlm.hpp"
#include "cotkd/supervision.hpp"
#include "cotkd/tokenizer.hpp"
#include "cotkd/trainer.hpp"

namespace cotkd::commands {

using nlohmann::json;

namespace {

// Runs `writer(tmp_path)` and moves the result into place, so other processes
// never observe a half-written artifact.
template <typename Writer>
void write_atomic_via(const std::string& path, Writer&& writer) {
  const std::string tmp = path + ".tmp";
  writer(tmp);
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot move " + tmp + " into place");
  }
}

Tokenizer load_tokenizer(const std::string& spec) {
  if (spec == "byte") return Tokenizer::byte_level();
  return Tokenizer::from_json_file(spec);
}

corpus::ChatTemplate template_from_name(const std::string& name) {
  if (name == "chatml") return corpus::ChatTemplate{};
  if (name == "minimal") return corpus::ChatTemplate::minimal();
  throw ConfigError("unknown chat template '" + name + "' (expected chatml|minimal)");
}

void write_manifest_for(const std::string& path, const std::string& command, json config,
                        json inputs, json outputs) {
  manifest::RunManifest m;
  m.command = command;
  m.config = std::move(config);
  m.inputs = std::move(inputs);
  m.outputs = std::move(outputs);
  manifest::write_manifest(path, std::move(m));
}

// Minimal CSV reader for the numeric artifacts this tool itself emits:
// a header line, then comma-separated rows.
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

Csv read_csv(const std::string& path) {
  std::istringstream in(manifest::read_file(path));
  Csv csv;
  std::string line;
  bool first = true;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = s.find(',', start);
      if (comma == std::string::npos) {
        out.push_back(s.substr(start));
        return out;
      }
      out.push_back(s.substr(start, comma - start));
      start = comma + 1;
    }
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      csv.header = split(line);
      first = false;
    } else {
      csv.rows.push_back(split(line));
    }
  }
  if (first) throw ConfigError("empty CSV: " + path);
  return csv;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse " + what + " value '" + s + "' as a number");
  }
}

}  // namespace

// ---- prepare -----------------------------------------------------------------

json prepare_config_json(const PrepareOptions& o) {
  return json{{"in_jsonl", o.in_jsonl},
              {"tokenizer", o.tokenizer_spec},
              {"chat_template", o.chat_template},
              {"max_tokens", o.max_tokens},
              {"n_valid", o.n_valid},
              {"seed", o.seed},
              {"out_dir", o.out_dir},
              {"synthetic",
               {{"n", o.synthetic_n},
                {"seed", o.synthetic_seed},
                {"vocab_seed", o.vocab_seed},
                {"mean_prompt", o.mean_prompt},
                {"mean_cot", o.mean_cot},
                {"mean_answer", o.mean_answer},
                {"derivation_position", o.derivation_position},
                {"n_reflections", o.n_reflections}}}};
}

PrepareOptions prepare_options_from_config(const json& j) {
  PrepareOptions o;
  o.in_jsonl = j.value("in_jsonl", std::string());
  o.tokenizer_spec = j.value("tokenizer", std::string("byte"));
  o.chat_template = j.value("chat_template", std::string("chatml"));
  o.max_tokens = j.at("max_tokens").get<std::size_t>();
  o.n_valid = j.at("n_valid").get<std::size_t>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.out_dir = j.value("out_dir", std::string());
  if (j.contains("synthetic")) {
    const json& s = j.at("synthetic");
    o.synthetic_n = s.value("n", std::size_t{0});
    o.synthetic_seed = s.value("seed", std::uint64_t{1});
    o.vocab_seed = s.value("vocab_seed", std::uint64_t{1});
    o.mean_prompt = s.value("mean_prompt", std::size_t{80});
    o.mean_cot = s.value("mean_cot", std::size_t{240});
    o.mean_answer = s.value("mean_answer", std::size_t{40});
    o.derivation_position = s.value("derivation_position", 0.5);
    o.n_reflections = s.value("n_reflections", std::size_t{2});
  }
  return o;
}

void cmd_prepare(const PrepareOptions& o) {
  if (o.out_dir.empty()) throw ConfigError("prepare needs an output directory");
  if (o.max_tokens == 0) throw ConfigError("prepare needs --max-tokens > 0");
  if (o.in_jsonl.empty() && o.synthetic_n == 0)
    throw ConfigError("prepare needs an input corpus or a synthetic example count");

  const Tokenizer tokenizer = load_tokenizer(o.tokenizer_spec);
  const corpus::ChatTemplate tmpl = template_from_name(o.chat_template);

  std::vector<corpus::RawRecord> records;
  if (o.synthetic_n > 0) {
    corpus::SyntheticCorpusConfig cfg;
    cfg.n_examples = o.synthetic_n;
    cfg.seed = o.synthetic_seed;
    cfg.vocab_seed = o.vocab_seed;
    cfg.mean_prompt_tokens = o.mean_prompt;
    cfg.mean_cot_tokens = o.mean_cot;
    cfg.mean_answer_tokens = o.mean_answer;
    cfg.derivation_position = o.derivation_position;
    cfg.n_reflections = o.n_reflections;
    cfg.chat_template = tmpl;
    records = corpus::generate_synthetic_corpus_detailed(cfg).raw;
  } else {
    records = corpus::read_raw_jsonl(o.in_jsonl);
  }

  std::vector<corpus::SegmentedExample> accepted;
  std::string rejects;
  std::size_t n_rejected = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      const std::string text = corpus::normalize_tags(corpus::linearize(records[i], tmpl));
      accepted.push_back(corpus::segment(text, tokenizer));
    } catch (const Error& e) {
      rejects += json{{"index", i}, {"error", e.what()}}.dump() + "\n";
      ++n_rejected;
    }
  }

  const std::vector<corpus::SegmentedExample> kept =
      corpus::filter_by_length(accepted, o.max_tokens);
  if (kept.empty())
    throw EmptyCorpus("no examples survived validation and the length filter");
  auto [train, valid] = corpus::split_train_valid(kept, o.n_valid, o.seed);
  const corpus::SectionStats stats = corpus::section_stats(kept);

  std::filesystem::create_directories(o.out_dir);
  const std::string train_path = o.out_dir + "/train.jsonl";
  const std::string valid_path = o.out_dir + "/valid.jsonl";
  const std::string stats_path = o.out_dir + "/stats.json";
  const std::string rejects_path = o.out_dir + "/rejects.jsonl";
  write_atomic_via(train_path,
                   [&](const std::string& p) { corpus::write_segmented_jsonl(p, train); });
  write_atomic_via(valid_path,
                   [&](const std::string& p) { corpus::write_segmented_jsonl(p, valid); });
  manifest::write_file_atomic(stats_path, corpus::stats_to_json(stats) + "\n");
  manifest::write_file_atomic(rejects_path, rejects);

  json outputs{{"train", train_path},
               {"valid", valid_path},
               {"stats", stats_path},
               {"rejects", rejects_path},
               {"accepted", kept.size()},
               {"rejected", n_rejected},
               {"filtered_out", accepted.size() - kept.size()}};
  json inputs = json::object();
  if (!o.in_jsonl.empty() && o.synthetic_n == 0) inputs["corpus"] = o.in_jsonl;
  if (o.tokenizer_spec != "byte") inputs["tokenizer"] = o.tokenizer_spec;
  write_manifest_for(o.out_dir + "/manifest.json", "prepare", prepare_config_json(o),
                     std::move(inputs), std::move(outputs));
}

// ---- train ---------------------------------------------------------------

namespace {

trainer::TrainConfig train_config_from_json(const json& j, const std::string& run_dir) {
  if (!j.contains("seed"))
    throw ConfigError("train config needs an explicit 'seed' (no implicit seeding)");
  trainer::TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.grad_accum_steps = j.value("grad_accum_steps", c.grad_accum_steps);
  c.micro_batch = j.value("micro_batch", c.micro_batch);
  c.lambda = j.value("lambda", c.lambda);
  c.regime = supervision::regime_from_string(j.value("regime", std::string("p+cot+a")));
  c.truncation =
      supervision::TruncationPolicy::from_string(j.value("truncation", std::string("none")));
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate_every_steps = j.value("validate_every_steps", c.validate_every_steps);
  c.run_dir = run_dir;
  c.validate();
  return c;
}

std::unique_ptr<trainer::TeacherProvider> teacher_from_json(const json& j, double lambda) {
  const std::string kind = j.value("kind", std::string("none"));
  if (kind == "none") {
    if (lambda > 0.0)
      throw ConfigError("lambda > 0 needs a teacher (checkpoint or logits_dir)");
    return std::make_unique<trainer::NullTeacher>();
  }
  if (!j.contains("path")) throw ConfigError("teacher '" + kind + "' needs a 'path'");
  const std::string path = j.at("path").get<std::string>();
  if (kind == "checkpoint")
    return std::make_unique<trainer::ModelTeacher>(microlm::load_checkpoint(path));
  if (kind == "logits_dir") return std::make_unique<trainer::LogitsDirTeacher>(path);
  throw ConfigError("unknown teacher kind '" + kind + "' (none|checkpoint|logits_dir)");
}

}  // namespace

void cmd_train_resolved(const json& resolved, const std::string& run_dir) {
  if (run_dir.empty()) throw ConfigError("train needs a run directory");
  for (const char* key : {"train_corpus", "valid_corpus", "model", "train"})
    if (!resolved.contains(key))
      throw ConfigError(std::string("train config missing section '") + key + "'");

  const microlm::ModelConfig model_config =
      microlm::ModelConfig::from_json(resolved.at("model").dump());
  const trainer::TrainConfig train_config =
      train_config_from_json(resolved.at("train"), run_dir);
  const json teacher_json = resolved.value("teacher", json{{"kind", "none"}});
  std::unique_ptr<trainer::TeacherProvider> teacher =
      teacher_from_json(teacher_json, train_config.lambda);

  const auto train_set =
      corpus::read_segmented_jsonl(resolved.at("train_corpus").get<std::string>());
  const auto valid_set =
      corpus::read_segmented_jsonl(resolved.at("valid_corpus").get<std::string>());

  trainer::TrainReport report =
      trainer::train(train_set, valid_set, *teacher, model_config, train_config);

  std::filesystem::create_directories(run_dir);
  json report_json{
      {"run",
       {{"regime", supervision::to_string(train_config.regime)},
        {"truncation", train_config.truncation.to_string()},
        {"lambda", train_config.lambda},
        {"epochs", train_config.epochs},
        {"lr", train_config.lr},
        {"weight_decay", train_config.weight_decay},
        {"grad_accum_steps", train_config.grad_accum_steps},
        {"micro_batch", train_config.micro_batch},
        {"seed", train_config.seed},
        {"teacher", teacher_json.value("kind", std::string("none"))},
        {"model", json::parse(model_config.to_json())}}},
      {"result", json::parse(trainer::report_to_json(report))}};
  const std::string report_path = run_dir + "/report.json";
  const std::string steps_path = run_dir + "/steps.csv";
  const std::string valid_csv_path = run_dir + "/validation.csv";
  manifest::write_file_atomic(report_path, report_json.dump(2) + "\n");
  write_atomic_via(steps_path,
                   [&](const std::string& p) { trainer::write_step_csv(p, report); });
  write_atomic_via(valid_csv_path,
                   [&](const std::string& p) { trainer::write_validation_csv(p, report); });
  // Wall-clock time lives in its own file so every byte of the files above is
  // reproducible.
  manifest::write_file_atomic(run_dir + "/timing.json",
                              json{{"wall_seconds", report.wall_seconds}}.dump(2) + "\n");

  json inputs{{"train_corpus", resolved.at("train_corpus")},
              {"valid_corpus", resolved.at("valid_corpus")}};
  if (teacher_json.contains("path")) inputs["teacher"] = teacher_json.at("path");
  json outputs{{"report", report_path},
               {"steps_csv", steps_path},
               {"validation_csv", valid_csv_path},
               {"best_checkpoint", run_dir + "/best.bin"},
               {"final_checkpoint", run_dir + "/final.bin"},
               {"selected_checkpoint", report.selected_checkpoint}};
  write_manifest_for(run_dir + "/manifest.json", "train", resolved, std::move(inputs),
                     std::move(outputs));
}

void cmd_train(const TrainOptions& o) {
  json resolved;
  try {
    resolved = json::parse(manifest::read_file(o.config_file));
  } catch (const json::exception& e) {
    throw ConfigError("train config " + o.config_file + " is not valid JSON: " + e.what());
  }
  if (!resolved.is_object()) throw ConfigError("train config must be a JSON object");
  if (!resolved.contains("train") || !resolved["train"].is_object())
    throw ConfigError("train config missing section 'train'");
  if (!o.regime_override.empty()) resolved["train"]["regime"] = o.regime_override;
  if (!o.truncate_override.empty()) resolved["train"]["truncation"] = o.truncate_override;
  if (o.lambda_override >= 0.0) resolved["train"]["lambda"] = o.lambda_override;
  cmd_train_resolved(resolved, o.run_dir);
}

// ---- analyze ---------------------------------------------------------------

json analyze_config_json(const AnalyzeOptions& o) {
  return json{{"mode", o.mode},
              {"in", o.in_path},
              {"out", o.out_path},
              {"threshold", o.threshold},
              {"smooth_window", o.smooth_window},
              {"run_dirs", o.run_dirs},
              {"reference_dir", o.reference_dir},
              {"numerator", o.numerator},
              {"denominator", o.denominator},
              {"has_ratio_inputs", o.has_ratio_inputs},
              {"judge", o.judge_spec},
              {"tokenizer", o.tokenizer_spec},
              {"derivations", o.derivations_path}};
}

AnalyzeOptions analyze_options_from_config(const json& j) {
  AnalyzeOptions o;
  o.mode = j.at("mode").get<std::string>();
  o.in_path = j.value("in", std::string());
  o.out_path = j.value("out", std::string());
  o.threshold = j.value("threshold", 0.0);
  o.smooth_window = j.value("smooth_window", std::size_t{1});
  o.run_dirs = j.value("run_dirs", std::vector<std::string>{});
  o.reference_dir = j.value("reference_dir", std::string());
  o.numerator = j.value("numerator", 0.0);
  o.denominator = j.value("denominator", 0.0);
  o.has_ratio_inputs = j.value("has_ratio_inputs", false);
  o.judge_spec = j.value("judge", std::string());
  o.tokenizer_spec = j.value("tokenizer", std::string("byte"));
  o.derivations_path = j.value("derivations", std::string());
  return o;
}

namespace {

void analyze_knee(const AnalyzeOptions& o, std::string& out_text) {
  const Csv csv = read_csv(o.in_path);
  if (csv.header.size() < 2)
    throw ConfigError("knee mode expects a CSV with at least two columns (x, y)");
  std::vector<double> xs, ys;
  for (const auto& row : csv.rows) {
    if (row.size() < 2) throw ConfigError("knee mode: short row in " + o.in_path);
    xs.push_back(to_double(row[0], csv.header[0]));
    ys.push_back(to_double(row[1], csv.header[1]));
  }
  if (o.smooth_window > 1) ys = trainer::smooth_curve(ys, o.smooth_window);
  const analysis::KneeResult knee = analysis::find_knee(xs, ys, o.threshold);
  json j{{"found", knee.found},
         {"difference_curve", knee.difference_curve},
         {"threshold", o.threshold},
         {"smooth_window", o.smooth_window}};
  if (knee.found) j["knee_x"] = knee.knee_x;
  out_text = j.dump(2) + "\n";
}

void analyze_retention(const AnalyzeOptions& o, std::string& out_text) {
  if (!o.has_ratio_inputs)
    throw ConfigError("retention mode needs --numerator and --denominator");
  json j{{"numerator", o.numerator},
         {"denominator", o.denominator},
         {"retention_ratio", analysis::retention_ratio(o.numerator, o.denominator)}};
  out_text = j.dump(2) + "\n";
}

std::vector<trainer::StepLoss> read_steps_csv(const std::string& run_dir) {
  const Csv csv = read_csv(run_dir + "/steps.csv");
  std::vector<trainer::StepLoss> steps;
  for (const auto& row : csv.rows) {
    if (row.size() < 4) throw ConfigError("short row in " + run_dir + "/steps.csv");
    trainer::StepLoss s;
    s.step = static_cast<std::int64_t>(to_double(row[0], "step"));
    s.soft = to_double(row[1], "soft");
    s.hard = to_double(row[2], "hard");
    s.combined = to_double(row[3], "combined");
    steps.push_back(s);
  }
  return steps;
}

void analyze_curves(const AnalyzeOptions& o, std::string& out_text, json& summary) {
  if (o.run_dirs.empty()) throw ConfigError("curves mode needs at least one --run directory");
  std::vector<double> ref_smoothed;
  if (!o.reference_dir.empty()) {
    std::vector<double> ref;
    for (const auto& s : read_steps_csv(o.reference_dir)) ref.push_back(s.combined);
    ref_smoothed = trainer::smooth_curve(ref, o.smooth_window);
  }
  std::string csv = "run,step,soft,hard,combined,combined_smoothed";
  if (!ref_smoothed.empty()) csv += ",rel_vs_reference_pct";
  csv += "\n";
  summary = json::object();
  char buf[256];
  for (const auto& dir : o.run_dirs) {
    const auto steps = read_steps_csv(dir);
    std::vector<double> combined;
    for (const auto& s : steps) combined.push_back(s.combined);
    const std::vector<double> smoothed = trainer::smooth_curve(combined, o.smooth_window);
    trainer::CurveStats rel;
    if (!ref_smoothed.empty()) rel = trainer::relative_difference(smoothed, ref_smoothed);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s,%lld,%.17g,%.17g,%.17g,%.17g", dir.c_str(),
                    static_cast<long long>(steps[i].step), steps[i].soft, steps[i].hard,
                    steps[i].combined, smoothed[i]);
      csv += buf;
      if (!ref_smoothed.empty()) {
        std::snprintf(buf, sizeof buf, ",%.17g", rel.series[i]);
        csv += buf;
      }
      csv += "\n";
    }
    if (!ref_smoothed.empty())
      summary[dir] = json{{"avg_rel_diff_pct", rel.avg_rel_diff},
                          {"last_rel_diff_pct", rel.last_rel_diff}};
  }
  out_text = csv;
}

void analyze_audit(const AnalyzeOptions& o, std::string& out_text) {
  std::istringstream in(manifest::read_file(o.in_path));
  std::vector<std::string> texts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
      throw ConfigError("line " + std::to_string(lineno) + ": expected a 'text' string");
    texts.push_back(j["text"].get<std::string>());
  }

  const Tokenizer tokenizer = load_tokenizer(o.tokenizer_spec);
  std::unique_ptr<analysis::JudgeTransport> judge;
  if (o.judge_spec.rfind("stub:", 0) == 0) {
    judge = std::make_unique<analysis::StubJudge>(
        analysis::StubJudge::from_file(o.judge_spec.substr(5)));
  } else if (o.judge_spec == "http") {
    judge = std::make_unique<analysis::HttpJudge>(analysis::HttpJudge::from_environment());
  } else {
    throw ConfigError("audit mode needs --judge stub:<file> or --judge http");
  }
  const analysis::AuditReport report = analysis::run_audit(texts, tokenizer, *judge);
  out_text = analysis::audit_report_to_json(report) + "\n";
}

void analyze_positions(const AnalyzeOptions& o, std::string& out_text) {
  const auto corpus_examples = corpus::read_segmented_jsonl(o.in_path);
  if (o.derivations_path.empty())
    throw ConfigError("positions mode needs --derivations (JSONL of 'substring' objects)");
  std::vector<std::string> substrings;
  {
    std::istringstream in(manifest::read_file(o.derivations_path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw ConfigError("line " + std::to_string(lineno) + ": invalid JSON: " + e.what());
      }
      if (!j.is_object() || !j.contains("substring") || !j["substring"].is_string())
        throw ConfigError("line " + std::to_string(lineno) + ": expected a 'substring' string");
      substrings.push_back(j["substring"].get<std::string>());
    }
  }
  if (substrings.size() != corpus_examples.size())
    throw ConfigError("positions mode: " + std::to_string(substrings.size()) +
                      " derivations for " + std::to_string(corpus_examples.size()) +
                      " examples");

  const Tokenizer tokenizer = load_tokenizer(o.tokenizer_spec);
  const corpus::SectionStats stats = corpus::section_stats(corpus_examples);
  std::string csv = "index,position_in_cot,position_in_full,reflections_before\n";
  char buf[160];
  for (std::size_t i = 0; i < corpus_examples.size(); ++i) {
    const auto& ex = corpus_examples[i];
    const double pos = analysis::locate_derivation(ex, substrings[i], tokenizer);
    const double full =
        analysis::full_sequence_position(stats.prompt.share, stats.cot.share, pos);
    std::string cot_text;
    for (std::size_t t = ex.cot_span.start; t < ex.cot_span.end; ++t)
      cot_text += tokenizer.token_text(ex.token_ids[t]);
    const std::size_t cutoff = cot_text.find(substrings[i]);
    const std::size_t cues = analysis::count_self_reflection(cot_text, cutoff);
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%zu\n", i, pos, full, cues);
    csv += buf;
  }
  out_text = csv;
}

}  // namespace

void cmd_analyze(const AnalyzeOptions& o) {
  if (o.out_path.empty()) throw ConfigError("analyze needs an output path");
  std::string out_text;
  json extra;
  if (o.mode == "knee") {
    analyze_knee(o, out_text);
  } else if (o.mode == "retention") {
    analyze_retention(o, out_text);
  } else if (o.mode == "curves") {
    analyze_curves(o, out_text, extra);
  } else if (o.mode == "audit") {
    analyze_audit(o, out_text);
  } else if (o.mode == "positions") {
    analyze_positions(o, out_text);
  } else {
    throw ConfigError("unknown analyze mode '" + o.mode +
                      "' (knee|retention|curves|audit|positions)");
  }
  manifest::write_file_atomic(o.out_path, out_text);
  json outputs{{"out", o.out_path}};
  if (o.mode == "curves" && !o.reference_dir.empty()) {
    const std::string summary_path = o.out_path + ".summary.json";
    manifest::write_file_atomic(summary_path, extra.dump(2) + "\n");
    outputs["summary"] = summary_path;
  }
  json inputs = json::object();
  if (!o.in_path.empty()) inputs["in"] = o.in_path;
  write_manifest_for(o.out_path + ".manifest.json", "analyze", analyze_config_json(o),
                     std::move(inputs), std::move(outputs));
}

// ---- cost ----------------------------------------------------------------

json cost_config_json(const CostOptions& o) {
  return json{{"grid", o.grid},
              {"n_params", o.n_params},
              {"n_layers", o.n_layers},
              {"d_model", o.d_model},
              {"n_heads", o.n_heads},
              {"seq_len", o.seq_len},
              {"batch", o.batch},
              {"runs", o.runs},
              {"train_hours", o.train_hours},
              {"train_gpus", o.train_gpus},
              {"eval_hours", o.eval_hours},
              {"eval_gpus", o.eval_gpus},
              {"n_benchmarks", o.n_benchmarks},
              {"out", o.out_path}};
}

CostOptions cost_options_from_config(const json& j) {
  CostOptions o;
  o.grid = j.value("grid", false);
  o.n_params = j.value("n_params", 0.0);
  o.n_layers = j.value("n_layers", 0.0);
  o.d_model = j.value("d_model", 0.0);
  o.n_heads = j.value("n_heads", 0.0);
  o.seq_len = j.value("seq_len", 0.0);
  o.batch = j.value("batch", 1.0);
  o.runs = j.value("runs", 0.0);
  o.train_hours = j.value("train_hours", 0.0);
  o.train_gpus = j.value("train_gpus", 0.0);
  o.eval_hours = j.value("eval_hours", 0.0);
  o.eval_gpus = j.value("eval_gpus", 0.0);
  o.n_benchmarks = j.value("n_benchmarks", 0.0);
  o.out_path = j.value("out", std::string());
  return o;
}

void cmd_cost(const CostOptions& o) {
  if (o.out_path.empty()) throw ConfigError("cost needs an output path");
  if (o.grid) {
    cost::GridSpec spec;
    spec.runs = o.runs;
    spec.train_hours = o.train_hours;
    spec.train_gpus = o.train_gpus;
    spec.eval_hours = o.eval_hours;
    spec.eval_gpus = o.eval_gpus;
    spec.n_benchmarks = o.n_benchmarks;
    const cost::GridBudget budget = cost::grid_gpu_hours(spec);
    json j{{"runs", spec.runs},
           {"train_hours", spec.train_hours},
           {"train_gpus", spec.train_gpus},
           {"eval_hours", spec.eval_hours},
           {"eval_gpus", spec.eval_gpus},
           {"n_benchmarks", spec.n_benchmarks},
           {"per_run_gpu_hours", budget.per_run_gpu_hours},
           {"total_gpu_hours", budget.total_gpu_hours}};
    manifest::write_file_atomic(o.out_path, j.dump(2) + "\n");
  } else {
    cost::ModelShape shape;
    shape.n_params = o.n_params;
    shape.n_layers = o.n_layers;
    shape.d_model = o.d_model;
    shape.n_heads = o.n_heads;
    write_atomic_via(o.out_path, [&](const std::string& p) {
      cost::write_cost_csv(p, shape, o.seq_len, o.batch);
    });
  }
  write_manifest_for(o.out_path + ".manifest.json", "cost", cost_config_json(o),
                     json::object(), json{{"out", o.out_path}});
}

}  // namespace cotkd::commands
