#include "cotkd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "cotkd/rng.hpp"

namespace cotkd::trainer {

namespace {
using nlohmann::json;

std::string sequence_key(const std::vector<int>& token_ids) {
  return {reinterpret_cast<const char*>(token_ids.data()),
          token_ids.size() * sizeof(int)};
}
}  // namespace

ModelTeacher::ModelTeacher(microlm::ModelParams params, bool memoize)
    : params_(std::move(params)), memoize_(memoize) {}

kdloss::LogitsMatrix ModelTeacher::logits_for(const std::vector<int>& token_ids,
                                              const std::string&) {
  if (!memoize_) return microlm::forward(params_, token_ids);
  const std::string key = sequence_key(token_ids);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  kdloss::LogitsMatrix logits = microlm::forward(params_, token_ids);
  return cache_.emplace(key, std::move(logits)).first->second;
}

LogitsDirTeacher::LogitsDirTeacher(std::string dir) : dir_(std::move(dir)) {}

kdloss::LogitsMatrix LogitsDirTeacher::logits_for(const std::vector<int>&,
                                                  const std::string& id) {
  return kdloss::read_logits_file(dir_ + "/" + id + ".kdlg");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (grad_accum_steps < 1 || micro_batch < 1)
    throw ConfigError("grad_accum_steps and micro_batch must be at least 1");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0,1]");
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be nonnegative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be nonnegative");
  if (validate_every_steps < 0) throw ConfigError("validate_every_steps must be >= 0");
}

std::vector<double> TrainReport::combined_series() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.combined);
  return out;
}

std::vector<PreparedExample> prepare_examples(const std::vector<corpus::SegmentedExample>& corpus,
                                              supervision::TruncationPolicy policy,
                                              supervision::SupervisionRegime regime,
                                              const std::string& tag,
                                              std::size_t* skipped_degenerate) {
  std::vector<PreparedExample> out;
  out.reserve(corpus.size());
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    try {
      auto [trunc, mask] = supervision::compose(corpus[i], policy, regime);
      PreparedExample p;
      p.labels.assign(trunc.token_ids.begin() + 1, trunc.token_ids.end());
      p.tokens = std::move(trunc.token_ids);
      p.mask = std::move(mask);
      p.id = tag + "-" + std::to_string(i);
      out.push_back(std::move(p));
    } catch (const DegenerateRegime&) {
      ++skipped;  // aggressive truncation legitimately wipes out some regimes
    } catch (const EmptyResult&) {
      ++skipped;
    }
  }
  if (skipped_degenerate) *skipped_degenerate = skipped;
  return out;
}

double mean_masked_loss(const microlm::ModelParams& params,
                        const std::vector<PreparedExample>& examples,
                        TeacherProvider& teacher, double lambda) {
  if (examples.empty()) throw EmptyCorpus("no examples to evaluate");
  double total = 0.0;
  std::size_t positions = 0;
  for (const auto& ex : examples) {
    const kdloss::LogitsMatrix student = microlm::forward(params, ex.tokens);
    kdloss::LogitsMatrix teacher_logits;
    if (lambda > 0.0) teacher_logits = teacher.logits_for(ex.tokens, ex.id);
    double sum;
    if (lambda > 0.0) {
      sum = kdloss::combined_loss(teacher_logits, student, ex.labels, ex.mask, lambda,
                                  kdloss::Reduction::Sum)
                .combined;
    } else {
      sum = kdloss::hard_loss(student, ex.labels, ex.mask, kdloss::Reduction::Sum);
    }
    total += sum;
    positions += ex.mask.n_supervised();
  }
  if (positions == 0) throw EmptyMask("evaluation mask selects no positions");
  return total / static_cast<double>(positions);
}

double token_accuracy(const microlm::ModelParams& params,
                      const std::vector<corpus::SegmentedExample>& corpus,
                      supervision::SupervisionRegime eval_regime) {
  std::size_t hits = 0, total = 0;
  for (const auto& ex : corpus) {
    supervision::SupervisionMask mask;
    try {
      mask = supervision::build_mask(ex, eval_regime);
    } catch (const DegenerateRegime&) {
      continue;
    }
    const kdloss::LogitsMatrix logits = microlm::forward(params, ex.token_ids);
    for (std::size_t t = 0; t < mask.bits.size(); ++t) {
      if (!mask.bits[t]) continue;
      const double* row = logits.row(t);
      const std::size_t argmax = static_cast<std::size_t>(
          std::max_element(row, row + logits.vocab) - row);
      hits += argmax == static_cast<std::size_t>(ex.token_ids[t + 1]) ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw EmptyMask("no evaluable positions for this regime");
  return static_cast<double>(hits) / static_cast<double>(total);
}

namespace {

struct WindowAccum {
  std::vector<double> grads;
  double soft = 0.0, hard = 0.0, combined = 0.0;
  std::size_t n_supervised = 0;
  int count = 0;

  void reset(std::size_t n_params) {
    grads.assign(n_params, 0.0);
    soft = hard = combined = 0.0;
    n_supervised = 0;
    count = 0;
  }
};

}  // namespace

TrainReport train(const std::vector<corpus::SegmentedExample>& train_corpus,
                  const std::vector<corpus::SegmentedExample>& valid_corpus,
                  TeacherProvider& teacher, const microlm::ModelConfig& student_config,
                  const TrainConfig& config) {
  config.validate();
  student_config.validate();
  const auto t_start = std::chrono::steady_clock::now();

  TrainReport report;
  std::size_t skipped_train = 0, skipped_valid = 0;
  const std::vector<PreparedExample> train_set =
      prepare_examples(train_corpus, config.truncation, config.regime, "train", &skipped_train);
  const std::vector<PreparedExample> valid_set =
      prepare_examples(valid_corpus, config.truncation, config.regime, "valid", &skipped_valid);
  report.skipped_degenerate = skipped_train + skipped_valid;
  if (train_set.empty())
    throw EmptyCorpus("every training example is degenerate under regime '" +
                      supervision::to_string(config.regime) + "' with truncation '" +
                      config.truncation.to_string() + "'");
  report.trained_examples = train_set.size();

  microlm::ModelParams params = microlm::init_model(student_config);
  microlm::AdamWConfig opt_cfg;
  opt_cfg.lr = config.lr;
  opt_cfg.weight_decay = config.weight_decay;
  opt_cfg.beta1 = config.beta1;
  opt_cfg.beta2 = config.beta2;
  opt_cfg.eps = config.eps;
  microlm::OptimizerState opt = microlm::OptimizerState::init(params, opt_cfg);

  const bool save_to_disk = !config.run_dir.empty();
  if (save_to_disk) std::filesystem::create_directories(config.run_dir);

  double best_loss = std::numeric_limits<double>::infinity();
  std::int64_t step = 0;

  auto run_validation = [&]() {
    if (valid_set.empty()) return;
    if (!report.validations.empty() && report.validations.back().step == step)
      return;  // step-cadence and epoch-end cadence can coincide
    ValidationPoint v;
    v.step = step;
    v.loss = mean_masked_loss(params, valid_set, teacher, config.lambda);
    v.checkpoint_id = "ckpt_step" + std::to_string(step);
    if (save_to_disk)
      microlm::save_checkpoint(config.run_dir + "/" + v.checkpoint_id + ".bin", params);
    if (v.loss < best_loss) {  // strict: ties keep the earliest checkpoint
      best_loss = v.loss;
      report.selected_checkpoint = v.checkpoint_id;
      report.best_params = params;
    }
    report.validations.push_back(std::move(v));
  };

  const int window_size = config.micro_batch * config.grad_accum_steps;
  WindowAccum window;
  window.reset(params.n_params());
  const kdloss::LogitsMatrix no_teacher;

  auto flush_window = [&]() {
    if (window.count == 0) return;
    const double inv = 1.0 / static_cast<double>(window.count);
    for (double& g : window.grads) g *= inv;
    microlm::adamw_step(params, window.grads, opt);
    ++step;
    StepLoss s;
    s.step = step;
    s.soft = window.soft * inv;
    s.hard = window.hard * inv;
    s.combined = window.combined * inv;
    s.n_supervised = window.n_supervised;
    report.steps.push_back(s);
    window.reset(params.n_params());
    if (config.validate_every_steps > 0 && step % config.validate_every_steps == 0)
      run_validation();
  };

  Rng order_rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t idx : order) {
      const PreparedExample& ex = train_set[idx];
      kdloss::LogitsMatrix teacher_logits;
      if (config.lambda > 0.0) teacher_logits = teacher.logits_for(ex.tokens, ex.id);
      auto [breakdown, grads] = microlm::loss_and_grads(
          params, ex.tokens, ex.labels, ex.mask, config.lambda,
          config.lambda > 0.0 ? teacher_logits : no_teacher, kdloss::Reduction::Mean);
      for (std::size_t i = 0; i < grads.size(); ++i) window.grads[i] += grads[i];
      window.soft += breakdown.soft;
      window.hard += breakdown.hard;
      window.combined += breakdown.combined;
      window.n_supervised += breakdown.n_supervised;
      if (++window.count == window_size) flush_window();
    }
    flush_window();   // partial window at epoch end still steps
    run_validation();  // cadence: at least once per epoch
  }

  report.final_params = params;
  if (report.selected_checkpoint.empty()) {
    // no validation data: fall back to the final state
    report.selected_checkpoint = "ckpt_step" + std::to_string(step);
    report.best_params = params;
  }
  if (save_to_disk) {
    microlm::save_checkpoint(config.run_dir + "/best.bin", report.best_params);
    microlm::save_checkpoint(config.run_dir + "/final.bin", report.final_params);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

std::vector<double> smooth_curve(const std::vector<double>& values, std::size_t window) {
  if (window < 1) throw ConfigError("smoothing window must be at least 1");
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i >= window) acc -= values[i - window];
    const std::size_t n = std::min(i + 1, window);
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

CurveStats relative_difference(const std::vector<double>& candidate,
                               const std::vector<double>& reference) {
  if (candidate.size() != reference.size()) {
    throw LengthMismatch("candidate has " + std::to_string(candidate.size()) +
                         " steps, reference has " + std::to_string(reference.size()));
  }
  if (candidate.empty()) throw LengthMismatch("need at least one aligned step");
  CurveStats stats;
  stats.series.resize(candidate.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    if (!(reference[i] > 0.0))
      throw NonpositiveReference("reference value " + std::to_string(reference[i]) +
                                 " at step " + std::to_string(i));
    stats.series[i] = (candidate[i] - reference[i]) / reference[i] * 100.0;
    sum += stats.series[i];
  }
  stats.avg_rel_diff = sum / static_cast<double>(stats.series.size());
  stats.last_rel_diff = stats.series.back();
  return stats;
}

std::string report_to_json(const TrainReport& report) {
  json steps = json::array();
  for (const auto& s : report.steps) {
    steps.push_back({{"step", s.step},
                     {"soft", s.soft},
                     {"hard", s.hard},
                     {"combined", s.combined},
                     {"n_supervised", s.n_supervised}});
  }
  json validations = json::array();
  for (const auto& v : report.validations) {
    validations.push_back(
        {{"step", v.step}, {"loss", v.loss}, {"checkpoint", v.checkpoint_id}});
  }
  json j{{"steps", steps},
         {"validations", validations},
         {"selected_checkpoint", report.selected_checkpoint},
         {"skipped_degenerate", report.skipped_degenerate},
         {"trained_examples", report.trained_examples}};
  return j.dump(2);
}

void write_step_csv(const std::string& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write CSV: " + path);
  out << "step,soft,hard,combined,n_supervised\n";
  char buf[128];
  for (const auto& s : report.steps) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%zu\n",
                  static_cast<long long>(s.step), s.soft, s.hard, s.combined,
                  s.n_supervised);
    out << buf;
  }
}

void write_validation_csv(const std::string& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write CSV: " + path);
  out << "step,loss,checkpoint\n";
  char buf[160];
  for (const auto& v : report.validations) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%s\n", static_cast<long long>(v.step), v.loss,
                  v.checkpoint_id.c_str());
    out << buf;
  }
}

}  // namespace cotkd::trainer
