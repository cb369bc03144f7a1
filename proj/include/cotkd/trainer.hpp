#ifndef COTKD_TRAINER_HPP
#define COTKD_TRAINER_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cotkd/corpus.hpp"
#include "cotkd/kdloss.hpp"
#include "cotkd/microlm.hpp"
#include "cotkd/supervision.hpp"

namespace cotkd::trainer {

// Source of teacher logits for a (possibly truncated) token sequence. The id
// identifies the example ("train-3", "valid-0", ...) so file-backed teachers
// can locate the right row block.
class TeacherProvider {
public:
  virtual ~TeacherProvider() = default;
  virtual kdloss::LogitsMatrix logits_for(const std::vector<int>& token_ids,
                                          const std::string& id) = 0;
};

// Frozen micro-model teacher; forward passes only. Results are memoized per
// distinct token sequence so repeated runs over the same corpus (e.g. several
// student seeds) pay for each teacher forward once.
class ModelTeacher : public TeacherProvider {
public:
  explicit ModelTeacher(microlm::ModelParams params, bool memoize = true);
  kdloss::LogitsMatrix logits_for(const std::vector<int>& token_ids,
                                  const std::string& id) override;
  const microlm::ModelParams& params() const { return params_; }

private:
  microlm::ModelParams params_;
  bool memoize_;
  std::unordered_map<std::string, kdloss::LogitsMatrix> cache_;
};

// Teacher backed by a directory of precomputed logits files: <dir>/<id>.kdlg.
class LogitsDirTeacher : public TeacherProvider {
public:
  explicit LogitsDirTeacher(std::string dir);
  kdloss::LogitsMatrix logits_for(const std::vector<int>& token_ids,
                                  const std::string& id) override;

private:
  std::string dir_;
};

// No teacher; valid only for lambda = 0 runs.
class NullTeacher : public TeacherProvider {
public:
  kdloss::LogitsMatrix logits_for(const std::vector<int>&, const std::string&) override {
    return {};
  }
};

struct TrainConfig {
  int epochs = 2;
  double lr = 4e-6;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int grad_accum_steps = 8;
  int micro_batch = 1;  // effective batch = micro_batch * grad_accum_steps
  double lambda = 0.5;
  supervision::SupervisionRegime regime = supervision::SupervisionRegime::P_COT_A;
  supervision::TruncationPolicy truncation = supervision::TruncationPolicy::none();
  std::uint64_t seed = 1;        // data-order shuffle seed
  int validate_every_steps = 0;  // 0 = end of each epoch only
  std::string run_dir;           // when set, checkpoints are written here

  void validate() const;
};

struct StepLoss {
  std::int64_t step = 0;
  double soft = 0.0;
  double hard = 0.0;
  double combined = 0.0;
  std::size_t n_supervised = 0;  // total over the examples in the step
};

struct ValidationPoint {
  std::int64_t step = 0;
  double loss = 0.0;  // position-weighted mean combined loss
  std::string checkpoint_id;
};

struct TrainReport {
  std::vector<StepLoss> steps;
  std::vector<ValidationPoint> validations;
  std::string selected_checkpoint;  // minimum validation loss, earliest on ties
  std::size_t skipped_degenerate = 0;
  std::size_t trained_examples = 0;
  double wall_seconds = 0.0;  // reporting only; excluded from deterministic JSON
  microlm::ModelParams best_params;
  microlm::ModelParams final_params;

  std::vector<double> combined_series() const;
};

// An example after truncation + masking, ready for the model.
struct PreparedExample {
  std::vector<int> tokens;
  std::vector<int> labels;  // tokens shifted by one
  supervision::SupervisionMask mask;
  std::string id;
};

// Applies compose() across a corpus; degenerate examples are dropped and
// counted. ids become "<tag>-<index>" with the pre-drop index.
std::vector<PreparedExample> prepare_examples(const std::vector<corpus::SegmentedExample>& corpus,
                                              supervision::TruncationPolicy policy,
                                              supervision::SupervisionRegime regime,
                                              const std::string& tag,
                                              std::size_t* skipped_degenerate);

// Position-weighted mean combined loss over a prepared set:
// sum of per-position losses / total supervised positions.
double mean_masked_loss(const microlm::ModelParams& params,
                        const std::vector<PreparedExample>& examples,
                        TeacherProvider& teacher, double lambda);

// Greedy next-token accuracy over the label positions the regime selects,
// on full (untruncated) sequences.
double token_accuracy(const microlm::ModelParams& params,
                      const std::vector<corpus::SegmentedExample>& corpus,
                      supervision::SupervisionRegime eval_regime);

TrainReport train(const std::vector<corpus::SegmentedExample>& train_corpus,
                  const std::vector<corpus::SegmentedExample>& valid_corpus,
                  TeacherProvider& teacher, const microlm::ModelConfig& student_config,
                  const TrainConfig& config);

// Rolling mean; the first window-1 positions average over the available
// prefix.
std::vector<double> smooth_curve(const std::vector<double>& values, std::size_t window);

struct CurveStats {
  double avg_rel_diff = 0.0;   // percent
  double last_rel_diff = 0.0;  // percent
  std::vector<double> series;  // percent per aligned step
};

// Delta_rel(t) = (candidate(t) - reference(t)) / reference(t) * 100; negative
// means the candidate sits below the reference.
CurveStats relative_difference(const std::vector<double>& candidate,
                               const std::vector<double>& reference);

// Deterministic report serialization (wall metrics excluded) and CSV curves.
std::string report_to_json(const TrainReport& report);
void write_step_csv(const std::string& path, const TrainReport& report);
void write_validation_csv(const std::string& path, const TrainReport& report);

}  // namespace cotkd::trainer

#endif  // COTKD_TRAINER_HPP
