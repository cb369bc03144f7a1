#ifndef COTKD_MICROLM_HPP
#define COTKD_MICROLM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cotkd/error.hpp"
#include "cotkd/kdloss.hpp"
#include "cotkd/supervision.hpp"

namespace cotkd::microlm {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

struct ModelConfig {
  int vocab_size = 0;
  int d_model = 0;
  int n_layers = 0;
  int n_heads = 0;
  int max_seq_len = 0;
  std::uint64_t seed = 1;
  double init_std = 0.02;

  void validate() const;  // throws ConfigError
  std::string to_json() const;
  static ModelConfig from_json(const std::string& json_text);
};

struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

// All parameters live in one flat buffer; tensors are row-major views into
// it, in a fixed declared order (also the checkpoint serialization order).
struct ModelParams {
  ModelConfig config;
  std::vector<double> flat;
  std::vector<TensorInfo> tensors;

  std::size_t n_params() const { return flat.size(); }
  const TensorInfo& info(const std::string& name) const;
  MatMap view(const TensorInfo& t);
  ConstMatMap view(const TensorInfo& t) const;
  MatMap view(const std::string& name);
  ConstMatMap view(const std::string& name) const;
};

// Gradient buffer aligned with ModelParams::flat.
using Gradients = std::vector<double>;

ModelParams init_model(const ModelConfig& config);

// Pre-norm causal transformer forward. A length-T input yields T-1 logit
// rows (row t scores the prediction of token t+1); the final input token
// produces no row.
kdloss::LogitsMatrix forward(const ModelParams& params, const std::vector<int>& token_ids);

// Loss and exact analytic gradients of the combined objective. labels and
// mask cover the T-1 label positions. With lambda=0 the teacher may be an
// empty LogitsMatrix. Mean reduction divides gradients by the number of
// supervised positions; sum reduction with an all-false mask yields zero
// loss and zero gradients.
std::pair<kdloss::LossBreakdown, Gradients> loss_and_grads(
    const ModelParams& params, const std::vector<int>& token_ids,
    const std::vector<int>& labels, const supervision::SupervisionMask& mask, double lambda,
    const kdloss::LogitsMatrix& teacher_logits,
    kdloss::Reduction reduction = kdloss::Reduction::Mean);

struct AdamWConfig {
  double lr = 4e-6;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamWConfig config;
  std::vector<double> m;  // first moments
  std::vector<double> v;  // second moments
  std::int64_t step = 0;

  static OptimizerState init(const ModelParams& params, const AdamWConfig& config);
};

// Decoupled-weight-decay AdamW with bias correction:
//   p -= lr * ( m_hat / (sqrt(v_hat) + eps) + wd * p )
void adamw_step(ModelParams& params, const Gradients& grads, OptimizerState& state);

// Checkpoint: magic "CKPT", u32 version, u64 config-JSON length, the JSON,
// then every tensor in declared order as float32. Little-endian.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace cotkd::microlm

#endif  // COTKD_MICROLM_HPP
