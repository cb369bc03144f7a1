#ifndef COTKD_COST_HPP
#define COTKD_COST_HPP

#include <string>
#include <vector>

#include "cotkd/error.hpp"

namespace cotkd::cost {

// Shape inputs for the analytic estimators. n_params is the trainable
// parameter count the optimizer holds state for (use the per-device shard
// when modeling a sharded setup).
struct ModelShape {
  double n_params = 0;
  double n_layers = 0;
  double d_model = 0;
  double n_heads = 0;
};

// Stated constants of the estimator, exposed so users can recalibrate.
struct CostModelConfig {
  double flops_dense_factor = 6.0;       // fwd+bwd FLOPs per parameter per token
  double flops_attention_factor = 12.0;  // x n_layers * d_model * seq_len^2
  double bytes_per_param = 4.0;
  double bytes_per_grad = 4.0;
  double bytes_per_moment = 4.0;            // AdamW keeps two moments
  double activation_linear_bytes = 60.0;    // x n_layers * d_model * seq_len * batch
  double activation_attention_bytes = 4.0;  // x n_layers * n_heads * seq_len^2 * batch
};

struct CostEstimate {
  double flops = 0;
  double peak_memory_bytes = 0;
  double static_bytes = 0;                // parameters + grads + optimizer moments
  double attention_activation_bytes = 0;  // the quadratic slice of the activations
};

// dense fwd+bwd term + quadratic attention-score term. An estimate of trend,
// not a measurement.
double flops_per_step(const ModelShape& model, double seq_len, double batch,
                      const CostModelConfig& config = {});

CostEstimate memory_estimate(const ModelShape& model, double seq_len, double batch,
                             const CostModelConfig& config = {});

struct GridSpec {
  double runs = 0;
  double train_hours = 0;
  double train_gpus = 0;
  double eval_hours = 0;
  double eval_gpus = 0;
  double n_benchmarks = 0;
};

struct GridBudget {
  GridSpec spec;
  double per_run_gpu_hours = 0;  // train_hours*train_gpus + n_benchmarks*eval_hours*eval_gpus
  double total_gpu_hours = 0;    // runs * per_run_gpu_hours
};

GridBudget grid_gpu_hours(const GridSpec& spec);

// One row per p in {0.1, ..., 1.0}: lsp, flops, memory, attention_term, with
// seq_len truncated to ceil(p * base_seq_len) tokens.
void write_cost_csv(const std::string& path, const ModelShape& model, double base_seq_len,
                    double batch, const CostModelConfig& config = {});

}  // namespace cotkd::cost

#endif  // COTKD_COST_HPP
