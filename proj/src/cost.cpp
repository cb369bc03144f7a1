#include "cotkd/cost.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace cotkd::cost {

namespace {
void check_nonnegative(double v, const char* name) {
  if (!(v >= 0.0)) throw ConfigError(std::string(name) + " must be nonnegative");
}

void check_shape(const ModelShape& m) {
  check_nonnegative(m.n_params, "n_params");
  check_nonnegative(m.n_layers, "n_layers");
  check_nonnegative(m.d_model, "d_model");
  check_nonnegative(m.n_heads, "n_heads");
}
}  // namespace

double flops_per_step(const ModelShape& model, double seq_len, double batch,
                      const CostModelConfig& config) {
  check_shape(model);
  check_nonnegative(seq_len, "seq_len");
  check_nonnegative(batch, "batch");
  const double dense = config.flops_dense_factor * model.n_params * seq_len * batch;
  const double attention = config.flops_attention_factor * model.n_layers * model.d_model *
                           seq_len * seq_len * batch;
  return dense + attention;
}

CostEstimate memory_estimate(const ModelShape& model, double seq_len, double batch,
                             const CostModelConfig& config) {
  check_shape(model);
  check_nonnegative(seq_len, "seq_len");
  check_nonnegative(batch, "batch");
  CostEstimate e;
  e.static_bytes = model.n_params * (config.bytes_per_param + config.bytes_per_grad +
                                     2.0 * config.bytes_per_moment);
  const double linear_act =
      config.activation_linear_bytes * model.n_layers * model.d_model * seq_len * batch;
  e.attention_activation_bytes = config.activation_attention_bytes * model.n_layers *
                                 model.n_heads * seq_len * seq_len * batch;
  e.peak_memory_bytes = e.static_bytes + linear_act + e.attention_activation_bytes;
  e.flops = flops_per_step(model, seq_len, batch, config);
  return e;
}

GridBudget grid_gpu_hours(const GridSpec& spec) {
  check_nonnegative(spec.runs, "runs");
  check_nonnegative(spec.train_hours, "train_hours");
  check_nonnegative(spec.train_gpus, "train_gpus");
  check_nonnegative(spec.eval_hours, "eval_hours");
  check_nonnegative(spec.eval_gpus, "eval_gpus");
  check_nonnegative(spec.n_benchmarks, "n_benchmarks");
  GridBudget b;
  b.spec = spec;
  b.per_run_gpu_hours = spec.train_hours * spec.train_gpus +
                        spec.n_benchmarks * spec.eval_hours * spec.eval_gpus;
  b.total_gpu_hours = spec.runs * b.per_run_gpu_hours;
  return b;
}

void write_cost_csv(const std::string& path, const ModelShape& model, double base_seq_len,
                    double batch, const CostModelConfig& config) {
  check_nonnegative(base_seq_len, "base_seq_len");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write cost CSV: " + path);
  out << "lsp,flops,memory,attention_term\n";
  char buf[160];
  for (int i = 1; i <= 10; ++i) {
    const double p = static_cast<double>(i) / 10.0;
    const double kept = std::ceil(p * base_seq_len - 1e-9);  // same rule as truncation
    const CostEstimate e = memory_estimate(model, kept, batch, config);
    std::snprintf(buf, sizeof buf, "%.1f,%.17g,%.17g,%.17g\n", p, e.flops,
                  e.peak_memory_bytes, e.attention_activation_bytes);
    out << buf;
  }
}

}  // namespace cotkd::cost
