#ifndef COTKD_KDLOSS_HPP
#define COTKD_KDLOSS_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "cotkd/error.hpp"
#include "cotkd/supervision.hpp"

namespace cotkd::kdloss {

// Row-major (positions x vocab) logit storage; one row per label position.
struct LogitsMatrix {
  std::size_t positions = 0;
  std::size_t vocab = 0;
  std::vector<double> data;

  LogitsMatrix() = default;
  LogitsMatrix(std::size_t positions_, std::size_t vocab_)
      : positions(positions_), vocab(vocab_), data(positions_ * vocab_, 0.0) {}

  double* row(std::size_t i) { return data.data() + i * vocab; }
  const double* row(std::size_t i) const { return data.data() + i * vocab; }
};

enum class Reduction { Sum, Mean };

Reduction reduction_from_string(const std::string& s);  // "sum" | "mean"
std::string to_string(Reduction r);

struct LossBreakdown {
  double soft = 0.0;      // nats
  double hard = 0.0;      // nats
  double combined = 0.0;  // lambda*soft + (1-lambda)*hard, same reduction
  double lambda = 0.5;
  std::size_t n_supervised = 0;
  Reduction reduction = Reduction::Mean;
};

// Max-shifted softmax; entries positive and summing to 1.
std::vector<double> softmax(const std::vector<double>& logits);

// Negative log-likelihood of the labels over masked positions. Unmasked
// positions contribute nothing. Log-probabilities come from a direct
// log-softmax (never log(softmax(x))).
double hard_loss(const LogitsMatrix& student, const std::vector<int>& labels,
                 const supervision::SupervisionMask& mask, Reduction reduction);

// Forward KL per masked position: sum_v pT(v) * (log pT(v) - log pS(v)).
double soft_loss(const LogitsMatrix& teacher, const LogitsMatrix& student,
                 const supervision::SupervisionMask& mask, Reduction reduction);

LossBreakdown combined_loss(const LogitsMatrix& teacher, const LogitsMatrix& student,
                            const std::vector<int>& labels,
                            const supervision::SupervisionMask& mask, double lambda = 0.5,
                            Reduction reduction = Reduction::Mean);

// Precomputed logits interchange file: magic "KDLG", u32 version, u32 vocab,
// u32 positions, u32 dtype (0 = float32), then row-major float32 rows.
// Little-endian throughout.
void write_logits_file(const std::string& path, const LogitsMatrix& logits);
LogitsMatrix read_logits_file(const std::string& path);

}  // namespace cotkd::kdloss

#endif  // COTKD_KDLOSS_HPP
