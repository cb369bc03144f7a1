#include "cotkd/kdloss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace cotkd::kdloss {

Reduction reduction_from_string(const std::string& s) {
  if (s == "sum") return Reduction::Sum;
  if (s == "mean") return Reduction::Mean;
  throw ConfigError("unknown reduction '" + s + "' (expected sum or mean)");
}

std::string to_string(Reduction r) { return r == Reduction::Sum ? "sum" : "mean"; }

namespace {

// log softmax of row[0..V) into out[0..V), max-shifted
void log_softmax(const double* row, std::size_t V, double* out) {
  double mx = row[0];
  for (std::size_t v = 1; v < V; ++v) mx = std::max(mx, row[v]);
  double sum = 0.0;
  for (std::size_t v = 0; v < V; ++v) sum += std::exp(row[v] - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t v = 0; v < V; ++v) out[v] = row[v] - lse;
}

double reduce(double total, std::size_t n, Reduction reduction) {
  if (reduction == Reduction::Sum) return total;
  if (n == 0) throw EmptyMask("mean reduction over a mask with no set bits");
  return total / static_cast<double>(n);
}

void check_mask_length(std::size_t positions, const supervision::SupervisionMask& mask) {
  if (mask.bits.size() != positions) {
    throw ShapeMismatch("mask has " + std::to_string(mask.bits.size()) + " bits for " +
                        std::to_string(positions) + " label positions");
  }
}

}  // namespace

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw ShapeMismatch("softmax of an empty vector");
  std::vector<double> out(logits.size());
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  double sum = 0.0;
  for (std::size_t v = 0; v < logits.size(); ++v) {
    out[v] = std::exp(logits[v] - mx);
    sum += out[v];
  }
  for (double& x : out) x /= sum;
  return out;
}

double hard_loss(const LogitsMatrix& student, const std::vector<int>& labels,
                 const supervision::SupervisionMask& mask, Reduction reduction) {
  check_mask_length(student.positions, mask);
  if (labels.size() != student.positions) {
    throw ShapeMismatch("got " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(student.positions) + " positions");
  }
  const std::size_t V = student.vocab;
  std::vector<double> lp(V);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < student.positions; ++t) {
    if (!mask.bits[t]) continue;
    const int y = labels[t];
    if (y < 0 || static_cast<std::size_t>(y) >= V) {
      throw ShapeMismatch("label " + std::to_string(y) + " outside vocabulary of " +
                          std::to_string(V));
    }
    log_softmax(student.row(t), V, lp.data());
    total -= lp[static_cast<std::size_t>(y)];
    ++n;
  }
  return reduce(total, n, reduction);
}

double soft_loss(const LogitsMatrix& teacher, const LogitsMatrix& student,
                 const supervision::SupervisionMask& mask, Reduction reduction) {
  if (teacher.positions != student.positions || teacher.vocab != student.vocab) {
    throw ShapeMismatch("teacher is " + std::to_string(teacher.positions) + "x" +
                        std::to_string(teacher.vocab) + ", student is " +
                        std::to_string(student.positions) + "x" +
                        std::to_string(student.vocab));
  }
  check_mask_length(student.positions, mask);
  const std::size_t V = student.vocab;
  std::vector<double> lpT(V), lpS(V);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < student.positions; ++t) {
    if (!mask.bits[t]) continue;
    log_softmax(teacher.row(t), V, lpT.data());
    log_softmax(student.row(t), V, lpS.data());
    double kl = 0.0;
    for (std::size_t v = 0; v < V; ++v) kl += std::exp(lpT[v]) * (lpT[v] - lpS[v]);
    // analytically >= 0; floor out the rounding noise near zero
    total += std::max(kl, 0.0);
    ++n;
  }
  return reduce(total, n, reduction);
}

LossBreakdown combined_loss(const LogitsMatrix& teacher, const LogitsMatrix& student,
                            const std::vector<int>& labels,
                            const supervision::SupervisionMask& mask, double lambda,
                            Reduction reduction) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0,1]");
  LossBreakdown b;
  b.lambda = lambda;
  b.reduction = reduction;
  b.n_supervised = mask.n_supervised();
  b.soft = soft_loss(teacher, student, mask, reduction);
  b.hard = hard_loss(student, labels, mask, reduction);
  b.combined = lambda * b.soft + (1.0 - lambda) * b.hard;
  return b;
}

// ---- logits interchange file -------------------------------------------------

namespace {
constexpr char kMagic[4] = {'K', 'D', 'L', 'G'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF32 = 0;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("truncated logits file: " + path);
  return v;
}
}  // namespace

void write_logits_file(const std::string& path, const LogitsMatrix& logits) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write logits file: " + path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(logits.vocab));
  write_pod(out, static_cast<std::uint32_t>(logits.positions));
  write_pod(out, kDtypeF32);
  std::vector<float> rowf(logits.vocab);
  for (std::size_t t = 0; t < logits.positions; ++t) {
    const double* r = logits.row(t);
    for (std::size_t v = 0; v < logits.vocab; ++v) rowf[v] = static_cast<float>(r[v]);
    out.write(reinterpret_cast<const char*>(rowf.data()),
              static_cast<std::streamsize>(sizeof(float) * rowf.size()));
  }
  if (!out) throw IoError("short write on logits file: " + path);
}

LogitsMatrix read_logits_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open logits file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a logits file (bad magic): " + path);
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion)
    throw IoError("unsupported logits file version " + std::to_string(version) + ": " + path);
  const auto vocab = read_pod<std::uint32_t>(in, path);
  const auto positions = read_pod<std::uint32_t>(in, path);
  const auto dtype = read_pod<std::uint32_t>(in, path);
  if (dtype != kDtypeF32)
    throw IoError("unsupported logits dtype " + std::to_string(dtype) + ": " + path);
  if (vocab < 2) throw IoError("logits file vocabulary must be >= 2: " + path);

  LogitsMatrix m(positions, vocab);
  std::vector<float> rowf(vocab);
  for (std::size_t t = 0; t < positions; ++t) {
    in.read(reinterpret_cast<char*>(rowf.data()),
            static_cast<std::streamsize>(sizeof(float) * rowf.size()));
    if (!in) throw IoError("truncated logits file: " + path);
    double* r = m.row(t);
    for (std::size_t v = 0; v < vocab; ++v) r[v] = static_cast<double>(rowf[v]);
  }
  return m;
}

}  // namespace cotkd::kdloss
