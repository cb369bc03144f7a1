#ifndef COTKD_SUPERVISION_HPP
#define COTKD_SUPERVISION_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cotkd/corpus.hpp"
#include "cotkd/error.hpp"

namespace cotkd::supervision {

// Which sections contribute label positions to the loss.
enum class SupervisionRegime { A, P_A, COT, COT_A, P_COT, P_COT_A };

SupervisionRegime regime_from_string(const std::string& s);  // "a", "p+a", "cot", ...
std::string to_string(SupervisionRegime regime);
const std::vector<SupervisionRegime>& all_regimes();

// One bit per label position (T-1 labels for a length-T sequence). Bit t
// refers to the token being predicted at that position, i.e. token t+1.
struct SupervisionMask {
  std::vector<std::uint8_t> bits;
  std::size_t n_supervised() const;
};

struct TruncationPolicy {
  enum class Kind { None, LSP, LeftHalf, RightHalf };
  Kind kind = Kind::None;
  double p = 1.0;  // meaningful for LSP only, in (0,1]

  static TruncationPolicy none() { return {Kind::None, 1.0}; }
  static TruncationPolicy lsp(double p);
  static TruncationPolicy left_half() { return {Kind::LeftHalf, 0.5}; }
  static TruncationPolicy right_half() { return {Kind::RightHalf, 0.5}; }

  // "none", "lsp:0.5", "left", "right"
  static TruncationPolicy from_string(const std::string& s);
  std::string to_string() const;
};

struct TruncatedExample {
  std::vector<int> token_ids;   // kept contiguous subsequence
  corpus::Span kept_range;      // in original coordinates
  std::size_t origin_length = 0;
};

// True at label position t iff token t+1 lies in a section named by the
// regime. The full sequence still flows through the forward pass; masking
// only silences loss terms.
SupervisionMask build_mask(const corpus::SegmentedExample& example,
                           SupervisionRegime regime);

// LSP(p) keeps tokens [0, ceil(p*T)); LeftHalf keeps [0, ceil(T/2));
// RightHalf keeps [ceil(T/2), T); None keeps everything. Dropped tokens
// never enter the forward pass.
TruncatedExample truncate(const std::vector<int>& token_ids, TruncationPolicy policy);

// Truncation first, then the regime mask over surviving label positions with
// section spans clipped to the kept range. A section that is only partially
// cut still supervises its surviving tokens; a regime whose sections are
// entirely cut is degenerate.
std::pair<TruncatedExample, SupervisionMask> compose(const corpus::SegmentedExample& example,
                                                     TruncationPolicy policy,
                                                     SupervisionRegime regime);

// Audit dump: one {"bits":[0,1,...]} object per line.
void write_masks_jsonl(const std::string& path, const std::vector<SupervisionMask>& masks);

}  // namespace cotkd::supervision

#endif  // COTKD_SUPERVISION_HPP
