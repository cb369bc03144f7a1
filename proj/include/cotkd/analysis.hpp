#ifndef COTKD_ANALYSIS_HPP
#define COTKD_ANALYSIS_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cotkd/corpus.hpp"
#include "cotkd/error.hpp"
#include "cotkd/tokenizer.hpp"

namespace cotkd::analysis {

// The fixed 16-entry self-reflection cue list, longest entries first.
const std::vector<std::string>& self_reflection_cues();

struct KneeResult {
  double knee_x = 0.0;                  // one of the input xs when found
  std::vector<double> difference_curve; // normalized y minus normalized x
  bool found = false;
};

// Kneedle, basic unsmoothed form: min-max normalize both axes, take the
// difference curve d = y_norm - x_norm, and report the x of its maximum when
// that maximum is interior and above the threshold.
KneeResult find_knee(const std::vector<double>& xs, const std::vector<double>& ys,
                     double threshold = 0.0);

// metric at the half budget divided by metric at the full budget.
double retention_ratio(double metric_half, double metric_full);

// (candidate - baseline) / baseline * 100.
double relative_improvement(double candidate, double baseline);

// share_prompt + pos_in_cot * share_cot: a CoT-relative position mapped onto
// the whole sequence.
double full_sequence_position(double share_prompt, double share_cot, double pos_in_cot);

// Relative token position (fraction of the CoT span) of the first character
// occurrence of substring within the example's CoT text.
double locate_derivation(const corpus::SegmentedExample& example, const std::string& substring,
                         const Tokenizer& tokenizer);

// Case-insensitive count of cue occurrences starting strictly before the
// cutoff, longest-match-per-position, scanning past each match.
std::size_t count_self_reflection(std::string_view cot_text, std::size_t cutoff_char_offset);

// ---- entailment audit --------------------------------------------------------

struct JudgeRequest {
  std::string instruction;
  std::string question;
  std::string t1;  // reasoning trace
  std::string t2;  // final response
};

// The instruction sent with every audit request; demands a JSON object with
// exactly four keys.
const std::string& judge_instruction();

class JudgeTransport {
public:
  virtual ~JudgeTransport() = default;
  // Returns the judge's raw text response for one request.
  virtual std::string complete(const JudgeRequest& request) = 0;
};

// Offline transport replaying canned raw responses in order (cycling).
class StubJudge : public JudgeTransport {
public:
  explicit StubJudge(std::vector<std::string> responses);
  // File form: a JSON array whose elements are either raw response strings
  // or verdict objects (serialized as the response).
  static StubJudge from_file(const std::string& path);
  std::string complete(const JudgeRequest& request) override;
  std::size_t calls() const { return calls_; }

private:
  std::vector<std::string> responses_;
  std::size_t calls_ = 0;
};

// POSTs {instruction, question, t1, t2} as JSON to the endpoint given by the
// COTKD_JUDGE_URL environment variable, with an optional bearer token from
// COTKD_JUDGE_TOKEN; the response body is the raw judge text.
class HttpJudge : public JudgeTransport {
public:
  HttpJudge(std::string url, std::string token);
  static HttpJudge from_environment();
  std::string complete(const JudgeRequest& request) override;

private:
  std::string url_;
  std::string token_;
};

struct AuditVerdict {
  bool prompt_covered = false;
  bool answer_covered = false;
  bool final_answer_match = false;
  std::string first_derivation;  // verbatim substring of t1; may be empty
};

// Strict parse of a judge response: valid JSON object, exactly the four
// expected keys with the right types, and a first_derivation that occurs
// verbatim in cot_text when nonempty. Anything else: JudgeProtocolError.
AuditVerdict parse_verdict(const std::string& raw_response, const std::string& cot_text);

struct AuditReport {
  double pct_prompt_covered = 0.0;  // percentages over the full sample
  double pct_answer_covered = 0.0;
  double pct_final_answer_match = 0.0;
  double mean_position_in_cot = 0.0;   // over judged examples with a derivation
  double mean_position_in_full = 0.0;
  double mean_self_reflections = 0.0;
  std::size_t sample_size = 0;
  std::size_t malformed = 0;  // counted as not-covered, never sent to the judge
  std::size_t located = 0;    // examples contributing to the position/cue means
};

// Audits normalized linearized texts: segments each, sends question/CoT/
// answer to the judge, validates verdicts, and aggregates. Texts that fail
// tag validation count as not-covered on all three columns.
AuditReport run_audit(const std::vector<std::string>& texts, const Tokenizer& tokenizer,
                      JudgeTransport& judge);

std::string audit_report_to_json(const AuditReport& report);

}  // namespace cotkd::analysis

#endif  // COTKD_ANALYSIS_HPP
