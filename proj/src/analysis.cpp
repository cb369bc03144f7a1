#include "cotkd/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace cotkd::analysis {

namespace {
using nlohmann::json;
}

const std::vector<std::string>& self_reflection_cues() {
  // longest-first so longest-match-per-position is a linear scan
  static const std::vector<std::string> cues = {
      "go over the steps", "reevaluation", "verify again", "double-check",
      "check again",       "think again",  "re-evaluate",  "reconsider",
      "reevaluate",        "re-examine",   "reanalyze",    "reexamine",
      "reassess",          "recheck",      "rethink",      "wait"};
  return cues;
}

KneeResult find_knee(const std::vector<double>& xs, const std::vector<double>& ys,
                     double threshold) {
  if (xs.size() != ys.size())
    throw LengthMismatch("got " + std::to_string(xs.size()) + " x values and " +
                         std::to_string(ys.size()) + " y values");
  if (xs.size() < 3)
    throw TooFewPoints("knee detection needs at least 3 points, got " +
                       std::to_string(xs.size()));
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1])) throw ConfigError("x values must be strictly increasing");

  const std::size_t n = xs.size();
  const double x_lo = xs.front(), x_range = xs.back() - xs.front();
  const auto [y_min_it, y_max_it] = std::minmax_element(ys.begin(), ys.end());
  const double y_lo = *y_min_it, y_range = *y_max_it - y_lo;

  KneeResult r;
  r.difference_curve.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double xn = (xs[i] - x_lo) / x_range;
    const double yn = y_range > 0.0 ? (ys[i] - y_lo) / y_range : 0.0;
    r.difference_curve[i] = yn - xn;
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (r.difference_curve[i] > r.difference_curve[best]) best = i;

  // Curves that are affinely equal to the x axis normalize to a difference
  // curve that is zero up to rounding; a maximum at that scale is noise, not
  // curvature, so it never counts as a knee.
  constexpr double kNoiseFloor = 1e-9;
  if (best > 0 && best + 1 < n &&
      r.difference_curve[best] > std::max(threshold, kNoiseFloor)) {
    r.found = true;
    r.knee_x = xs[best];
  }
  return r;
}

double retention_ratio(double metric_half, double metric_full) {
  if (!(metric_full > 0.0))
    throw NonpositiveDenominator("full-budget metric must be positive, got " +
                                 std::to_string(metric_full));
  return metric_half / metric_full;
}

double relative_improvement(double candidate, double baseline) {
  if (!(baseline > 0.0))
    throw NonpositiveBaseline("baseline must be positive, got " + std::to_string(baseline));
  return (candidate - baseline) / baseline * 100.0;
}

double full_sequence_position(double share_prompt, double share_cot, double pos_in_cot) {
  return share_prompt + pos_in_cot * share_cot;
}

double locate_derivation(const corpus::SegmentedExample& example, const std::string& substring,
                         const Tokenizer& tokenizer) {
  if (substring.empty()) throw SubstringNotFound("empty substring");
  std::vector<int> cot_ids(example.token_ids.begin() +
                               static_cast<std::ptrdiff_t>(example.cot_span.start),
                           example.token_ids.begin() +
                               static_cast<std::ptrdiff_t>(example.cot_span.end));
  const std::string cot_text = tokenizer.decode(cot_ids);
  const std::size_t at = cot_text.find(substring);  // first occurrence rule
  if (at == std::string::npos)
    throw SubstringNotFound("substring does not occur in the CoT text");
  const std::size_t tok = corpus::char_to_token(cot_text, tokenizer, at);
  return static_cast<double>(tok) / static_cast<double>(example.cot_span.size());
}

std::size_t count_self_reflection(std::string_view cot_text, std::size_t cutoff_char_offset) {
  const std::size_t cutoff = std::min(cutoff_char_offset, cot_text.size());
  std::string lower(cot_text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  const auto& cues = self_reflection_cues();
  std::size_t count = 0;
  std::size_t i = 0;
  while (i < cutoff) {
    std::size_t matched = 0;
    for (const auto& cue : cues) {  // longest first
      if (lower.compare(i, cue.size(), cue) == 0) {
        matched = cue.size();
        break;
      }
    }
    if (matched) {
      ++count;
      i += matched;
    } else {
      ++i;
    }
  }
  return count;
}

// ---- judge plumbing -----------------------------------------------------------

const std::string& judge_instruction() {
  static const std::string text =
      "You are given a question, a reasoning trace (t1), and a final response (t2). "
      "Judge the following: (1) is the question fully covered by t1; (2) is t2 fully "
      "covered by t1; (3) is the final answer of t2 already considered final within t1. "
      "Also extract the earliest verbatim substring of t1 where the final answer is "
      "first derived (empty string if it never is). Respond with only valid JSON "
      "containing exactly four keys: is_question_fully_covered_by_t1 (boolean), "
      "is_t2_fully_covered_by_t1 (boolean), is_t2_final_answer_considered_final_in_t1 "
      "(boolean), first_derivation (string, copied verbatim from t1).";
  return text;
}

StubJudge::StubJudge(std::vector<std::string> responses) : responses_(std::move(responses)) {
  if (responses_.empty()) throw ConfigError("stub judge needs at least one canned response");
}

StubJudge StubJudge::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open stub verdicts file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("stub verdicts file is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_array()) throw ConfigError("stub verdicts file must hold a JSON array");
  std::vector<std::string> responses;
  for (const auto& e : j)
    responses.push_back(e.is_string() ? e.get<std::string>() : e.dump());
  return StubJudge(std::move(responses));
}

std::string StubJudge::complete(const JudgeRequest&) {
  return responses_[calls_++ % responses_.size()];
}

HttpJudge::HttpJudge(std::string url, std::string token)
    : url_(std::move(url)), token_(std::move(token)) {
  if (url_.empty()) throw ConfigError("judge endpoint URL is empty");
}

HttpJudge HttpJudge::from_environment() {
  const char* url = std::getenv("COTKD_JUDGE_URL");
  const char* token = std::getenv("COTKD_JUDGE_TOKEN");
  if (!url || !*url)
    throw ConfigError("COTKD_JUDGE_URL is not set; use the stub judge for offline runs");
  return HttpJudge(url, token ? token : "");
}

std::string HttpJudge::complete(const JudgeRequest& request) {
  // split scheme://host[:port]/path
  std::string rest = url_;
  const auto scheme_end = rest.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("judge URL must start with http:// or https://: " + url_);
  const std::string base = rest.substr(0, scheme_end + 3);
  rest = rest.substr(scheme_end + 3);
  const auto slash = rest.find('/');
  const std::string host = slash == std::string::npos ? rest : rest.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : rest.substr(slash);

  httplib::Client client((base + host).c_str());
  client.set_connection_timeout(30);
  client.set_read_timeout(120);
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

  const json body{{"instruction", request.instruction},
                  {"question", request.question},
                  {"t1", request.t1},
                  {"t2", request.t2}};
  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res)
    throw JudgeProtocolError("judge endpoint unreachable: " + url_);
  if (res->status != 200)
    throw JudgeProtocolError("judge endpoint returned HTTP " + std::to_string(res->status));
  return res->body;
}

AuditVerdict parse_verdict(const std::string& raw_response, const std::string& cot_text) {
  json j;
  try {
    j = json::parse(raw_response);
  } catch (const json::exception& e) {
    throw JudgeProtocolError("judge response is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw JudgeProtocolError("judge response must be a JSON object");

  static const char* kBoolKeys[] = {"is_question_fully_covered_by_t1",
                                    "is_t2_fully_covered_by_t1",
                                    "is_t2_final_answer_considered_final_in_t1"};
  if (j.size() != 4)
    throw JudgeProtocolError("judge response must have exactly four keys, got " +
                             std::to_string(j.size()));
  for (const char* k : kBoolKeys) {
    if (!j.contains(k) || !j[k].is_boolean())
      throw JudgeProtocolError(std::string("judge response needs boolean key '") + k + "'");
  }
  if (!j.contains("first_derivation") || !j["first_derivation"].is_string())
    throw JudgeProtocolError("judge response needs string key 'first_derivation'");

  AuditVerdict v;
  v.prompt_covered = j["is_question_fully_covered_by_t1"].get<bool>();
  v.answer_covered = j["is_t2_fully_covered_by_t1"].get<bool>();
  v.final_answer_match = j["is_t2_final_answer_considered_final_in_t1"].get<bool>();
  v.first_derivation = j["first_derivation"].get<std::string>();
  if (!v.first_derivation.empty() &&
      cot_text.find(v.first_derivation) == std::string::npos) {
    throw JudgeProtocolError("first_derivation is not a verbatim substring of t1");
  }
  return v;
}

AuditReport run_audit(const std::vector<std::string>& texts, const Tokenizer& tokenizer,
                      JudgeTransport& judge) {
  if (texts.empty()) throw EmptyCorpus("audit needs at least one example");
  AuditReport report;
  report.sample_size = texts.size();

  std::size_t prompt_yes = 0, answer_yes = 0, final_yes = 0;
  double pos_cot_sum = 0.0, pos_full_sum = 0.0, refl_sum = 0.0;

  for (const auto& text : texts) {
    corpus::SegmentedExample ex;
    try {
      ex = corpus::segment(text, tokenizer);
    } catch (const MalformedThinkTags&) {
      ++report.malformed;  // counts as not-covered on every column
      continue;
    }

    auto section_text = [&](const corpus::Span& s) {
      std::vector<int> ids(ex.token_ids.begin() + static_cast<std::ptrdiff_t>(s.start),
                           ex.token_ids.begin() + static_cast<std::ptrdiff_t>(s.end));
      return tokenizer.decode(ids);
    };
    const std::string question = section_text(ex.prompt_span);
    const std::string cot = section_text(ex.cot_span);
    const std::string answer = section_text(ex.answer_span);

    const std::string raw =
        judge.complete({judge_instruction(), question, cot, answer});
    const AuditVerdict v = parse_verdict(raw, cot);

    prompt_yes += v.prompt_covered ? 1 : 0;
    answer_yes += v.answer_covered ? 1 : 0;
    final_yes += v.final_answer_match ? 1 : 0;

    if (!v.first_derivation.empty()) {
      const double pos = locate_derivation(ex, v.first_derivation, tokenizer);
      const auto T = static_cast<double>(ex.length());
      const double share_p = static_cast<double>(ex.prompt_span.size()) / T;
      const double share_c = static_cast<double>(ex.cot_span.size()) / T;
      pos_cot_sum += pos;
      pos_full_sum += full_sequence_position(share_p, share_c, pos);
      refl_sum += static_cast<double>(
          count_self_reflection(cot, cot.find(v.first_derivation)));
      ++report.located;
    }
  }

  const auto n = static_cast<double>(report.sample_size);
  report.pct_prompt_covered = 100.0 * static_cast<double>(prompt_yes) / n;
  report.pct_answer_covered = 100.0 * static_cast<double>(answer_yes) / n;
  report.pct_final_answer_match = 100.0 * static_cast<double>(final_yes) / n;
  if (report.located > 0) {
    const auto m = static_cast<double>(report.located);
    report.mean_position_in_cot = pos_cot_sum / m;
    report.mean_position_in_full = pos_full_sum / m;
    report.mean_self_reflections = refl_sum / m;
  }
  return report;
}

std::string audit_report_to_json(const AuditReport& report) {
  json j{{"pct_prompt_covered", report.pct_prompt_covered},
         {"pct_answer_covered", report.pct_answer_covered},
         {"pct_final_answer_match", report.pct_final_answer_match},
         {"mean_position_in_cot", report.mean_position_in_cot},
         {"mean_position_in_full", report.mean_position_in_full},
         {"mean_self_reflections", report.mean_self_reflections},
         {"sample_size", report.sample_size},
         {"malformed", report.malformed},
         {"located", report.located}};
  return j.dump(2);
}

}  // namespace cotkd::analysis
