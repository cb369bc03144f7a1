#ifndef COTKD_CORPUS_HPP
#define COTKD_CORPUS_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cotkd/error.hpp"
#include "cotkd/tokenizer.hpp"

namespace cotkd::corpus {

struct Message {
  std::string role;  // "system", "user" or "assistant"
  std::string content;
};

struct RawRecord {
  std::vector<Message> messages;
};

// Half-open token range [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - start; }
  bool operator==(const Span&) const = default;
};

struct SegmentedExample {
  std::vector<int> token_ids;
  std::string text;
  Span prompt_span;
  Span cot_span;
  Span answer_span;
  std::size_t length() const { return token_ids.size(); }
};

// Role scaffolding used when flattening a dialogue into one string.
struct ChatTemplate {
  std::string turn_prefix = "<|im_start|>";
  std::string role_suffix = "\n";
  std::string turn_suffix = "<|im_end|>\n";

  // A minimal template ("u:" ... "\n") for compact desk-scale corpora.
  static ChatTemplate minimal();
};

struct SectionStat {
  double mean_tokens = 0.0;
  double share = 0.0;  // mean section length / mean full length
  std::size_t examples = 0;
};

struct SectionStats {
  SectionStat full;
  SectionStat prompt;
  SectionStat cot;
  SectionStat answer;
};

struct SyntheticCorpusConfig {
  std::size_t n_examples = 0;
  std::uint64_t vocab_seed = 1;      // seeds the word inventory / grammar
  std::size_t mean_prompt_tokens = 80;
  std::size_t mean_cot_tokens = 240;
  std::size_t mean_answer_tokens = 40;
  double derivation_position = 0.5;  // fraction of the CoT, in (0,1)
  std::size_t n_reflections = 2;
  std::uint64_t seed = 1;            // per-corpus sampling seed
  ChatTemplate chat_template{};
};

// Ground truth recorded while generating one synthetic example, so tests can
// check the locating ops against what was actually planted.
struct SyntheticExampleInfo {
  std::string derivation;       // substring whose first occurrence derives the answer
  double planted_position = 0;  // exact relative CoT token position of that substring
  std::string answer_word;
  std::size_t reflections = 0;
};

struct SyntheticCorpus {
  std::vector<SegmentedExample> examples;
  std::vector<SyntheticExampleInfo> info;
  std::vector<RawRecord> raw;  // the dialogues the examples were segmented from
};

// ---- operations ------------------------------------------------------------

// Flattens a dialogue into one training string. System messages are dropped;
// user/assistant turns keep their order and get the template scaffolding.
std::string linearize(const RawRecord& record, const ChatTemplate& tmpl);

// Rewrites alternate reasoning-tag literals to the canonical pair. Pure text
// rewrite: no validation, never throws, idempotent.
std::string normalize_tags(std::string text);

// Tokenizes and splits into prompt / CoT / answer spans. The single
// "<think>"/"</think>" pair frames the CoT (delimiters included); everything
// before belongs to the prompt, everything after to the answer.
SegmentedExample segment(const std::string& text, const Tokenizer& tokenizer);

// Keeps examples with strictly fewer than max_tokens tokens, order preserved.
std::vector<SegmentedExample> filter_by_length(const std::vector<SegmentedExample>& corpus,
                                               std::size_t max_tokens);

// Seeded shuffle, then the first n_valid shuffled examples become the
// validation set and the rest (in shuffled order) the training set.
std::pair<std::vector<SegmentedExample>, std::vector<SegmentedExample>>
split_train_valid(const std::vector<SegmentedExample>& corpus, std::size_t n_valid,
                  std::uint64_t seed);

SectionStats section_stats(const std::vector<SegmentedExample>& corpus);

// Desk-scale corpus with a controlled internal structure: the CoT restates
// the prompt, emits reflection cues, derives the answer at a planted relative
// position, then pads with verification that restates the final answer; the
// answer section repeats it. Uses the byte-level tokenizer.
SyntheticCorpus generate_synthetic_corpus_detailed(const SyntheticCorpusConfig& config);
std::vector<SegmentedExample> generate_synthetic_corpus(const SyntheticCorpusConfig& config);

// Index of the token whose decoded byte range contains char_offset.
std::size_t char_to_token(std::string_view text, const Tokenizer& tokenizer,
                          std::size_t char_offset);

// ---- file formats ----------------------------------------------------------

// One {"messages":[{"role":..,"content":..},...]} object per line.
std::vector<RawRecord> read_raw_jsonl(const std::string& path);
void write_raw_jsonl(const std::string& path, const std::vector<RawRecord>& records);

// One {"text":..,"token_ids":[..],"spans":{"prompt":{"start":..,"end":..},..}}
// object per line.
std::vector<SegmentedExample> read_segmented_jsonl(const std::string& path);
void write_segmented_jsonl(const std::string& path,
                           const std::vector<SegmentedExample>& corpus);

std::string stats_to_json(const SectionStats& stats);

}  // namespace cotkd::corpus

#endif  // COTKD_CORPUS_HPP
