#include "cotkd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cotkd/analysis.hpp"
#include "cotkd/rng.hpp"

namespace cotkd::corpus {

namespace {
using nlohmann::json;
}

ChatTemplate ChatTemplate::minimal() {
  ChatTemplate t;
  t.turn_prefix = "[";
  t.role_suffix = "]";
  t.turn_suffix = "\n";
  return t;
}

std::string linearize(const RawRecord& record, const ChatTemplate& tmpl) {
  bool has_user = false, has_assistant = false;
  std::string out;
  for (const auto& m : record.messages) {
    if (m.role == "system") continue;  // system turns carry no training signal here
    if (m.role == "user") {
      has_user = true;
    } else if (m.role == "assistant") {
      has_assistant = true;
    } else {
      throw ConfigError("unknown message role '" + m.role + "'");
    }
    out += tmpl.turn_prefix;
    out += m.role;
    out += tmpl.role_suffix;
    out += m.content;
    out += tmpl.turn_suffix;
  }
  if (!has_user || !has_assistant)
    throw EmptyDialogue("record needs at least one user and one assistant message");
  return out;
}

std::string normalize_tags(std::string text) {
  auto replace_all = [](std::string& s, std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
      s.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all(text, "<begin_of_thought>", "<think>");
  replace_all(text, "<end_of_thought>", "</think>");
  return text;
}

SegmentedExample segment(const std::string& text, const Tokenizer& tokenizer) {
  const int open_id = tokenizer.special_id("<think>");
  const int close_id = tokenizer.special_id("</think>");
  if (open_id < 0 || close_id < 0)
    throw InvalidTokenizerSpec("tokenizer lacks the <think>/</think> special tokens");

  SegmentedExample ex;
  ex.text = text;
  ex.token_ids = tokenizer.encode(text);

  std::size_t n_open = 0, n_close = 0;
  std::size_t open_pos = 0, close_pos = 0;
  for (std::size_t i = 0; i < ex.token_ids.size(); ++i) {
    if (ex.token_ids[i] == open_id) {
      ++n_open;
      open_pos = i;
    } else if (ex.token_ids[i] == close_id) {
      ++n_close;
      close_pos = i;
    }
  }
  if (n_open != 1 || n_close != 1 || close_pos < open_pos) {
    throw MalformedThinkTags("expected exactly one ordered <think>/</think> pair, found " +
                             std::to_string(n_open) + " open / " + std::to_string(n_close) +
                             " close");
  }

  const std::size_t T = ex.token_ids.size();
  ex.prompt_span = {0, open_pos};
  ex.cot_span = {open_pos, close_pos + 1};  // delimiters belong to the CoT
  ex.answer_span = {close_pos + 1, T};
  return ex;
}

std::vector<SegmentedExample> filter_by_length(const std::vector<SegmentedExample>& corpus,
                                               std::size_t max_tokens) {
  if (max_tokens == 0) throw ConfigError("max_tokens must be positive");
  std::vector<SegmentedExample> out;
  for (const auto& ex : corpus)
    if (ex.length() < max_tokens) out.push_back(ex);
  return out;
}

std::pair<std::vector<SegmentedExample>, std::vector<SegmentedExample>>
split_train_valid(const std::vector<SegmentedExample>& corpus, std::size_t n_valid,
                  std::uint64_t seed) {
  if (n_valid >= corpus.size()) {
    throw InsufficientExamples("need n_valid < corpus size, got " + std::to_string(n_valid) +
                               " of " + std::to_string(corpus.size()));
  }
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);

  std::vector<SegmentedExample> valid, train;
  valid.reserve(n_valid);
  train.reserve(corpus.size() - n_valid);
  for (std::size_t i = 0; i < idx.size(); ++i)
    (i < n_valid ? valid : train).push_back(corpus[idx[i]]);
  return {std::move(train), std::move(valid)};
}

SectionStats section_stats(const std::vector<SegmentedExample>& corpus) {
  if (corpus.empty()) throw EmptyCorpus("section stats need at least one example");
  double sum_full = 0, sum_p = 0, sum_c = 0, sum_a = 0;
  for (const auto& ex : corpus) {
    sum_full += static_cast<double>(ex.length());
    sum_p += static_cast<double>(ex.prompt_span.size());
    sum_c += static_cast<double>(ex.cot_span.size());
    sum_a += static_cast<double>(ex.answer_span.size());
  }
  const auto n = static_cast<double>(corpus.size());
  SectionStats s;
  s.full = {sum_full / n, 1.0, corpus.size()};
  // shares are ratios of means, so P+CoT+A is exactly 1 (spans partition)
  s.prompt = {sum_p / n, sum_p / sum_full, corpus.size()};
  s.cot = {sum_c / n, sum_c / sum_full, corpus.size()};
  s.answer = {sum_a / n, sum_a / sum_full, corpus.size()};
  return s;
}

std::size_t char_to_token(std::string_view text, const Tokenizer& tokenizer,
                          std::size_t char_offset) {
  if (char_offset >= text.size()) {
    throw OffsetOutOfRange("offset " + std::to_string(char_offset) + " not in [0, " +
                           std::to_string(text.size()) + ")");
  }
  std::vector<std::size_t> offsets;
  tokenizer.encode_with_offsets(text, &offsets);
  // offsets is ascending; token i covers [offsets[i], offsets[i+1])
  auto it = std::upper_bound(offsets.begin(), offsets.end(), char_offset);
  return static_cast<std::size_t>(std::distance(offsets.begin(), it)) - 1;
}

// ---- synthetic corpus -------------------------------------------------------

namespace {

// Appends filler so s reaches exactly target characters ("m", " m", " hm",
// " hmm", ...). Requires s.size() <= target.
void pad_exact(std::string& s, std::size_t target) {
  const std::size_t r = target - s.size();
  if (r == 0) return;
  if (r == 1) {
    s += "m";
  } else if (r == 2) {
    s += " m";
  } else {
    s += " h";
    s += std::string(r - 2, 'm');
  }
}

bool contains_any(const std::string& w, const std::vector<std::string>& banned) {
  for (const auto& b : banned)
    if (w.find(b) != std::string::npos) return true;
  return false;
}

// Random lowercase words that cannot collide with reflection cues, scaffold
// literals, or the derivation marker, even across word boundaries.
std::vector<std::string> build_inventory(std::uint64_t vocab_seed, std::size_t n) {
  static const std::vector<std::string> banned = {
      "wait", "check", "think", "again", "step",     "examin",
      "over", "assess", "consider", "evaluat", "analyz", "thus"};
  std::vector<std::string> words;
  Rng rng(vocab_seed);
  while (words.size() < n) {
    const std::size_t len = 3 + static_cast<std::size_t>(rng.below(4));
    std::string w;
    for (std::size_t i = 0; i < len; ++i)
      w += static_cast<char>('a' + rng.below(26));
    if (contains_any(w, banned)) continue;
    if (std::find(words.begin(), words.end(), w) != words.end()) continue;
    words.push_back(std::move(w));
  }
  return words;
}

std::size_t jitter(Rng& rng, std::size_t mean, std::size_t floor_value) {
  const double v = static_cast<double>(mean) * (0.8 + 0.4 * rng.uniform());
  const auto r = static_cast<std::size_t>(std::llround(v));
  return std::max(r, floor_value);
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus_detailed(const SyntheticCorpusConfig& config) {
  if (!(config.derivation_position > 0.0 && config.derivation_position < 1.0))
    throw ConfigError("derivation_position must lie strictly inside (0,1)");
  if (config.mean_prompt_tokens == 0 || config.mean_cot_tokens == 0 ||
      config.mean_answer_tokens == 0)
    throw ConfigError("target mean section lengths must be positive");

  constexpr std::size_t kWords = 48;
  const std::vector<std::string> words = build_inventory(config.vocab_seed, kWords);
  const std::vector<std::string>& cues = analysis::self_reflection_cues();

  // Fixed word -> answer-word mapping; part of the grammar, so it depends on
  // the vocab seed only and is shared by corpora drawn with different seeds.
  std::vector<std::size_t> partner(kWords);
  std::iota(partner.begin(), partner.end(), std::size_t{0});
  {
    Rng grammar_rng(config.vocab_seed ^ 0x9e3779b97f4a7c15ull);
    grammar_rng.shuffle(partner);
  }

  const Tokenizer tok = Tokenizer::byte_level();
  const ChatTemplate& tmpl = config.chat_template;
  const std::size_t scaffold_len = tmpl.turn_prefix.size() * 2 + tmpl.role_suffix.size() * 2 +
                                   tmpl.turn_suffix.size() + 4 /*user*/ + 9 /*assistant*/;

  Rng rng(config.seed);
  SyntheticCorpus out;
  out.examples.reserve(config.n_examples);
  out.info.reserve(config.n_examples);
  out.raw.reserve(config.n_examples);

  for (std::size_t e = 0; e < config.n_examples; ++e) {
    const std::size_t i1 = static_cast<std::size_t>(rng.below(kWords));
    std::size_t i2 = static_cast<std::size_t>(rng.below(kWords - 1));
    if (i2 >= i1) ++i2;
    const std::string& w1 = words[i1];
    const std::string& w2 = words[i2];
    const std::string& ans = words[partner[i1]];

    // prompt: the question, padded toward the target mean
    std::string q = "find the pair of " + w1 + " and " + w2 + " .";
    {
      const std::size_t target = jitter(rng, config.mean_prompt_tokens, 1);
      while (scaffold_len + q.size() + 14 <= target) {
        const std::string& w = words[rng.below(kWords)];
        if (scaffold_len + q.size() + 8 + w.size() > target) break;
        q += " note " + w + " .";
      }
    }

    // CoT body: restate, reflect, derive at the planted position, verify
    const std::string restate = "the question asks for the pair of " + w1 + " and " + w2 + " .";
    std::string refl;
    for (std::size_t r = 0; r < config.n_reflections; ++r) {
      refl += " " + cues[rng.below(cues.size())] + " , see " + words[rng.below(kWords)] + " .";
    }
    const std::string deriv = "thus the pair of " + w1 + " and " + w2 + " is " + ans;
    const std::string deriv_sent = deriv + " .";
    const std::string tail = " the answer is " + ans + " .";

    const std::size_t min_pre = restate.size() + refl.size();
    const std::size_t min_body = min_pre + deriv_sent.size() + tail.size();
    std::size_t body_len = jitter(rng, config.mean_cot_tokens >= 2 ? config.mean_cot_tokens - 2 : 1,
                                  min_body);
    if (body_len < min_body) body_len = min_body;

    // want token index 1+d of body offset d to sit at the requested fraction
    // of the L+2 CoT tokens (the two delimiter tokens included)
    auto d = static_cast<std::size_t>(std::llround(
        config.derivation_position * static_cast<double>(body_len + 2) - 1.0));
    d = std::clamp(d, min_pre, body_len - deriv_sent.size() - tail.size());

    std::string pre = restate + refl;
    while (pre.size() + 15 <= d) {
      const std::string& w = words[rng.below(kWords)];
      if (pre.size() + 12 + w.size() > d) break;
      pre += " consider " + w + " .";
    }
    pad_exact(pre, d);

    const std::size_t post_budget = body_len - d - deriv_sent.size() - tail.size();
    std::string post;
    while (post.size() + 19 + ans.size() <= post_budget)
      post += " and the pair is " + ans + " .";
    pad_exact(post, post_budget);

    const std::string body = pre + deriv_sent + post + tail;

    // answer section restates the CoT's final answer
    std::string a = " the answer is " + ans + " .";
    {
      const std::size_t target = jitter(rng, config.mean_answer_tokens, 1);
      const std::size_t after = tmpl.turn_suffix.size();
      while (a.size() + after + 9 + ans.size() <= target) a += " it is " + ans + " .";
    }

    RawRecord rec;
    rec.messages.push_back({"user", q});
    rec.messages.push_back({"assistant", "<think>" + body + "</think>" + a});
    out.examples.push_back(segment(linearize(rec, tmpl), tok));
    out.raw.push_back(rec);

    SyntheticExampleInfo info;
    info.derivation = deriv;
    info.planted_position =
        (1.0 + static_cast<double>(d)) / (static_cast<double>(body.size()) + 2.0);
    info.answer_word = ans;
    info.reflections = config.n_reflections;
    out.info.push_back(std::move(info));
  }
  return out;
}

std::vector<SegmentedExample> generate_synthetic_corpus(const SyntheticCorpusConfig& config) {
  return generate_synthetic_corpus_detailed(config).examples;
}

// ---- file formats -----------------------------------------------------------

std::vector<RawRecord> read_raw_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::vector<RawRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("messages") || !j["messages"].is_array())
      throw ConfigError("line " + std::to_string(lineno) + ": expected a 'messages' array");
    RawRecord rec;
    for (const auto& m : j["messages"]) {
      if (!m.is_object() || !m.contains("role") || !m["role"].is_string() ||
          !m.contains("content") || !m["content"].is_string())
        throw ConfigError("line " + std::to_string(lineno) +
                          ": messages need string 'role' and 'content'");
      const std::string role = m["role"].get<std::string>();
      if (role != "system" && role != "user" && role != "assistant")
        throw ConfigError("line " + std::to_string(lineno) + ": unknown role '" + role + "'");
      rec.messages.push_back({role, m["content"].get<std::string>()});
    }
    out.push_back(std::move(rec));
  }
  return out;
}

void write_raw_jsonl(const std::string& path, const std::vector<RawRecord>& records) {
  std::ofstream outf(path, std::ios::binary | std::ios::trunc);
  if (!outf) throw IoError("cannot write corpus file: " + path);
  for (const auto& rec : records) {
    json msgs = json::array();
    for (const auto& m : rec.messages)
      msgs.push_back({{"role", m.role}, {"content", m.content}});
    outf << json{{"messages", msgs}}.dump() << "\n";
  }
}

namespace {
json span_to_json(const Span& s) {
  return {{"start", s.start}, {"end", s.end}};
}
Span span_from_json(const json& j) {
  if (!j.is_object() || !j.contains("start") || !j.contains("end"))
    throw ConfigError("span object needs 'start' and 'end'");
  return {j["start"].get<std::size_t>(), j["end"].get<std::size_t>()};
}
}  // namespace

void write_segmented_jsonl(const std::string& path,
                           const std::vector<SegmentedExample>& corpus) {
  std::ofstream outf(path, std::ios::binary | std::ios::trunc);
  if (!outf) throw IoError("cannot write corpus file: " + path);
  for (const auto& ex : corpus) {
    json j;
    j["text"] = ex.text;
    j["token_ids"] = ex.token_ids;
    j["spans"] = {{"prompt", span_to_json(ex.prompt_span)},
                  {"cot", span_to_json(ex.cot_span)},
                  {"answer", span_to_json(ex.answer_span)}};
    outf << j.dump() << "\n";
  }
}

std::vector<SegmentedExample> read_segmented_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file: " + path);
  std::vector<SegmentedExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": invalid JSON: " + e.what());
    }
    try {
      SegmentedExample ex;
      ex.text = j.at("text").get<std::string>();
      ex.token_ids = j.at("token_ids").get<std::vector<int>>();
      ex.prompt_span = span_from_json(j.at("spans").at("prompt"));
      ex.cot_span = span_from_json(j.at("spans").at("cot"));
      ex.answer_span = span_from_json(j.at("spans").at("answer"));
      const std::size_t T = ex.token_ids.size();
      if (ex.prompt_span.start != 0 || ex.prompt_span.end != ex.cot_span.start ||
          ex.cot_span.end != ex.answer_span.start || ex.answer_span.end != T)
        throw ConfigError("spans do not partition the token sequence");
      out.push_back(std::move(ex));
    } catch (const json::exception& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string stats_to_json(const SectionStats& stats) {
  auto one = [](const SectionStat& s) {
    return json{{"mean_tokens", s.mean_tokens}, {"share", s.share}, {"examples", s.examples}};
  };
  json j{{"full", one(stats.full)},
         {"prompt", one(stats.prompt)},
         {"cot", one(stats.cot)},
         {"answer", one(stats.answer)}};
  return j.dump(2);
}

}  // namespace cotkd::corpus
