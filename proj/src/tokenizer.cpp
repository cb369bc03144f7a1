#include "cotkd/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cotkd {

namespace {

using nlohmann::json;

void validate_specials(const std::vector<SpecialToken>& specials, int min_id) {
  std::vector<int> ids;
  std::vector<std::string> lits;
  for (const auto& s : specials) {
    if (s.literal.empty()) throw InvalidTokenizerSpec("special token literal is empty");
    if (s.id < min_id) {
      throw InvalidTokenizerSpec("special token id " + std::to_string(s.id) +
                                 " collides with base vocabulary (must be >= " +
                                 std::to_string(min_id) + ")");
    }
    ids.push_back(s.id);
    lits.push_back(s.literal);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw InvalidTokenizerSpec("duplicate special token id");
  std::sort(lits.begin(), lits.end());
  if (std::adjacent_find(lits.begin(), lits.end()) != lits.end())
    throw InvalidTokenizerSpec("duplicate special token literal");
}

}  // namespace

std::vector<SpecialToken> Tokenizer::default_specials() {
  return {{"<think>", 256}, {"</think>", 257}};
}

Tokenizer Tokenizer::byte_level(std::vector<SpecialToken> specials) {
  validate_specials(specials, 256);
  Tokenizer t;
  t.kind_ = Kind::Byte;
  t.specials_ = std::move(specials);
  t.vocab_size_ = 256;
  for (const auto& s : t.specials_) {
    t.texts_[s.id] = s.literal;
    t.vocab_size_ = std::max(t.vocab_size_, s.id + 1);
  }
  for (int b = 0; b < 256; ++b) t.texts_[b] = std::string(1, static_cast<char>(b));
  t.build_match_index();
  return t;
}

Tokenizer Tokenizer::from_table(std::vector<std::string> vocab,
                                std::vector<SpecialToken> specials) {
  if (vocab.empty()) throw InvalidTokenizerSpec("vocabulary table is empty");
  validate_specials(specials, static_cast<int>(vocab.size()));

  std::vector<bool> byte_seen(256, false);
  std::vector<std::string> sorted = vocab;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InvalidTokenizerSpec("duplicate vocabulary entry");
  for (const auto& v : vocab) {
    if (v.empty()) throw InvalidTokenizerSpec("vocabulary entry is empty");
    if (v.size() == 1) byte_seen[static_cast<unsigned char>(v[0])] = true;
  }
  for (int b = 0; b < 256; ++b) {
    if (!byte_seen[b]) {
      throw InvalidTokenizerSpec(
          "vocabulary table must cover every single byte; missing byte " +
          std::to_string(b));
    }
  }

  Tokenizer t;
  t.kind_ = Kind::Table;
  t.table_ = std::move(vocab);
  t.specials_ = std::move(specials);
  t.vocab_size_ = static_cast<int>(t.table_.size());
  for (int i = 0; i < static_cast<int>(t.table_.size()); ++i) t.texts_[i] = t.table_[i];
  for (const auto& s : t.specials_) {
    t.texts_[s.id] = s.literal;
    t.vocab_size_ = std::max(t.vocab_size_, s.id + 1);
  }
  t.build_match_index();
  return t;
}

void Tokenizer::build_match_index() {
  by_first_byte_.assign(256, {});
  auto add = [&](const std::string& lit, int id) {
    by_first_byte_[static_cast<unsigned char>(lit[0])].emplace_back(lit, id);
  };
  for (const auto& s : specials_) add(s.literal, s.id);
  if (kind_ == Kind::Table) {
    for (int i = 0; i < static_cast<int>(table_.size()); ++i) add(table_[i], i);
  }
  for (auto& bucket : by_first_byte_) {
    std::sort(bucket.begin(), bucket.end(), [](const auto& a, const auto& b) {
      if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
      return a.first < b.first;
    });
  }
}

int Tokenizer::special_id(std::string_view literal) const {
  for (const auto& s : specials_)
    if (s.literal == literal) return s.id;
  return -1;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  return encode_with_offsets(text, nullptr);
}

std::vector<int> Tokenizer::encode_with_offsets(std::string_view text,
                                                std::vector<std::size_t>* offsets) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  if (offsets) {
    offsets->clear();
    offsets->reserve(text.size());
  }
  std::size_t i = 0;
  while (i < text.size()) {
    const auto& bucket = by_first_byte_[static_cast<unsigned char>(text[i])];
    int matched_id = -1;
    std::size_t matched_len = 0;
    for (const auto& [lit, id] : bucket) {
      if (lit.size() <= text.size() - i && text.compare(i, lit.size(), lit) == 0) {
        matched_id = id;
        matched_len = lit.size();
        break;  // bucket is sorted longest-first
      }
    }
    if (matched_id < 0) {
      if (kind_ == Kind::Byte) {
        matched_id = static_cast<unsigned char>(text[i]);
        matched_len = 1;
      } else {
        // unreachable for validated tables (all single bytes covered)
        throw InvalidTokenizerSpec("text cannot be encoded at byte offset " +
                                   std::to_string(i));
      }
    }
    ids.push_back(matched_id);
    if (offsets) offsets->push_back(i);
    i += matched_len;
  }
  return ids;
}

const std::string& Tokenizer::token_text(int id) const {
  auto it = texts_.find(id);
  if (it == texts_.end())
    throw Error("token id " + std::to_string(id) + " is not in the vocabulary");
  return it->second;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) out += token_text(id);
  return out;
}

Tokenizer Tokenizer::from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidTokenizerSpec(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw InvalidTokenizerSpec("missing string field 'kind'");

  std::vector<SpecialToken> specials;
  if (j.contains("special_tokens")) {
    if (!j["special_tokens"].is_array())
      throw InvalidTokenizerSpec("'special_tokens' must be an array");
    for (const auto& e : j["special_tokens"]) {
      if (!e.is_object() || !e.contains("literal") || !e["literal"].is_string() ||
          !e.contains("id") || !e["id"].is_number_integer())
        throw InvalidTokenizerSpec("special token entries need 'literal' and integer 'id'");
      specials.push_back({e["literal"].get<std::string>(), e["id"].get<int>()});
    }
  }

  const std::string kind = j["kind"].get<std::string>();
  if (kind == "byte") {
    if (!j.contains("special_tokens")) specials = default_specials();
    return byte_level(std::move(specials));
  }
  if (kind == "table") {
    if (!j.contains("vocab") || !j["vocab"].is_array())
      throw InvalidTokenizerSpec("table tokenizer needs a 'vocab' array");
    std::vector<std::string> vocab;
    for (const auto& e : j["vocab"]) {
      if (!e.is_string()) throw InvalidTokenizerSpec("'vocab' entries must be strings");
      vocab.push_back(e.get<std::string>());
    }
    return from_table(std::move(vocab), std::move(specials));
  }
  throw InvalidTokenizerSpec("unknown tokenizer kind '" + kind + "'");
}

Tokenizer Tokenizer::from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tokenizer spec: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string Tokenizer::to_json() const {
  json j;
  j["kind"] = kind_ == Kind::Byte ? "byte" : "table";
  j["special_tokens"] = json::array();
  for (const auto& s : specials_)
    j["special_tokens"].push_back({{"literal", s.literal}, {"id", s.id}});
  if (kind_ == Kind::Table) j["vocab"] = table_;
  return j.dump(2);
}

}  // namespace cotkd
