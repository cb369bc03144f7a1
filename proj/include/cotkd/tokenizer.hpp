#ifndef COTKD_TOKENIZER_HPP
#define COTKD_TOKENIZER_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cotkd/error.hpp"

namespace cotkd {

struct SpecialToken {
  std::string literal;
  int id = 0;
};

// Deterministic tokenizer with reserved special-token literals.
//
// Two kinds:
//  - byte: every byte is its own token (id == byte value); special literals
//    get reserved ids >= 256 and are matched greedily so they never split.
//  - table: an explicit vocabulary (id == index into the table) matched by
//    longest prefix. The table must cover all 256 single bytes so that any
//    text encodes, which also makes encode/decode a round trip.
class Tokenizer {
public:
  enum class Kind { Byte, Table };

  static std::vector<SpecialToken> default_specials();

  // Byte-level tokenizer; specials default to <think>=256, </think>=257.
  static Tokenizer byte_level(std::vector<SpecialToken> specials = default_specials());

  static Tokenizer from_table(std::vector<std::string> vocab,
                              std::vector<SpecialToken> specials);

  // JSON spec: {"kind":"byte"|"table", "special_tokens":[{"literal":..,"id":..}],
  //             "vocab":[...]} (vocab required for table kind).
  static Tokenizer from_json(const std::string& json_text);
  static Tokenizer from_json_file(const std::string& path);
  std::string to_json() const;

  Kind kind() const { return kind_; }
  int vocab_size() const { return vocab_size_; }
  const std::vector<SpecialToken>& specials() const { return specials_; }

  // Reserved id for a special literal, or -1 when absent.
  int special_id(std::string_view literal) const;

  std::vector<int> encode(std::string_view text) const;

  // Like encode but also records each token's starting byte offset in text.
  std::vector<int> encode_with_offsets(std::string_view text,
                                       std::vector<std::size_t>* offsets) const;

  std::string decode(const std::vector<int>& ids) const;
  const std::string& token_text(int id) const;

private:
  Tokenizer() = default;
  void build_match_index();

  Kind kind_ = Kind::Byte;
  int vocab_size_ = 0;
  std::vector<SpecialToken> specials_;
  std::vector<std::string> table_;              // table kind only
  std::unordered_map<int, std::string> texts_;  // id -> literal for all ids
  // first byte -> candidate (literal, id) pairs, longest first
  std::vector<std::vector<std::pair<std::string, int>>> by_first_byte_;
};

}  // namespace cotkd

#endif  // COTKD_TOKENIZER_HPP
