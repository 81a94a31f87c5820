#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace kgnn {

struct TokenizedText {
  std::vector<std::string> tokens;
  // Sentence index of every token; non-decreasing.
  std::vector<std::size_t> sentence_of;
  std::size_t num_sentences = 0;
  // Set when the input held no tokens at all.
  bool empty_input = false;

  std::size_t size() const { return tokens.size(); }
};

// Whitespace split, then every ASCII punctuation character becomes its own
// token. A '.', '?' or '!' token followed by whitespace (or the end of the
// text) closes the current sentence.
TokenizedText Tokenize(std::string_view text);

// Tokenizes pre-split sentences, keeping the caller's sentence numbering.
// Sentences without tokens keep their index but own no tokens.
TokenizedText TokenizeSentences(const std::vector<std::string>& sentences);

std::string ToLowerAscii(std::string_view s);
std::u32string DecodeUtf8(std::string_view s);
std::string EncodeUtf8(char32_t c);

class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary();

  // Words are keyed lowercased; characters are case-sensitive code points.
  // Ids are assigned by descending frequency, ties broken lexicographically.
  static Vocabulary Build(const std::vector<const TokenizedText*>& texts,
                          std::size_t max_words = 0);

  std::size_t WordId(std::string_view token) const;
  std::size_t CharId(char32_t c) const;
  // Char ids truncated or PAD-padded to exactly `max_len` entries.
  std::vector<std::size_t> CharIds(std::string_view token,
                                   std::size_t max_len) const;

  std::size_t word_count() const { return words_.size(); }
  std::size_t char_count() const { return chars_.size(); }

  nlohmann::json ToJson() const;
  static Vocabulary FromJson(const nlohmann::json& j);
  void Save(const std::string& path) const;
  static Vocabulary Load(const std::string& path);

 private:
  std::map<std::string, std::size_t> words_;
  std::map<char32_t, std::size_t> chars_;
};

}  // namespace kgnn
