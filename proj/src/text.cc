#include "kgnn/text.h"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace kgnn {
namespace {

bool IsSpace(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool IsAsciiPunct(unsigned char c) {
  return c < 128 && ((c >= 33 && c <= 47) || (c >= 58 && c <= 64) ||
                     (c >= 91 && c <= 96) || (c >= 123 && c <= 126));
}

bool ClosesSentence(unsigned char c) { return c == '.' || c == '?' || c == '!'; }

// Appends the tokens of `text` to `out`, starting at sentence `sentence`.
// Returns the sentence index the next token would receive.
std::size_t AppendTokens(std::string_view text, std::size_t sentence,
                         bool split_sentences, TokenizedText& out) {
  bool pending_boundary = false;
  std::string word;
  auto emit = [&](std::string token) {
    if (pending_boundary) {
      ++sentence;
      pending_boundary = false;
    }
    out.tokens.push_back(std::move(token));
    out.sentence_of.push_back(sentence);
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (IsSpace(c)) {
      if (!word.empty()) emit(std::move(word));
      word.clear();
    } else if (IsAsciiPunct(c)) {
      if (!word.empty()) emit(std::move(word));
      word.clear();
      emit(std::string(1, static_cast<char>(c)));
      const bool at_end = i + 1 == text.size();
      if (split_sentences && ClosesSentence(c) &&
          (at_end || IsSpace(static_cast<unsigned char>(text[i + 1])))) {
        pending_boundary = true;
      }
    } else {
      word.push_back(static_cast<char>(c));
    }
  }
  if (!word.empty()) emit(std::move(word));
  return sentence;
}

}  // namespace

TokenizedText Tokenize(std::string_view text) {
  TokenizedText out;
  const std::size_t last = AppendTokens(text, 0, true, out);
  out.num_sentences = out.tokens.empty() ? 0 : last + 1;
  out.empty_input = out.tokens.empty();
  return out;
}

TokenizedText TokenizeSentences(const std::vector<std::string>& sentences) {
  TokenizedText out;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    AppendTokens(sentences[s], s, false, out);
  }
  out.num_sentences = sentences.size();
  out.empty_input = out.tokens.empty();
  return out;
}

std::string ToLowerAscii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::u32string DecodeUtf8(std::string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      len = 1;
      cp = c;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    }
    bool valid = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; valid && k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) valid = false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!valid) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string EncodeUtf8(char32_t c) {
  std::string out;
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  }
  return out;
}

Vocabulary::Vocabulary() {
  words_["<pad>"] = kPad;
  words_["<unk>"] = kUnk;
}

Vocabulary Vocabulary::Build(const std::vector<const TokenizedText*>& texts,
                             std::size_t max_words) {
  std::unordered_map<std::string, std::size_t> word_counts;
  std::unordered_map<char32_t, std::size_t> char_counts;
  for (const TokenizedText* t : texts) {
    for (const std::string& tok : t->tokens) {
      ++word_counts[ToLowerAscii(tok)];
      for (char32_t c : DecodeUtf8(tok)) ++char_counts[c];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> words(word_counts.begin(),
                                                         word_counts.end());
  std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::pair<char32_t, std::size_t>> chars(char_counts.begin(),
                                                      char_counts.end());
  std::sort(chars.begin(), chars.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  Vocabulary v;
  for (const auto& [w, n] : words) {
    if (max_words > 0 && v.words_.size() >= max_words) break;
    if (v.words_.count(w)) continue;
    const std::size_t id = v.words_.size();
    v.words_[w] = id;
  }
  for (const auto& [c, n] : chars) {
    const std::size_t id = v.chars_.size() + 2;
    v.chars_[c] = id;
  }
  return v;
}

std::size_t Vocabulary::WordId(std::string_view token) const {
  auto it = words_.find(ToLowerAscii(token));
  return it == words_.end() ? kUnk : it->second;
}

std::size_t Vocabulary::CharId(char32_t c) const {
  auto it = chars_.find(c);
  return it == chars_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocabulary::CharIds(std::string_view token,
                                             std::size_t max_len) const {
  std::vector<std::size_t> ids(max_len, kPad);
  const std::u32string cps = DecodeUtf8(token);
  for (std::size_t i = 0; i < cps.size() && i < max_len; ++i) {
    ids[i] = CharId(cps[i]);
  }
  return ids;
}

nlohmann::json Vocabulary::ToJson() const {
  nlohmann::json words = nlohmann::json::object();
  for (const auto& [w, id] : words_) words[w] = id;
  nlohmann::json chars = nlohmann::json::object();
  chars["<pad>"] = kPad;
  chars["<unk>"] = kUnk;
  for (const auto& [c, id] : chars_) chars[EncodeUtf8(c)] = id;
  return {{"tokens", words}, {"chars", chars}};
}

Vocabulary Vocabulary::FromJson(const nlohmann::json& j) {
  Vocabulary v;
  v.words_.clear();
  for (const auto& [w, id] : j.at("tokens").items()) {
    v.words_[w] = id.get<std::size_t>();
  }
  for (const auto& [c, id] : j.at("chars").items()) {
    if (c == "<pad>" || c == "<unk>") continue;
    const std::u32string cps = DecodeUtf8(c);
    if (cps.size() != 1) {
      throw std::runtime_error("vocabulary: bad character key '" + c + "'");
    }
    v.chars_[cps[0]] = id.get<std::size_t>();
  }
  if (v.WordId("<pad>") != kPad) {
    throw std::runtime_error("vocabulary: PAD must have id 0");
  }
  return v;
}

void Vocabulary::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << ToJson().dump(1) << "\n";
}

Vocabulary Vocabulary::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return FromJson(nlohmann::json::parse(in));
}

}  // namespace kgnn
