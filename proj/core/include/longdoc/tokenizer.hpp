// Copyright 2026 The longdoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LONGDOC_TOKENIZER_HPP_
#define LONGDOC_TOKENIZER_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "longdoc/encoder.hpp"

namespace longdoc::inline LONGDOC_ABI::tok {

inline constexpr std::string_view kContinuation = "##";

// Special tokens in id order.
const std::vector<std::string>& special_tokens();

class Vocab {
 public:
  // Vocabulary holding only the special tokens.
  Vocab();
  // Raises ConfigError unless `tokens` starts with the specials in order and
  // holds no duplicates.
  explicit Vocab(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  std::optional<TokenId> find(std::string_view token) const;
  // Raises RangeError for an id outside [0, size).
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }
  // Adds a token if new; returns its id either way.
  TokenId add(const std::string& token);

  // One token per line, line number = id.
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct NormalizerOptions {
  bool nfc = true;
  bool lowercase = false;

  friend bool operator==(const NormalizerOptions&, const NormalizerOptions&) = default;
};

// NFC (and optional lowercasing) of UTF-8 text; malformed sequences become
// U+FFFD.
std::string normalize(std::string_view text, const NormalizerOptions& options);

// ASCII-whitespace split.
std::vector<std::string_view> split_words(std::string_view text);
std::size_t word_count(std::string_view text);

// Splits a UTF-8 string into code points (each returned as its UTF-8 bytes).
std::vector<std::string> code_points(std::string_view word);

struct Encoding {
  std::vector<TokenId> ids;
  // For each input word, the [start, end) range of its ids.
  std::vector<std::pair<std::size_t, std::size_t>> word_spans;
};

struct TrainOptions {
  std::size_t target_size = 0;
  // Pairs seen fewer times are never merged.
  std::size_t min_freq = 1;
  NormalizerOptions normalizer;
};

class Tokenizer {
 public:
  Tokenizer() = default;
  Tokenizer(Vocab vocab, NormalizerOptions normalizer = {});

  const Vocab& vocab() const { return vocab_; }
  const NormalizerOptions& normalizer() const { return normalizer_; }

  // Whitespace split, then greedy longest-match-first per word with "##"
  // continuations. A word that cannot be covered becomes one [UNK].
  Encoding encode(std::string_view text) const;
  // Encodes one already-normalized word, appending to `out`.
  void encode_word(std::string_view word, std::vector<TokenId>& out) const;
  // Per-word encoding of pre-split words (token-level tasks).
  Encoding encode_words(std::span<const std::string> words) const;
  // Drops every special token and joins continuations without a space.
  std::string decode(std::span<const TokenId> ids) const;

  // SHA-256 (hex) over the vocabulary and normalizer flags.
  std::string hash() const;

  friend bool operator==(const Tokenizer& a, const Tokenizer& b) {
    return a.vocab_ == b.vocab_ && a.normalizer_ == b.normalizer_;
  }

 private:
  Vocab vocab_;
  NormalizerOptions normalizer_;
};

// WordPiece training: starts from the character alphabet (word-initial
// characters plus "##"-prefixed continuations) and repeatedly merges the
// pair with the highest freq(ab) / (freq(a) freq(b)), ties broken by the
// lexicographically smallest (a, b), until the vocabulary reaches
// target_size or no pair qualifies. Raises ConfigError when target_size
// cannot hold the specials plus the alphabet.
Tokenizer train_wordpiece(std::span<const std::string> documents, const TrainOptions& options);

void to_json(nlohmann::json& j, const Tokenizer& t);
void from_json(const nlohmann::json& j, Tokenizer& t);

}  // namespace longdoc::inline LONGDOC_ABI::tok

#endif  // LONGDOC_TOKENIZER_HPP_
