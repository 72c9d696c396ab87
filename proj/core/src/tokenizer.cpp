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

#include "longdoc/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <openssl/evp.h>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "longdoc/errors.hpp"

namespace longdoc::inline LONGDOC_ABI::tok {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials{"[PAD]", "[UNK]", "[CLS]",
                                                 "[SEP]", "[MASK]", "[EOS]"};
  return specials;
}

// ---------------------------------------------------------------------------
// Vocab

Vocab::Vocab() : Vocab(special_tokens()) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  const auto& specials = special_tokens();
  if (tokens_.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens_.begin())) {
    throw ConfigError("vocab: must start with the special tokens in order");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw ConfigError("vocab: empty token at id " + std::to_string(i));
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw ConfigError("vocab: duplicate token '" + tokens_[i] + "'");
    }
  }
}

bool Vocab::contains(std::string_view token) const { return find(token).has_value(); }

std::optional<TokenId> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw RangeError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocab::add(const std::string& token) {
  if (token.empty()) throw ConfigError("vocab: cannot add an empty token");
  auto [it, inserted] = index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocab file " + path);
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw DataError("failed writing vocab file " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open vocab file " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  try {
    return Vocab(std::move(tokens));
  } catch (const ConfigError& e) {
    throw ParseError(path, e.what());
  }
}

// ---------------------------------------------------------------------------
// Text helpers

std::string normalize(std::string_view text, const NormalizerOptions& options) {
  if (!options.nfc && !options.lowercase) return std::string(text);
  icu::UnicodeString s =
      icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  if (options.nfc) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) throw Error("ICU NFC normalizer unavailable");
    s = nfc->normalize(s, status);
    if (U_FAILURE(status)) throw DataError("NFC normalization failed");
  }
  if (options.lowercase) s.toLower(icu::Locale::getRoot());
  std::string out;
  s.toUTF8String(out);
  return out;
}

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

std::size_t word_count(std::string_view text) { return split_words(text).size(); }

std::vector<std::string> code_points(std::string_view word) {
  std::vector<std::string> out;
  const auto* s = reinterpret_cast<const uint8_t*>(word.data());
  const auto length = static_cast<int32_t>(word.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t start = i;
    UChar32 c;
    U8_NEXT(s, i, length, c);
    if (c < 0) {
      out.emplace_back("\xEF\xBF\xBD");  // U+FFFD
    } else {
      out.emplace_back(word.substr(static_cast<std::size_t>(start),
                                   static_cast<std::size_t>(i - start)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tokenizer

namespace {

constexpr std::size_t kMaxWordChars = 100;

}  // namespace

Tokenizer::Tokenizer(Vocab vocab, NormalizerOptions normalizer)
    : vocab_(std::move(vocab)), normalizer_(normalizer) {}

void Tokenizer::encode_word(std::string_view word, std::vector<TokenId>& out) const {
  const SpecialIds specials;
  const auto chars = code_points(word);
  if (chars.empty() || chars.size() > kMaxWordChars) {
    out.push_back(specials.unk);
    return;
  }
  std::vector<TokenId> pieces;
  std::size_t start = 0;
  while (start < chars.size()) {
    std::optional<TokenId> best;
    std::size_t best_end = start;
    std::string candidate = start > 0 ? std::string(kContinuation) : std::string();
    for (std::size_t end = start; end < chars.size(); ++end) {
      candidate += chars[end];
      if (auto id = vocab_.find(candidate); id && !specials.is_special(*id)) {
        best = id;
        best_end = end + 1;
      }
    }
    if (!best) {
      out.push_back(specials.unk);
      return;
    }
    pieces.push_back(*best);
    start = best_end;
  }
  out.insert(out.end(), pieces.begin(), pieces.end());
}

Encoding Tokenizer::encode(std::string_view text) const {
  const std::string normalized = normalize(text, normalizer_);
  Encoding enc;
  for (std::string_view word : split_words(normalized)) {
    const std::size_t start = enc.ids.size();
    encode_word(word, enc.ids);
    enc.word_spans.emplace_back(start, enc.ids.size());
  }
  return enc;
}

Encoding Tokenizer::encode_words(std::span<const std::string> words) const {
  Encoding enc;
  for (const auto& word : words) {
    const std::size_t start = enc.ids.size();
    encode_word(normalize(word, normalizer_), enc.ids);
    enc.word_spans.emplace_back(start, enc.ids.size());
  }
  return enc;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  const SpecialIds specials;
  std::string out;
  for (TokenId id : ids) {
    const std::string& t = vocab_.token(id);
    if (specials.is_special(id)) continue;
    if (t.size() > kContinuation.size() && t.starts_with(kContinuation)) {
      out += t.substr(kContinuation.size());
    } else {
      if (!out.empty()) out += ' ';
      out += t;
    }
  }
  return out;
}

std::string Tokenizer::hash() const {
  std::string buffer = "nfc=" + std::to_string(normalizer_.nfc) +
                       ";lowercase=" + std::to_string(normalizer_.lowercase) + "\n";
  for (const auto& t : vocab_.tokens()) {
    buffer += t;
    buffer += '\n';
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(buffer.data(), buffer.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

void to_json(nlohmann::json& j, const Tokenizer& t) {
  j = nlohmann::json{{"tokens", t.vocab().tokens()},
                     {"nfc", t.normalizer().nfc},
                     {"lowercase", t.normalizer().lowercase}};
}

void from_json(const nlohmann::json& j, Tokenizer& t) {
  NormalizerOptions n;
  n.nfc = j.value("nfc", true);
  n.lowercase = j.value("lowercase", false);
  t = Tokenizer(Vocab(j.at("tokens").get<std::vector<std::string>>()), n);
}

// ---------------------------------------------------------------------------
// Training

namespace {

using Count = std::uint64_t;
using Wide = unsigned __int128;

struct Word {
  std::vector<int> symbols;
  Count count = 0;
};

std::uint64_t pair_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

Tokenizer train_wordpiece(std::span<const std::string> documents, const TrainOptions& options) {
  if (documents.empty()) throw ConfigError("train_wordpiece: empty corpus");

  std::map<std::string, Count> word_counts;
  for (const auto& doc : documents) {
    const std::string normalized = normalize(doc, options.normalizer);
    for (std::string_view w : split_words(normalized)) ++word_counts[std::string(w)];
  }
  if (word_counts.empty()) throw ConfigError("train_wordpiece: corpus has no words");

  // Symbol table shared by the alphabet and merged pieces.
  std::vector<std::string> symbol_text;
  std::map<std::string, int> symbol_id;
  auto intern = [&](const std::string& s) {
    auto [it, inserted] = symbol_id.emplace(s, static_cast<int>(symbol_text.size()));
    if (inserted) symbol_text.push_back(s);
    return it->second;
  };

  std::vector<Word> words;
  for (const auto& [text, count] : word_counts) {
    Word w;
    w.count = count;
    const auto chars = code_points(text);
    if (chars.size() > kMaxWordChars) continue;
    for (std::size_t i = 0; i < chars.size(); ++i) {
      w.symbols.push_back(intern(i == 0 ? chars[i] : std::string(kContinuation) + chars[i]));
    }
    words.push_back(std::move(w));
  }

  Vocab vocab;
  const std::size_t alphabet = symbol_text.size();
  if (options.target_size < vocab.size() + alphabet) {
    throw ConfigError("train_wordpiece: target size " + std::to_string(options.target_size) +
                      " is below specials + alphabet (" +
                      std::to_string(vocab.size() + alphabet) + ")");
  }
  // Alphabet in byte order for determinism independent of corpus order.
  std::vector<std::string> sorted_alphabet(symbol_text.begin(), symbol_text.end());
  std::sort(sorted_alphabet.begin(), sorted_alphabet.end());
  for (const auto& s : sorted_alphabet) vocab.add(s);

  const Count min_freq = std::max<Count>(1, options.min_freq);
  while (vocab.size() < options.target_size) {
    std::vector<Count> symbol_freq(symbol_text.size(), 0);
    std::unordered_map<std::uint64_t, Count> pair_freq;
    for (const auto& w : words) {
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        symbol_freq[static_cast<std::size_t>(w.symbols[i])] += w.count;
        if (i + 1 < w.symbols.size()) pair_freq[pair_key(w.symbols[i], w.symbols[i + 1])] += w.count;
      }
    }
    bool found = false;
    int best_a = 0, best_b = 0;
    Count best_ab = 0;
    for (const auto& [key, f_ab] : pair_freq) {
      if (f_ab < min_freq) continue;
      const int a = static_cast<int>(key >> 32);
      const int b = static_cast<int>(key & 0xffffffffu);
      if (found) {
        // Compare f_ab / (f_a f_b) exactly by cross-multiplication.
        const Wide lhs = Wide{f_ab} * symbol_freq[static_cast<std::size_t>(best_a)] *
                         symbol_freq[static_cast<std::size_t>(best_b)];
        const Wide rhs = Wide{best_ab} * symbol_freq[static_cast<std::size_t>(a)] *
                         symbol_freq[static_cast<std::size_t>(b)];
        if (lhs < rhs) continue;
        if (lhs == rhs &&
            std::tie(symbol_text[static_cast<std::size_t>(a)],
                     symbol_text[static_cast<std::size_t>(b)]) >=
                std::tie(symbol_text[static_cast<std::size_t>(best_a)],
                         symbol_text[static_cast<std::size_t>(best_b)])) {
          continue;
        }
      }
      found = true;
      best_a = a;
      best_b = b;
      best_ab = f_ab;
    }
    if (!found) break;

    const std::string& right = symbol_text[static_cast<std::size_t>(best_b)];
    const std::string merged = symbol_text[static_cast<std::size_t>(best_a)] +
                               right.substr(right.starts_with(kContinuation) ? kContinuation.size() : 0);
    const int merged_id = intern(merged);
    vocab.add(merged);
    for (auto& w : words) {
      std::vector<int> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == best_a && w.symbols[i + 1] == best_b) {
          next.push_back(merged_id);
          ++i;
        } else {
          next.push_back(w.symbols[i]);
        }
      }
      w.symbols = std::move(next);
    }
  }
  return Tokenizer(std::move(vocab), options.normalizer);
}

}  // namespace longdoc::inline LONGDOC_ABI::tok
