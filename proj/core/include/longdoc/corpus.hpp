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

#ifndef LONGDOC_CORPUS_HPP_
#define LONGDOC_CORPUS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "longdoc/encoder.hpp"
#include "longdoc/tokenizer.hpp"

namespace longdoc::inline LONGDOC_ABI::corpus {

struct PackingConfig {
  int seq_len = 4096;
  // A chunk whose body holds fewer real tokens than this is dropped.
  int min_body = 512;

  int body_len() const { return seq_len - 2; }
  void validate() const;
};

// One training unit: [CLS] body [EOS] followed by a [PAD] suffix.
struct PackedSequence {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> attention_mask;  // 1 = real token
  int n_real = 0;

  friend bool operator==(const PackedSequence&, const PackedSequence&) = default;
};

struct PackStats {
  std::size_t documents = 0;
  std::size_t empty_documents = 0;
  std::size_t sequences = 0;
  std::size_t dropped_tails = 0;
  std::size_t dropped_tokens = 0;
};

// Packs one tokenized document body. Chunks of body_len tokens are wrapped
// as [CLS] chunk [EOS]; a chunk shorter than min_body is dropped.
std::vector<PackedSequence> pack_document(std::span<const TokenId> body,
                                          const PackingConfig& config, PackStats* stats = nullptr);

// Tokenizes and packs every document in order; chunks never span documents.
// Empty documents are skipped and counted. `threads` parallelizes
// tokenization only; output order is independent of it.
std::vector<PackedSequence> pack_corpus(std::span<const std::string> documents,
                                        const tok::Tokenizer& tokenizer,
                                        const PackingConfig& config, PackStats* stats = nullptr,
                                        int threads = 1);

// One document per line (UTF-8). Empty lines are kept as empty documents.
std::vector<std::string> read_corpus(const std::string& path);

// Shard file: "LDSHARD\0", u32 version, u32 seq_len, u64 count, then per
// sequence seq_len u32 LE ids followed by ceil(seq_len / 8) mask bytes
// (bit i of byte i/8, least significant first).
inline constexpr std::uint32_t kShardVersion = 1;
void write_shard(const std::string& path, std::span<const PackedSequence> sequences, int seq_len);
std::vector<PackedSequence> read_shard(const std::string& path);

struct MlmConfig {
  double select_rate = 0.15;
  double mask_share = 0.8;    // of selected: replaced by [MASK]
  double random_share = 0.1;  // of selected: replaced by a random non-special id
};

struct MaskedBatch {
  std::vector<TokenId> input_ids;
  std::vector<int> labels;               // original id at selected positions, -1 elsewhere
  std::vector<std::uint8_t> selected;
  std::vector<int> positions;            // selected positions, ascending
};

// Selects max(1, round(rate * eligible)) real non-special positions without
// replacement and applies the mask / random / keep substitution. Raises
// EmptySelectionError when nothing is eligible.
MaskedBatch sample_mlm(const PackedSequence& sequence, int vocab_size, std::uint64_t seed,
                       const MlmConfig& config = {});

// Deterministic-pattern corpus for learnability checks: words w0..w{k-1}
// where each next word is a fixed permutation of the current one; every
// document starts at a random word.
std::vector<std::string> synth_pattern_corpus(std::size_t n_docs, std::size_t words_per_doc,
                                              std::size_t alphabet, std::uint64_t seed,
                                              const std::string& prefix = "w");

}  // namespace longdoc::inline LONGDOC_ABI::corpus

#endif  // LONGDOC_CORPUS_HPP_
