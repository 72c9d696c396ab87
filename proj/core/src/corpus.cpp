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

#include "longdoc/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binary_io.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/parallel.hpp"
#include "longdoc/rng.hpp"

namespace longdoc::inline LONGDOC_ABI::corpus {

void PackingConfig::validate() const {
  if (seq_len < 3) throw ConfigError("packing: seq_len must be at least 3");
  if (min_body < 1 || min_body > body_len()) {
    throw ConfigError("packing: min_body must lie in [1, seq_len - 2]");
  }
}

std::vector<PackedSequence> pack_document(std::span<const TokenId> body,
                                          const PackingConfig& config, PackStats* stats) {
  config.validate();
  const SpecialIds specials;
  const auto body_len = static_cast<std::size_t>(config.body_len());
  const auto seq_len = static_cast<std::size_t>(config.seq_len);
  std::vector<PackedSequence> out;
  for (std::size_t start = 0; start < body.size(); start += body_len) {
    const std::size_t n = std::min(body_len, body.size() - start);
    if (n < static_cast<std::size_t>(config.min_body)) {
      if (stats) {
        ++stats->dropped_tails;
        stats->dropped_tokens += n;
      }
      continue;
    }
    PackedSequence seq;
    seq.ids.assign(seq_len, specials.pad);
    seq.attention_mask.assign(seq_len, 0);
    seq.ids[0] = specials.cls;
    std::copy_n(body.begin() + static_cast<std::ptrdiff_t>(start), n, seq.ids.begin() + 1);
    seq.ids[n + 1] = specials.eos;
    std::fill_n(seq.attention_mask.begin(), n + 2, std::uint8_t{1});
    seq.n_real = static_cast<int>(n + 2);
    out.push_back(std::move(seq));
  }
  if (stats) stats->sequences += out.size();
  return out;
}

std::vector<PackedSequence> pack_corpus(std::span<const std::string> documents,
                                        const tok::Tokenizer& tokenizer,
                                        const PackingConfig& config, PackStats* stats,
                                        int threads) {
  config.validate();
  std::vector<std::vector<TokenId>> bodies(documents.size());
  parallel_for(documents.size(), threads,
               [&](std::size_t i) { bodies[i] = tokenizer.encode(documents[i]).ids; });
  PackStats local;
  std::vector<PackedSequence> out;
  for (const auto& body : bodies) {
    ++local.documents;
    if (body.empty()) {
      ++local.empty_documents;
      continue;
    }
    auto seqs = pack_document(body, config, &local);
    std::move(seqs.begin(), seqs.end(), std::back_inserter(out));
  }
  if (stats) *stats = local;
  return out;
}

std::vector<std::string> read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path);
  std::vector<std::string> docs;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    docs.push_back(std::move(line));
  }
  return docs;
}

// ---------------------------------------------------------------------------
// Shards

namespace {

constexpr std::string_view kShardMagic{"LDSHARD\0", 8};

}  // namespace

void write_shard(const std::string& path, std::span<const PackedSequence> sequences, int seq_len) {
  if (seq_len < 1) throw ConfigError("write_shard: seq_len must be positive");
  const auto n = static_cast<std::size_t>(seq_len);
  std::string out(kShardMagic);
  detail::put_le<std::uint32_t>(out, kShardVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(seq_len));
  detail::put_le<std::uint64_t>(out, sequences.size());
  for (const auto& seq : sequences) {
    if (seq.ids.size() != n || seq.attention_mask.size() != n) {
      throw DimensionError("write_shard: sequence length differs from " + std::to_string(seq_len));
    }
    for (TokenId id : seq.ids) detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(id));
    std::string bits((n + 7) / 8, '\0');
    for (std::size_t i = 0; i < n; ++i) {
      if (seq.attention_mask[i]) bits[i / 8] = static_cast<char>(bits[i / 8] | (1u << (i % 8)));
    }
    out += bits;
  }
  detail::write_file_atomic(path, out);
}

std::vector<PackedSequence> read_shard(const std::string& path) {
  const std::string data = detail::read_file(path);
  detail::Reader in(data, path);
  if (in.bytes(kShardMagic.size()) != kShardMagic) throw FormatError(path + ": not a shard file");
  const auto version = in.get_le<std::uint32_t>();
  if (version != kShardVersion) {
    throw VersionError(path + ": shard version " + std::to_string(version) + ", expected " +
                       std::to_string(kShardVersion));
  }
  const auto n = static_cast<std::size_t>(in.get_le<std::uint32_t>());
  const auto count = in.get_le<std::uint64_t>();
  const std::size_t record = n * 4 + (n + 7) / 8;
  if (n == 0 || count > in.remaining() / record) {
    throw TruncatedFileError(path + ": header promises more data than present");
  }
  std::vector<PackedSequence> out(static_cast<std::size_t>(count));
  for (auto& seq : out) {
    seq.ids.resize(n);
    for (auto& id : seq.ids) id = static_cast<TokenId>(in.get_le<std::uint32_t>());
    const auto bits = in.bytes((n + 7) / 8);
    seq.attention_mask.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      seq.attention_mask[i] = (static_cast<unsigned char>(bits[i / 8]) >> (i % 8)) & 1u;
      seq.n_real += seq.attention_mask[i];
    }
  }
  if (in.remaining() != 0) throw FormatError(path + ": trailing bytes after last sequence");
  return out;
}

// ---------------------------------------------------------------------------
// MLM

MaskedBatch sample_mlm(const PackedSequence& sequence, int vocab_size, std::uint64_t seed,
                       const MlmConfig& config) {
  const SpecialIds specials;
  if (vocab_size <= SpecialIds::kCount) {
    throw ConfigError("sample_mlm: vocabulary has no non-special tokens");
  }
  std::vector<int> eligible;
  for (std::size_t i = 0; i < sequence.ids.size(); ++i) {
    const bool real = sequence.attention_mask.empty() || sequence.attention_mask[i];
    if (real && !specials.is_special(sequence.ids[i])) eligible.push_back(static_cast<int>(i));
  }
  if (eligible.empty()) throw EmptySelectionError("sample_mlm: no eligible positions");

  const auto m = eligible.size();
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(config.select_rate * static_cast<double>(m))), 1, m);
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_int(m - i));
    std::swap(eligible[i], eligible[j]);
  }
  eligible.resize(k);
  std::sort(eligible.begin(), eligible.end());

  MaskedBatch batch;
  batch.input_ids = sequence.ids;
  batch.labels.assign(sequence.ids.size(), kIgnoreLabel);
  batch.selected.assign(sequence.ids.size(), 0);
  batch.positions = eligible;
  const auto n_regular = static_cast<std::uint64_t>(vocab_size - SpecialIds::kCount);
  for (int p : eligible) {
    const auto i = static_cast<std::size_t>(p);
    batch.labels[i] = sequence.ids[i];
    batch.selected[i] = 1;
    const double u = rng.uniform();
    if (u < config.mask_share) {
      batch.input_ids[i] = specials.mask;
    } else if (u < config.mask_share + config.random_share) {
      batch.input_ids[i] = static_cast<TokenId>(SpecialIds::kCount + rng.uniform_int(n_regular));
    }
  }
  return batch;
}

std::vector<std::string> synth_pattern_corpus(std::size_t n_docs, std::size_t words_per_doc,
                                              std::size_t alphabet, std::uint64_t seed,
                                              const std::string& prefix) {
  if (alphabet < 2) throw ConfigError("synth_pattern_corpus: alphabet must hold >= 2 words");
  Rng rng(seed);
  std::vector<std::size_t> next(alphabet);
  for (std::size_t i = 0; i < alphabet; ++i) next[i] = i;
  rng.shuffle(next);
  std::vector<std::string> docs;
  docs.reserve(n_docs);
  for (std::size_t d = 0; d < n_docs; ++d) {
    auto w = static_cast<std::size_t>(rng.uniform_int(alphabet));
    std::string doc;
    for (std::size_t i = 0; i < words_per_doc; ++i) {
      if (i) doc += ' ';
      doc += prefix + std::to_string(w);
      w = next[w];
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace longdoc::inline LONGDOC_ABI::corpus
