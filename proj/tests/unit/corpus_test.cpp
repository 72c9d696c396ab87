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

#include <algorithm>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "longdoc/corpus.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/rng.hpp"
#include "test_util.hpp"

namespace longdoc {
namespace {

std::vector<TokenId> body_of(std::size_t n, TokenId first = 6) {
  std::vector<TokenId> ids(n);
  std::iota(ids.begin(), ids.end(), first);
  return ids;
}

TEST(Packing, DocumentLengthsAroundTheLimit) {
  const corpus::PackingConfig config;  // 4096 / 512
  const std::vector<std::pair<std::size_t, std::size_t>> cases{
      {4094, 1}, {4394, 1}, {4694, 2}, {511, 0}, {512, 1}, {8188, 2}};
  for (const auto& [tokens, sequences] : cases) {
    EXPECT_EQ(corpus::pack_document(body_of(tokens), config).size(), sequences) << tokens;
  }
}

TEST(Packing, TailIsPadded) {
  const auto packed = corpus::pack_document(body_of(4094 + 600), corpus::PackingConfig{});
  ASSERT_EQ(packed.size(), 2u);
  EXPECT_EQ(packed[1].ids.size(), 4096u);
  EXPECT_EQ(std::count(packed[1].ids.begin(), packed[1].ids.end(), 0), 3494);
  EXPECT_EQ(packed[1].n_real, 602);
}

TEST(Packing, LayoutAndConservation) {
  corpus::PackingConfig config{16, 5};
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = rng.uniform_int(60);
    const auto body = body_of(n);
    corpus::PackStats stats;
    const auto packed = corpus::pack_document(body, config, &stats);
    std::vector<TokenId> kept;
    for (const auto& s : packed) {
      ASSERT_EQ(s.ids.size(), 16u);
      ASSERT_EQ(s.attention_mask.size(), 16u);
      EXPECT_EQ(s.ids.front(), 2);
      EXPECT_EQ(s.ids[static_cast<std::size_t>(s.n_real) - 1], 5);
      EXPECT_GE(s.n_real - 2, config.min_body);
      for (int i = 0; i < 16; ++i) {
        EXPECT_EQ(s.attention_mask[static_cast<std::size_t>(i)], i < s.n_real ? 1 : 0);
        if (i >= s.n_real) EXPECT_EQ(s.ids[static_cast<std::size_t>(i)], 0);
      }
      kept.insert(kept.end(), s.ids.begin() + 1, s.ids.begin() + s.n_real - 1);
    }
    EXPECT_EQ(kept.size() + stats.dropped_tokens, n);
    EXPECT_TRUE(std::equal(kept.begin(), kept.end(), body.begin()));
    EXPECT_EQ(stats.sequences, packed.size());
    EXPECT_EQ(stats.dropped_tails, (n % 14 != 0 && n % 14 < 5) ? 1u : 0u);
  }
}

TEST(Packing, ConfigValidation) {
  EXPECT_THROW((corpus::PackingConfig{2, 1}.validate()), ConfigError);
  EXPECT_THROW((corpus::PackingConfig{16, 15}.validate()), ConfigError);
  EXPECT_THROW((corpus::PackingConfig{16, 0}.validate()), ConfigError);
  EXPECT_NO_THROW((corpus::PackingConfig{16, 14}.validate()));
}

TEST(Packing, CorpusSkipsEmptyDocumentsAndIgnoresThreads) {
  tok::Tokenizer t(tok::Vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[EOS]", "a", "b"}));
  const std::vector<std::string> docs{"a b a b a b", "", "b b b", "  ", "a a a a a a a a a a"};
  corpus::PackStats one, four;
  const corpus::PackingConfig config{8, 3};
  const auto p1 = corpus::pack_corpus(docs, t, config, &one, 1);
  const auto p4 = corpus::pack_corpus(docs, t, config, &four, 4);
  EXPECT_EQ(p1, p4);
  EXPECT_EQ(one.documents, 5u);
  EXPECT_EQ(one.empty_documents, 2u);
  // 6 -> 1, 3 -> 1, 10 -> 6 + 4 -> 2.
  EXPECT_EQ(p1.size(), 4u);
}

TEST(Shard, RoundTripAndErrors) {
  testing::TempDir dir;
  const corpus::PackingConfig config{13, 2};
  const auto packed = corpus::pack_document(body_of(40), config);
  const std::string path = dir.file("a.shard");
  corpus::write_shard(path, packed, 13);
  EXPECT_EQ(corpus::read_shard(path), packed);

  const std::string bytes = testing::slurp(path);
  // magic 8 + version 4 + seq_len 4 + count 8, then 13 ids and 2 mask bytes each.
  EXPECT_EQ(bytes.size(), 24 + packed.size() * (13 * 4 + 2));

  auto write_variant = [&](std::string b) {
    testing::spit(dir.file("b.shard"), b);
    return dir.file("b.shard");
  };
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(corpus::read_shard(write_variant(bad)), FormatError);
  bad = bytes;
  bad[8] = 9;
  EXPECT_THROW(corpus::read_shard(write_variant(bad)), VersionError);
  EXPECT_THROW(corpus::read_shard(write_variant(bytes.substr(0, bytes.size() - 3))), TruncatedFileError);
  EXPECT_THROW(corpus::read_shard(write_variant(bytes + "z")), FormatError);
  EXPECT_THROW(corpus::read_shard(dir.file("missing")), DataError);
  EXPECT_THROW(corpus::write_shard(path, packed, 12), DimensionError);
}

TEST(Mlm, SelectionCountsAndSubstitutionShares) {
  corpus::PackedSequence s;
  s.ids = {2};
  for (int i = 0; i < 100; ++i) s.ids.push_back(6 + i % 50);
  s.ids.push_back(5);
  s.ids.insert(s.ids.end(), 10, 0);
  s.attention_mask.assign(s.ids.size(), 0);
  std::fill_n(s.attention_mask.begin(), 102, 1);
  s.n_real = 102;

  std::size_t masked = 0, random = 0, kept = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const auto b = corpus::sample_mlm(s, 56, seed);
    ASSERT_EQ(b.positions.size(), 15u);
    EXPECT_TRUE(std::is_sorted(b.positions.begin(), b.positions.end()));
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
      if (!b.selected[i]) {
        EXPECT_EQ(b.labels[i], -1);
        EXPECT_EQ(b.input_ids[i], s.ids[i]);
        continue;
      }
      EXPECT_GE(i, 1u);
      EXPECT_LE(i, 100u);
      EXPECT_EQ(b.labels[i], s.ids[i]);
      if (b.input_ids[i] == 4) {
        ++masked;
      } else if (b.input_ids[i] == s.ids[i]) {
        ++kept;
      } else {
        ++random;
        EXPECT_GE(b.input_ids[i], 6);
        EXPECT_LT(b.input_ids[i], 56);
      }
    }
  }
  const double total = 400.0 * 15.0;
  // A random replacement may coincide with the original (1 in 50).
  EXPECT_NEAR(masked / total, 0.8, 0.02);
  EXPECT_NEAR(random / total, 0.1 * 49 / 50, 0.015);
  EXPECT_NEAR(kept / total, 0.1 + 0.1 / 50, 0.015);
  EXPECT_EQ(corpus::sample_mlm(s, 56, 11).input_ids, corpus::sample_mlm(s, 56, 11).input_ids);
}

TEST(Mlm, FullSequenceSelectsRoundedShare) {
  const auto packed = corpus::pack_document(body_of(4094), corpus::PackingConfig{});
  EXPECT_EQ(corpus::sample_mlm(packed.at(0), 5000, 3).positions.size(), 614u);
}

TEST(Mlm, AtLeastOnePositionAndEmptyRejected) {
  corpus::PackedSequence s;
  s.ids = {2, 7, 5};
  s.attention_mask = {1, 1, 1};
  s.n_real = 3;
  const auto b = corpus::sample_mlm(s, 10, 1);
  EXPECT_EQ(b.positions, std::vector<int>{1});
  s.ids = {2, 5, 0};
  s.attention_mask = {1, 1, 0};
  EXPECT_THROW(corpus::sample_mlm(s, 10, 1), EmptySelectionError);
  EXPECT_THROW(corpus::sample_mlm(s, 6, 1), ConfigError);
}

TEST(SynthPattern, FollowsAFixedSuccessor) {
  const auto docs = corpus::synth_pattern_corpus(30, 12, 9, 5);
  ASSERT_EQ(docs.size(), 30u);
  std::map<std::string, std::string> next;
  for (const auto& d : docs) {
    std::istringstream in(d);
    std::vector<std::string> words{std::istream_iterator<std::string>(in), {}};
    ASSERT_EQ(words.size(), 12u);
    for (std::size_t i = 0; i + 1 < words.size(); ++i) {
      auto [it, fresh] = next.emplace(words[i], words[i + 1]);
      EXPECT_EQ(it->second, words[i + 1]);
    }
  }
  EXPECT_EQ(docs, corpus::synth_pattern_corpus(30, 12, 9, 5));
  EXPECT_THROW(corpus::synth_pattern_corpus(1, 1, 1, 0), ConfigError);
}

}  // namespace
}  // namespace longdoc
