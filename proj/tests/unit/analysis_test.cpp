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

#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "longdoc/analysis.hpp"
#include "longdoc/checkpoint.hpp"
#include "longdoc/errors.hpp"
#include "test_util.hpp"

namespace longdoc {
namespace {

data::TaskRecord doc_of(std::size_t words, const std::string& word) {
  data::TaskRecord r;
  r.kind = data::TaskKind::kMulticlass;
  std::string text;
  for (std::size_t i = 0; i < words; ++i) text += (i ? " " : "") + word;
  r.texts = {text};
  r.label = "x";
  data::finalize_record(r, "test");
  return r;
}

tok::Tokenizer ab_tokenizer() {
  return tok::Tokenizer(tok::Vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[EOS]", "a", "##b"}));
}

TEST(Threshold, OneAndTwoTokensPerWord) {
  const auto t = ab_tokenizer();
  std::vector<data::TaskRecord> one, two;
  for (std::size_t n : {100, 512, 513, 600}) one.push_back(doc_of(n, "a"));
  for (std::size_t n : {100, 256, 257, 300}) two.push_back(doc_of(n, "ab"));
  EXPECT_EQ(analysis::length_threshold(one, t), 512u);
  EXPECT_EQ(analysis::length_threshold(two, t), 256u);
  EXPECT_EQ(analysis::length_threshold({doc_of(40, "ab"), doc_of(7, "a")}, t), 40u);
}

TEST(Threshold, AddingShorterDocumentsNeverRaisesIt) {
  const auto t = ab_tokenizer();
  Rng rng(2);
  std::vector<data::TaskRecord> records;
  for (int i = 0; i < 40; ++i) {
    records.push_back(doc_of(1 + rng.uniform_int(40), rng.uniform() < 0.5 ? "a" : "ab"));
    if (i < 10) continue;
    const std::size_t before = analysis::length_threshold(records, t, 30);
    auto extended = records;
    extended.push_back(doc_of(1 + rng.uniform_int(records.back().word_count), "ab"));
    EXPECT_LE(analysis::length_threshold(extended, t, 30), before);
  }
}

TEST(Buckets, CountsAndRates) {
  std::vector<std::size_t> words;
  std::vector<bool> correct;
  for (int i = 0; i < 78; ++i) {
    words.push_back(100);
    correct.push_back(i >= 11);
  }
  for (int i = 0; i < 30; ++i) {
    words.push_back(500);
    correct.push_back(i % 3 != 0);
  }
  const auto b = analysis::error_rate_by_length(words, correct, 388);
  EXPECT_EQ(b.short_docs.count + b.long_docs.count, 108u);
  EXPECT_EQ(b.short_docs.count, 78u);
  EXPECT_EQ(b.short_docs.errors, 11u);
  EXPECT_EQ(analysis::format_rate(b.short_docs.rate), "14.10");
  EXPECT_EQ(analysis::format_rate(b.long_docs.rate), "33.33");
  const auto j = analysis::to_json(b);
  EXPECT_EQ(j["short"]["count"], 78);
  EXPECT_EQ(j["threshold"], 388);

  const auto none = analysis::error_rate_by_length(std::vector<std::size_t>{10}, {true}, 388);
  EXPECT_EQ(none.short_docs.rate, 0.0);
  EXPECT_FALSE(none.long_docs.rate);
  EXPECT_EQ(analysis::format_rate(none.long_docs.rate), "-");
  EXPECT_THROW(analysis::error_rate_by_length(std::vector<std::size_t>{1, 2}, {true}, 5), AlignmentError);
}

TEST(Buckets, MultilabelErrorsAreInexactSets) {
  std::vector<data::TaskRecord> gold(2);
  for (auto& r : gold) {
    r.kind = data::TaskKind::kMultilabel;
    r.texts = {"a b"};
    r.labels = {"x", "y"};
    data::finalize_record(r, "test");
  }
  train::Predictions pred;
  pred.label_sets = {{"x", "y"}, {"x"}};
  const auto b = analysis::error_rate_by_length(gold, pred, 5);
  EXPECT_EQ(b.short_docs.errors, 1u);
}

TEST(Profile, UniformRowGivesFlatWordWeights) {
  Tensor row({1, 5});
  for (auto& v : row.data()) v = 0.2f;
  const std::vector<analysis::WordSpan> spans{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
  const auto w = analysis::word_weights(row, spans);
  ASSERT_EQ(w.size(), 4u);
  for (double v : w) EXPECT_NEAR(v, 0.2, 1e-7);
  const auto profile = analysis::average_profile({w}, 1);
  for (double v : profile.mean_weight) EXPECT_NEAR(v, 0.2, 1e-7);
  EXPECT_NEAR(analysis::attention_mass(row), 1.0, 1e-6);
}

TEST(Profile, SubwordsAreSummedPerWordAcrossHeads) {
  Tensor rows({2, 5});
  for (std::size_t i = 0; i < 5; ++i) {
    rows(0, i) = static_cast<Real>(0.1 * static_cast<double>(i));
    rows(1, i) = 0.2f;
  }
  const std::vector<analysis::WordSpan> spans{{0, 2}, {2, 3}};
  const auto w = analysis::word_weights(rows, spans);
  EXPECT_NEAR(w[0], 0.1 + 0.2 + 0.4, 1e-6);
  EXPECT_NEAR(w[1], 0.3 + 0.2, 1e-6);
}

TEST(Profile, AveragesOverDocumentsReachingEachPosition) {
  const auto p = analysis::average_profile({{1.0, 2.0, 3.0}, {3.0}, {}}, 2);
  EXPECT_EQ(p.mean_weight, (std::vector<double>{2.0, 2.0, 3.0}));
  EXPECT_EQ(p.doc_count, (std::vector<std::size_t>{2, 1, 1}));
  EXPECT_NEAR(analysis::leading_mass_share(p, 0.34), 4.0 / 7.0, 1e-12);
  const std::string csv = analysis::to_csv(p);
  EXPECT_EQ(csv.rfind("# ", 0), 0u);
  EXPECT_NE(csv.find("position,mean_weight,doc_count\n0,2"), std::string::npos) << csv;
}

EncoderState profile_model(bool sliding, int heads) {
  ModelConfig c = testing::tiny_config(sliding, 12);
  c.n_heads = heads;
  return testing::random_state(c, std::nullopt, 21);
}

TEST(Profile, EndToEndMassConservationAndCounts) {
  const auto t = ab_tokenizer();
  std::vector<std::string> texts;
  Rng rng(6);
  for (int d = 0; d < 12; ++d) {
    std::string s;
    const std::size_t n = 1 + rng.uniform_int(30);
    for (std::size_t i = 0; i < n; ++i) s += rng.uniform() < 0.5 ? "a " : "ab ";
    texts.push_back(s);
  }
  for (bool sliding : {false, true}) {
    const auto state = profile_model(sliding, 2);
    const auto docs = analysis::profile_documents(state, t, texts, 2);
    ASSERT_EQ(docs.size(), texts.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
      EXPECT_NEAR(docs[d].mass, 2.0, 1e-5);
      EXPECT_EQ(docs[d].weights.size(), tok::word_count(texts[d]));
      for (double v : docs[d].weights) EXPECT_GE(v, 0.0);
    }
    const auto profile = analysis::attention_profile(state, t, texts, 1);
    for (std::size_t i = 1; i < profile.doc_count.size(); ++i) {
      EXPECT_LE(profile.doc_count[i], profile.doc_count[i - 1]);
    }
    EXPECT_EQ(profile.doc_count.front(), texts.size());
    EXPECT_TRUE(profile.warnings.empty());
  }
}

TEST(Profile, ZeroScoresGiveUniformAttention) {
  auto state = profile_model(true, 1);
  for (auto& [name, p] : state.params) {
    if (name.find("query") != std::string::npos || name.find("key") != std::string::npos) p.value.fill(0);
  }
  // [CLS] a a a a [EOS]: six keys.
  const auto docs = analysis::profile_documents(state, ab_tokenizer(), {"a a a a"});
  for (double v : docs[0].weights) EXPECT_NEAR(v, 1.0 / 6.0, 1e-6);
}

TEST(Profile, LongDocumentsAreTruncatedWithWarning) {
  const auto state = profile_model(false, 2);
  std::string text;
  for (int i = 0; i < 600; ++i) text += "a ";
  const auto profile = analysis::attention_profile(state, ab_tokenizer(), {text});
  EXPECT_EQ(profile.mean_weight.size(), 510u);
  EXPECT_EQ(profile.warnings.size(), 1u);
}

}  // namespace
}  // namespace longdoc
