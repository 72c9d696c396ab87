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

#include <gtest/gtest.h>

#include "longdoc/checkpoint.hpp"
#include "longdoc/encoder.hpp"
#include "longdoc/errors.hpp"
#include "test_util.hpp"

namespace longdoc {
namespace {

using testing::random_state;
using testing::tiny_config;

std::size_t closed_form_count(const ModelConfig& c) {
  const std::size_t V = c.vocab_size, H = c.hidden, F = c.ffn_dim, P = c.max_positions,
                    L = c.n_layers;
  const std::size_t projections = c.sliding() ? 7 : 4;
  const std::size_t embeddings = V * H + P * H + H + 2 * H;
  const std::size_t layer = projections * (H * H + H) + 2 * H + (H * F + F) + (F * H + H) + 2 * H;
  return embeddings + L * layer + H * H + H;
}

TEST(ModelConfig, ParameterCountsFollowTheArchitecture) {
  ModelConfig bert;
  bert.vocab_size = 32000;
  bert.max_positions = ModelConfig::kBertPositions;
  EXPECT_EQ(parameter_count(bert, std::nullopt), closed_form_count(bert));
  ModelConfig longformer = bert;
  longformer.max_positions = ModelConfig::kLongformerPositions;
  EXPECT_EQ(parameter_count(longformer, std::nullopt), closed_form_count(longformer));
  // Global projections and the longer position table.
  EXPECT_EQ(parameter_count(longformer, std::nullopt) - parameter_count(bert, std::nullopt),
            12u * 3 * (768 * 768 + 768) + (4096 - 512) * 768);
  const HeadConfig mlm{HeadKind::kMlm, 32000};
  EXPECT_EQ(parameter_count(bert, mlm) - parameter_count(bert, std::nullopt),
            768u * 768 + 768 + 2 * 768 + 768 * 32000 + 32000);
}

TEST(ModelConfig, ValidationRejectsBadValues) {
  ModelConfig c = tiny_config(true);
  EXPECT_NO_THROW(c.validate());
  c.max_positions = 1024;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config(true);
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config(true);
  c.window = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config(true);
  c.vocab_size = 6;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ModelConfig, JsonRoundTrip) {
  ModelConfig c = tiny_config(true);
  c.dropout = 0.25;
  const nlohmann::json j = c;
  EXPECT_EQ(j.get<ModelConfig>(), c);
}

TEST(Encoder, OutputShapeAndDeterminism) {
  const EncoderState s = random_state(tiny_config(true), std::nullopt, 1);
  const std::vector<TokenId> ids{2, 7, 8, 9, 10, 11, 5};
  const Tensor a = encode_hidden(s, ids, cls_globals());
  const Tensor b = encode_hidden(s, ids, cls_globals());
  EXPECT_EQ(a.shape(), (Shape{7, 8}));
  EXPECT_EQ(a, b);
  EXPECT_TRUE(a.all_finite());
}

TEST(Encoder, RejectsOverlongInputs) {
  const EncoderState s = random_state(tiny_config(false), std::nullopt, 1);
  const std::vector<TokenId> ids(513, 7);
  EXPECT_THROW(encode_hidden(s, ids, cls_globals()), TruncationError);
}

TEST(Encoder, PaddingDoesNotLeakIntoRealTokens) {
  for (bool sliding : {false, true}) {
    const EncoderState s = random_state(tiny_config(sliding), std::nullopt, 2);
    std::vector<TokenId> ids{2, 7, 8, 9, 5, 0, 0, 0};
    const std::vector<std::uint8_t> valid{1, 1, 1, 1, 1, 0, 0, 0};
    const Tensor a = encode(s, ids, cls_globals(), valid).hidden;
    ids[6] = 13;
    ids[7] = 17;
    const Tensor b = encode(s, ids, cls_globals(), valid).hidden;
    const Tensor c = encode_hidden(s, std::vector<TokenId>{2, 7, 8, 9, 5}, cls_globals());
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t d = 0; d < 8; ++d) {
        EXPECT_EQ(a(i, d), b(i, d));
        EXPECT_NEAR(a(i, d), c(i, d), 1e-5);
      }
    }
  }
}

TEST(Encoder, DropoutOnlyInTrainingAndSeeded) {
  ModelConfig config = tiny_config(true);
  config.dropout = 0.3;
  const EncoderState s = random_state(config, std::nullopt, 3);
  const std::vector<TokenId> ids{2, 7, 8, 9, 10, 5};
  ForwardOptions train;
  train.train = true;
  train.dropout_seed = 5;
  const Tensor eval = encode_hidden(s, ids, cls_globals());
  const Tensor t1 = encode(s, ids, cls_globals(), {}, train).hidden;
  const Tensor t2 = encode(s, ids, cls_globals(), {}, train).hidden;
  train.dropout_seed = 6;
  const Tensor t3 = encode(s, ids, cls_globals(), {}, train).hidden;
  EXPECT_EQ(t1, t2);
  EXPECT_NE(t1, t3);
  EXPECT_NE(t1, eval);
}

TEST(Encoder, WideWindowSlidingEqualsFullWithCopiedGlobals) {
  ModelConfig full = tiny_config(false);
  const EncoderState bert = random_state(full, std::nullopt, 4);
  const ckpt::Checkpoint src{bert, tok::Tokenizer(), {}};
  // Conversion copies the local projections into the global ones; with a
  // window wider than the input both geometries see every key.
  const EncoderState longf = ckpt::convert_bert_to_longformer(src, 64, 1).state;
  const std::vector<TokenId> ids{2, 7, 8, 9, 10, 11, 12, 13, 14, 5};
  EXPECT_LT(max_abs_diff(encode_hidden(bert, ids, cls_globals()), encode_hidden(longf, ids, cls_globals())),
            1e-5);
}

TEST(Encoder, CapturedClsAttentionRowsSumToOne) {
  for (bool sliding : {false, true}) {
    const EncoderState s = random_state(tiny_config(sliding), std::nullopt, 5);
    const std::vector<TokenId> ids{2, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 5};
    ForwardOptions options;
    options.capture_attention = true;
    const EncodeResult r = encode(s, ids, cls_globals(), {}, options);
    ASSERT_EQ(r.cls_attention.shape(), (Shape{2, 12}));
    for (std::size_t h = 0; h < 2; ++h) {
      double sum = 0;
      for (Real v : r.cls_attention.row(h)) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-5);
    }
  }
}

TEST(Heads, OutputShapes) {
  const ModelConfig c = tiny_config(true);
  const std::vector<TokenId> ids{2, 7, 8, 9, 5};
  const std::vector<int> positions{1, 3};
  for (auto [kind, labels, rows, cols] :
       {std::tuple{HeadKind::kTokenCls, 4, 5, 4}, {HeadKind::kSeqCls, 3, 1, 3},
        {HeadKind::kStsReg, 1, 1, 1}, {HeadKind::kMlm, 24, 2, 24}}) {
    const EncoderState s = random_state(c, HeadConfig{kind, labels}, 6);
    const Tensor h = encode_hidden(s, ids, cls_globals());
    const HeadOutput out = apply_head(s, h, positions);
    EXPECT_EQ(out.logits.shape(), (Shape{std::size_t(rows), std::size_t(cols)}));
  }
}

}  // namespace
}  // namespace longdoc
