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

#include <gtest/gtest.h>

#include "longdoc/checkpoint.hpp"
#include "longdoc/errors.hpp"
#include "test_util.hpp"

namespace longdoc {
namespace {

tok::Tokenizer small_tokenizer(int vocab) {
  std::vector<std::string> tokens = tok::special_tokens();
  for (int i = static_cast<int>(tokens.size()); i < vocab; ++i) tokens.push_back("t" + std::to_string(i));
  return tok::Tokenizer(tok::Vocab(tokens));
}

ckpt::Checkpoint sample(bool sliding, std::optional<HeadConfig> head = HeadConfig{HeadKind::kSeqCls, 3}) {
  ckpt::Checkpoint c;
  c.state = ckpt::init_from_scratch(testing::tiny_config(sliding), head, 17);
  c.tokenizer = small_tokenizer(24);
  c.metadata = {{"strategy", "scratch"}, {"step", 3}};
  return c;
}

void expect_same_values(const EncoderState& a, const EncoderState& b) {
  ASSERT_EQ(a.params.size(), b.params.size());
  for (const auto& [name, p] : a.params) {
    const auto& q = b.at(name).value;
    ASSERT_EQ(p.value.shape(), q.shape()) << name;
    for (std::size_t i = 0; i < q.size(); ++i) {
      ASSERT_EQ(static_cast<float>(p.value.data()[i]), static_cast<float>(q.data()[i])) << name;
    }
  }
}

TEST(Checkpoint, RoundTrip) {
  testing::TempDir dir;
  for (bool sliding : {false, true}) {
    const auto c = sample(sliding);
    ckpt::save(c, dir.file("m.ckpt"));
    const auto back = ckpt::load(dir.file("m.ckpt"), c.state.config);
    EXPECT_EQ(back.state.config, c.state.config);
    EXPECT_EQ(back.state.head, c.state.head);
    EXPECT_EQ(back.tokenizer, c.tokenizer);
    EXPECT_EQ(back.metadata, c.metadata);
    expect_same_values(back.state, c.state);
    EXPECT_EQ(ckpt::serialize(back), ckpt::serialize(c));
  }
}

TEST(Checkpoint, HeaderIsReadable) {
  testing::TempDir dir;
  ckpt::save(sample(true), dir.file("m.ckpt"));
  const auto h = ckpt::read_header(dir.file("m.ckpt"));
  EXPECT_TRUE(h.contains("tensors"));
  EXPECT_TRUE(h["tensors"].contains("embeddings.word"));
}

TEST(Checkpoint, CorruptionKindsAreDistinguished) {
  testing::TempDir dir;
  const std::string bytes = ckpt::serialize(sample(false));
  const std::string path = dir.file("bad.ckpt");
  auto load_bytes = [&](const std::string& b) {
    testing::spit(path, b);
    return ckpt::load(path);
  };
  std::string b = bytes;
  b[1] = '?';
  EXPECT_THROW(load_bytes(b), FormatError);
  b = bytes;
  b[8] = 7;
  EXPECT_THROW(load_bytes(b), VersionError);
  EXPECT_THROW(load_bytes(bytes.substr(0, bytes.size() - 4)), TruncatedFileError);
  EXPECT_THROW(load_bytes(bytes.substr(0, 30)), TruncatedFileError);
  b = bytes;
  b.back() = static_cast<char>(b.back() ^ 0x5a);
  EXPECT_THROW(load_bytes(b), ChecksumError);
  EXPECT_THROW(load_bytes(bytes + "x"), FormatError);
  EXPECT_THROW(ckpt::load(dir.file("none.ckpt")), DataError);

  testing::spit(path, bytes);
  ModelConfig other = testing::tiny_config(false);
  other.hidden = 12;
  other.n_heads = 3;
  EXPECT_THROW(ckpt::load(path, other), ConfigMismatchError);
}

TEST(Checkpoint, SerializationIsDeterministic) {
  EXPECT_EQ(ckpt::serialize(sample(true)), ckpt::serialize(sample(true)));
}

TEST(Init, ScratchRules) {
  const auto s = ckpt::init_from_scratch(testing::tiny_config(false), HeadConfig{HeadKind::kMlm, 24}, 4);
  EXPECT_EQ(s.params.size(), parameter_shapes(s.config, s.head).size());
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (const auto& [name, p] : s.params) {
    for (Real v : testing::values(p.value)) {
      if (name.ends_with(".gamma")) {
        EXPECT_EQ(v, 1);
      } else if (name.ends_with(".beta") || name.ends_with(".bias")) {
        EXPECT_EQ(v, 0);
      } else {
        EXPECT_LE(std::abs(v), 0.04 + 1e-6);
        sum += v;
        sq += static_cast<double>(v) * v;
        ++n;
      }
    }
  }
  // Normal truncated at 2 sigma: sd = 0.02 * 0.8796.
  EXPECT_NEAR(sum / static_cast<double>(n), 0.0, 0.002);
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(n)), 0.02 * 0.8796, 0.001);
  const auto again = ckpt::init_from_scratch(s.config, s.head, 4);
  expect_same_values(s, again);
  const auto other = ckpt::init_from_scratch(s.config, s.head, 5);
  EXPECT_NE(testing::values(other.at("embeddings.word").value), testing::values(s.at("embeddings.word").value));
}

TEST(Init, HeadSwapKeepsEncoder) {
  auto s = ckpt::init_from_scratch(testing::tiny_config(false), HeadConfig{HeadKind::kMlm, 24}, 4);
  const auto before = testing::values(s.at("layers.0.attention.query.weight").value);
  ckpt::init_head(s, HeadConfig{HeadKind::kTokenCls, 5}, 9);
  EXPECT_EQ(testing::values(s.at("layers.0.attention.query.weight").value), before);
  for (const auto& [name, p] : s.params) EXPECT_FALSE(name.starts_with("head.mlm."));
  EXPECT_EQ(s.params.size(), parameter_shapes(s.config, s.head).size());
}

TEST(Convert, CopiesTilesAndRedrawsTheMlmHead) {
  ckpt::Checkpoint src;
  src.state = testing::random_state(testing::tiny_config(false), HeadConfig{HeadKind::kMlm, 24}, 3);
  src.tokenizer = small_tokenizer(24);
  const auto out = ckpt::convert_bert_to_longformer(src, 6, 11);
  EXPECT_TRUE(out.state.config.sliding());
  EXPECT_EQ(out.state.config.window, 6);
  EXPECT_EQ(out.tokenizer, src.tokenizer);

  const Tensor& pos = out.state.at("embeddings.position").value;
  const Tensor& from = src.state.at("embeddings.position").value;
  ASSERT_EQ(pos.rows(), 4096u);
  for (std::size_t i = 0; i < 4096; i += 37) {
    for (std::size_t c = 0; c < pos.cols(); ++c) EXPECT_EQ(pos(i, c), from(i % 512, c));
  }
  for (const auto& [name, p] : out.state.params) {
    if (name == "embeddings.position" || name.starts_with("head.mlm.")) continue;
    std::string source = name;
    if (auto at = name.find("attention.global_"); at != std::string::npos) source.replace(at, 17, "attention.");
    EXPECT_EQ(testing::values(p.value), testing::values(src.state.at(source).value)) << name;
  }
  EXPECT_NE(testing::values(out.state.at("head.mlm.decoder.weight").value),
            testing::values(src.state.at("head.mlm.decoder.weight").value));
  expect_same_values(out.state, ckpt::convert_bert_to_longformer(src, 6, 11).state);
}

TEST(Convert, RejectsWrongGeometry) {
  const auto longformer = sample(true);
  EXPECT_THROW(ckpt::convert_bert_to_longformer(longformer, 4, 0), ConversionError);
  auto broken = sample(false);
  broken.state.params.erase("layers.1.ffn.in.weight");
  EXPECT_THROW(ckpt::convert_bert_to_longformer(broken, 4, 0), ConversionError);
  EXPECT_THROW(ckpt::init_continual(sample(false)), ConversionError);
  const auto cont = ckpt::init_continual(longformer);
  expect_same_values(cont.state, longformer.state);
  EXPECT_EQ(cont.tokenizer, longformer.tokenizer);
}

}  // namespace
}  // namespace longdoc
