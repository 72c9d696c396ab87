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
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "longdoc/checkpoint.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/finetune.hpp"
#include "test_util.hpp"

namespace longdoc {
namespace {

using data::TaskKind;

tok::Tokenizer tokenizer_for(const std::vector<data::TaskRecord>& records, std::size_t size = 120) {
  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(data::record_text(r));
  tok::TrainOptions o;
  o.target_size = size;
  return tok::train_wordpiece(texts, o);
}

ModelConfig small_config(bool sliding, int vocab) {
  ModelConfig c = testing::tiny_config(sliding, vocab);
  c.hidden = 32;
  c.n_heads = 2;
  c.ffn_dim = 64;
  c.window = 16;
  return c;
}

TEST(Template, TrimsTheLongestSegment) {
  EXPECT_EQ(train::sequence_template({{10, 11}, {12}}, 16), (std::vector<TokenId>{2, 10, 11, 3, 12, 5}));
  EXPECT_EQ(train::sequence_template({{10, 11, 12, 13}, {20, 21}}, 6), (std::vector<TokenId>{2, 10, 3, 20, 21, 5}));
  const auto mcqa = train::sequence_template({{11}, {12}, {13}, {14}, {15}, {16}}, 100);
  EXPECT_EQ(mcqa.size(), 13u);
  EXPECT_EQ(std::count(mcqa.begin(), mcqa.end(), 3), 5);
  EXPECT_THROW(train::sequence_template({{1}, {2}}, 3), ConfigError);
}

TEST(LabelSpace, SortedAndPerKind) {
  auto records = data::synth_generate(TaskKind::kMcqa, 40, 1);
  const auto labels = train::build_label_space(TaskKind::kMcqa, records);
  EXPECT_TRUE(std::is_sorted(labels.labels.begin(), labels.labels.end()));
  for (const auto& r : records) EXPECT_GE(labels.index(r.correct), 0);
  EXPECT_EQ(labels.index("nope"), -1);
  EXPECT_EQ(train::head_for(TaskKind::kMcqa, labels).kind, HeadKind::kSeqCls);
  EXPECT_EQ(train::head_for(TaskKind::kNer, labels).kind, HeadKind::kTokenCls);
  EXPECT_EQ(train::head_for(TaskKind::kSts, {}).n_labels, 1);
  EXPECT_THROW(train::build_label_space(TaskKind::kMulticlass, {}), ConfigError);
}

TEST(Inputs, TokenTasksByGeometry) {
  const auto records = data::synth_generate(TaskKind::kNer, 20, 4);
  const auto t = tokenizer_for(records, 40);
  const auto labels = train::build_label_space(TaskKind::kNer, records);
  for (const auto& r : records) {
    const auto doc = train::build_inputs(r, 0, t, small_config(true, 40), labels);
    const auto sent = train::build_inputs(r, 0, t, small_config(false, 40), labels);
    EXPECT_EQ(doc.size(), 1u);
    EXPECT_EQ(sent.size(), r.sentence_starts.size());
    std::size_t words = 0;
    for (const auto& in : sent) {
      EXPECT_EQ(in.word_begin, words);
      words += in.word_first.size();
      EXPECT_EQ(in.ids.front(), 2);
      EXPECT_EQ(in.ids.back(), 5);
      std::size_t labelled = 0;
      for (std::size_t k = 0; k < in.ids.size(); ++k) labelled += in.token_labels[k] >= 0;
      EXPECT_EQ(labelled, in.word_first.size());
      for (std::size_t k = 0; k < in.word_first.size(); ++k) {
        EXPECT_EQ(in.token_labels[in.word_first[k]], labels.index(r.tags[in.word_begin + k]));
      }
    }
    EXPECT_EQ(words, r.tokens.size());
  }
}

TEST(Inputs, LongUnitsAreSplitAtWordBoundaries) {
  data::TaskRecord r;
  r.kind = TaskKind::kPos;
  for (int i = 0; i < 700; ++i) {
    r.tokens.push_back(i % 2 ? "noun" : "verb");
    r.tags.push_back(i % 2 ? "NOUN" : "VERB");
  }
  data::finalize_record(r, "test");
  const auto t = tokenizer_for({r}, 20);
  const auto labels = train::build_label_space(TaskKind::kPos, {r});
  const auto inputs = train::build_inputs(r, 3, t, small_config(false, 20), labels);
  ASSERT_EQ(inputs.size(), 2u);
  EXPECT_EQ(inputs[0].word_first.size(), 350u);
  EXPECT_EQ(inputs[1].word_begin, 350u);
  for (const auto& in : inputs) {
    EXPECT_LE(in.ids.size(), 512u);
    EXPECT_EQ(in.record, 3u);
  }
}

TEST(Inputs, SequenceTargets) {
  const auto ml = data::synth_generate(TaskKind::kMultilabel, 10, 2);
  const auto t = tokenizer_for(ml, 60);
  const auto labels = train::build_label_space(TaskKind::kMultilabel, ml);
  const auto in = train::build_inputs(ml[0], 0, t, small_config(false, 60), labels);
  ASSERT_EQ(in.size(), 1u);
  ASSERT_EQ(in[0].targets.size(), labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool on = std::count(ml[0].labels.begin(), ml[0].labels.end(), labels.labels[i]) > 0;
    EXPECT_EQ(in[0].targets[i], on ? 1 : 0);
  }
  const auto sts = data::synth_generate(TaskKind::kSts, 1, 2);
  const auto sin = train::build_inputs(sts[0], 0, tokenizer_for(sts, 30), small_config(false, 30), {});
  EXPECT_EQ(sin[0].targets, std::vector<Real>{static_cast<Real>(sts[0].score)});
  EXPECT_EQ(std::count(sin[0].ids.begin(), sin[0].ids.end(), 3), 1);
}

TEST(Evaluate, MetricPerKindAndUnseenLabels) {
  auto gold = data::synth_generate(TaskKind::kMulticlass, 4, 1);
  train::Predictions pred;
  for (const auto& r : gold) pred.labels.push_back(r.label);
  pred.labels[0] = "never-seen";
  const auto report = train::evaluate("t", TaskKind::kMulticlass, gold, pred);
  EXPECT_EQ(report.metric, "weighted_f1");
  EXPECT_NEAR(report.extra.at("accuracy"), 0.75, 1e-15);
  EXPECT_FALSE(train::is_correct(gold[0], pred, 0));
  EXPECT_TRUE(train::is_correct(gold[1], pred, 1));

  auto sts = data::synth_generate(TaskKind::kSts, 3, 1);
  train::Predictions sp;
  for (const auto& r : sts) sp.scores.push_back(r.score + 0.4);
  EXPECT_EQ(train::evaluate("s", TaskKind::kSts, sts, sp).metric, "edrm");
  EXPECT_TRUE(train::is_correct(sts[0], sp, 0));

  const auto pos = data::synth_generate(TaskKind::kPos, 3, 1);
  train::Predictions pp;
  for (const auto& r : pos) pp.tags.push_back(r.tags);
  const auto pr = train::evaluate("p", TaskKind::kPos, pos, pp);
  EXPECT_EQ(pr.metric, "token_f1");
  EXPECT_EQ(pr.value, 1.0);
  const auto mc = data::synth_generate(TaskKind::kMcqa, 3, 1);
  train::Predictions mp;
  for (const auto& r : mc) {
    mp.labels.push_back(r.correct);
    metrics::LabelSet s;
    for (char c : r.correct) s.push_back(std::string(1, c));
    mp.label_sets.push_back(s);
  }
  const auto mr = train::evaluate("m", TaskKind::kMcqa, mc, mp);
  EXPECT_EQ(mr.metric, "hamming");
  EXPECT_EQ(mr.value, 1.0);
  EXPECT_EQ(mr.extra.at("emr"), 1.0);
}

ckpt::Checkpoint base_model(const std::vector<data::TaskRecord>& records, bool sliding) {
  ckpt::Checkpoint c;
  c.tokenizer = tokenizer_for(records, 100);
  c.state = ckpt::init_from_scratch(small_config(sliding, static_cast<int>(c.tokenizer.vocab().size())),
                                    std::nullopt, 5);
  return c;
}

TEST(Finetune, OverfitsOneExample) {
  auto records = data::synth_generate(TaskKind::kNer, 1, 6);
  train::Task task{"one", TaskKind::kNer, {records, {}, records}};
  train::FinetuneConfig config;
  config.epochs = 40;
  config.batch_size = 1;
  config.lr = 1e-2;
  const auto r = train::finetune(task, base_model(records, true), config);
  EXPECT_EQ(r.test.value, 1.0);
  EXPECT_EQ(r.test_predictions.tags.at(0), records[0].tags);
}

TEST(Finetune, LearnsSeparableTaskDeterministically) {
  data::SynthOptions o;
  o.min_words = 8;
  o.max_words = 16;
  const auto records = data::synth_generate(TaskKind::kMulticlass, 150, 2, o);
  const auto splits = data::split(records, {0.7, 0.1, 0.2, 1});
  train::Task task{"kw", TaskKind::kMulticlass, splits};
  train::FinetuneConfig config;
  config.epochs = 10;
  config.batch_size = 4;
  config.lr = 3e-3;
  config.seed = 12;
  const auto init = base_model(records, true);
  const auto a = train::finetune(task, init, config);
  EXPECT_GT(a.test.value, 0.95);
  EXPECT_FALSE(a.trace.empty());
  EXPECT_EQ(a.trace.back().split, "test");
  config.threads = 2;
  const auto b = train::finetune(task, init, config);
  EXPECT_EQ(train::to_json(a), train::to_json(b));
}

}  // namespace
}  // namespace longdoc
