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

#include <atomic>
#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "longdoc/checkpoint.hpp"
#include "longdoc/corpus.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/training.hpp"
#include "test_util.hpp"

namespace longdoc {
namespace {

TEST(Schedule, PiecewiseLinearAtSamplePoints) {
  const train::Schedule s{5e-5, 100, 1000};
  EXPECT_EQ(train::lr_at(0, s), 0.0);
  EXPECT_EQ(train::lr_at(100, s), 5e-5);
  EXPECT_EQ(train::lr_at(1000, s), 0.0);
  EXPECT_NEAR(train::lr_at(550, s), 2.5e-5, 1e-18);
  double peak = 0;
  for (std::size_t step = 0; step <= 1000; ++step) {
    const double expected = step <= 100 ? 5e-5 * static_cast<double>(step) / 100.0
                                        : 5e-5 * static_cast<double>(1000 - step) / 900.0;
    ASSERT_NEAR(train::lr_at(step, s), expected, 1e-18) << step;
    peak = std::max(peak, train::lr_at(step, s));
  }
  EXPECT_EQ(peak, 5e-5);
  EXPECT_EQ(train::lr_at(0, train::Schedule{1e-3, 0, 10}), 1e-3);
  EXPECT_THROW((train::Schedule{1e-3, 11, 10}.validate()), ConfigError);
  EXPECT_THROW((train::Schedule{1e-3, 0, 0}.validate()), ConfigError);
}

TEST(AdamW, HandComputedFirstSteps) {
  ParameterMap params;
  params.emplace("w", Parameter(Tensor({2, 1})));
  params.emplace("b", Parameter(Tensor({1})));
  params.at("w").value.data()[0] = 1.0f;
  params.at("w").value.data()[1] = -2.0f;
  params.at("b").value.data()[0] = 0.5f;
  train::AdamWConfig config;
  config.clip_norm = 0.0;
  train::AdamW opt(config);
  params.at("w").grad.data()[0] = 0.3f;
  params.at("w").grad.data()[1] = -0.1f;
  params.at("b").grad.data()[0] = 2.0f;
  opt.step(params, 0.1);
  // First step: m / (1 - b1) = g, v / (1 - b2) = g^2, so the update is sign(g) (up to eps).
  EXPECT_NEAR(params.at("w").value.data()[0], 1.0 - 0.1 * (1.0 + 0.01 * 1.0), 1e-6);
  EXPECT_NEAR(params.at("w").value.data()[1], -2.0 - 0.1 * (-1.0 + 0.01 * -2.0), 1e-6);
  EXPECT_NEAR(params.at("b").value.data()[0], 0.5 - 0.1, 1e-6);

  // Second step with g = 0 for b: m = 0.9 * 0.1 * 2, v = 0.999 * 0.001 * 4.
  params.at("b").grad.data()[0] = 0.0f;
  opt.step(params, 0.1);
  const double m = 0.9 * 0.1 * 2.0 / (1 - 0.81);
  const double v = 0.999 * 0.001 * 4.0 / (1 - 0.999 * 0.999);
  EXPECT_NEAR(params.at("b").value.data()[0], 0.4 - 0.1 * m / (std::sqrt(v) + 1e-8), 1e-6);
  EXPECT_EQ(opt.steps(), 2u);
}

TEST(AdamW, ClipsGlobalNorm) {
  ParameterMap params;
  params.emplace("b", Parameter(Tensor({2})));
  params.at("b").grad.data()[0] = 3.0f;
  params.at("b").grad.data()[1] = 4.0f;
  train::AdamW opt;
  EXPECT_NEAR(opt.step(params, 0.0), 5.0, 1e-12);
  params.at("b").grad.data()[0] = NAN;
  EXPECT_THROW(opt.step(params, 0.1), NumericError);
}

TEST(AdamW, SmallStepDecreasesConvexLoss) {
  ParameterMap params;
  params.emplace("w", Parameter(Tensor({3})));
  const std::vector<double> target{0.5, -1.0, 2.0};
  auto loss = [&] {
    double l = 0;
    for (int i = 0; i < 3; ++i) {
      const double d = params.at("w").value.data()[i] - target[i];
      l += d * d;
    }
    return l;
  };
  const double before = loss();
  for (int i = 0; i < 3; ++i) {
    params.at("w").grad.data()[i] = static_cast<Real>(2 * (params.at("w").value.data()[i] - target[i]));
  }
  train::AdamW opt;
  opt.step(params, 1e-6);
  EXPECT_LT(loss(), before);
}

struct MlmFixture {
  ModelConfig config;
  std::vector<corpus::PackedSequence> data;

  MlmFixture() {
    const auto docs = corpus::synth_pattern_corpus(20, 30, 12, 1);
    tok::TrainOptions o;
    o.target_size = 40;
    const auto t = tok::train_wordpiece(docs, o);
    data = corpus::pack_corpus(docs, t, corpus::PackingConfig{24, 4});
    config = testing::tiny_config(true, static_cast<int>(t.vocab().size()));
  }

  EncoderState init(std::uint64_t seed = 3) const {
    return ckpt::init_from_scratch(config, HeadConfig{HeadKind::kMlm, config.vocab_size}, seed);
  }
};

TEST(Pretrain, InitialLossNearUniformEntropy) {
  const MlmFixture f;
  train::TrainConfig c;
  c.schedule = {1e-3, 0, 1};
  c.batch_size = 8;
  const auto r = train::pretrain_mlm(f.init(), f.data, c);
  ASSERT_EQ(r.trace.size(), 1u);
  const double ln_v = std::log(static_cast<double>(f.config.vocab_size));
  EXPECT_NEAR(r.trace[0].loss, ln_v, 0.1 * ln_v);
}

TEST(Pretrain, ZeroLearningRateLeavesParametersUnchanged) {
  const MlmFixture f;
  train::TrainConfig c;
  c.schedule = {0.0, 0, 3};
  c.batch_size = 2;
  const auto init = f.init();
  const auto r = train::pretrain_mlm(init, f.data, c);
  for (const auto& [name, p] : init.params) {
    EXPECT_EQ(testing::values(r.state.at(name).value), testing::values(p.value)) << name;
  }
}

TEST(Pretrain, DeterministicAndLearns) {
  const MlmFixture f;
  train::TrainConfig c;
  c.schedule = {3e-3, 5, 60};
  c.batch_size = 4;
  c.seed = 8;
  std::size_t callbacks = 0;
  const auto a = train::pretrain_mlm(f.init(), f.data, c, [&](const train::StepLog&) { ++callbacks; });
  const auto b = train::pretrain_mlm(f.init(), f.data, c);
  EXPECT_EQ(callbacks, 60u);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].loss, b.trace[i].loss);
  for (const auto& [name, p] : a.state.params) {
    EXPECT_EQ(testing::values(p.value), testing::values(b.state.at(name).value)) << name;
  }
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    first += a.trace[i].loss;
    last += a.trace[a.trace.size() - 1 - i].loss;
  }
  EXPECT_LT(last, first);
}

TEST(Pretrain, NonFiniteLossNamesTheStep) {
  const MlmFixture f;
  train::TrainConfig c;
  c.schedule = {1e-3, 0, 2};
  auto init = f.init();
  init.at("head.mlm.decoder.bias").value.data()[7] = INFINITY;
  try {
    train::pretrain_mlm(init, f.data, c);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
  EXPECT_THROW(train::pretrain_mlm(f.init(), {}, c), ConfigError);
}

TEST(Pretrain, EvaluationIsThreadIndependent) {
  const MlmFixture f;
  const auto s = f.init();
  const auto one = train::evaluate_mlm(s, f.data, 4, {}, 1);
  const auto three = train::evaluate_mlm(s, f.data, 4, {}, 3);
  EXPECT_EQ(one.loss, three.loss);
  EXPECT_EQ(one.accuracy, three.accuracy);
  EXPECT_GT(one.positions, 0u);
}

train::GridCell cell(double lr, std::vector<std::optional<double>> metrics) {
  train::GridCell c;
  c.lr = lr;
  for (auto m : metrics) {
    train::RunOutcome r;
    r.metric = m;
    c.runs.push_back(r);
  }
  return c;
}

TEST(Grid, SelectionByMeanWithSmallestLrTieBreak) {
  auto g = train::select_grid({cell(1e-4, {0.5, 0.7}), cell(2e-5, {0.6, 0.55}), cell(5e-5, {0.8, 0.2})});
  EXPECT_EQ(g.selected_lr, 1e-4);
  EXPECT_NEAR(g.selected_mean, 0.6, 1e-15);
  g = train::select_grid({cell(1e-4, {0.5}), cell(1e-5, {0.5}), cell(5e-5, {0.5})});
  EXPECT_EQ(g.selected_lr, 1e-5);
  // Failed runs are left out of the mean.
  g = train::select_grid({cell(1e-4, {std::nullopt, 0.9}), cell(1e-5, {std::nullopt, std::nullopt})});
  EXPECT_EQ(g.selected_lr, 1e-4);
  EXPECT_EQ(g.selected_mean, 0.9);
  EXPECT_FALSE(g.cells[1].mean);
  EXPECT_EQ(g.selected_metrics(), std::vector<double>{0.9});
  EXPECT_THROW(train::select_grid({cell(1e-4, {std::nullopt})}), GridError);
}

TEST(Grid, RunnerCoversEveryLrAndSeed) {
  train::GridSpec spec;
  spec.seed = 4;
  std::atomic<int> calls = 0;
  auto runner = [&](double lr, std::uint64_t seed) {
    ++calls;
    train::RunOutcome r;
    r.seed = seed;
    if (lr == 1e-5 && seed == spec.run_seed(0)) throw DataError("boom");
    r.metric = lr * 1e4 + static_cast<double>(seed % 7) * 1e-3;
    return r;
  };
  const auto one = train::run_grid(runner, spec, 1);
  const auto four = train::run_grid(runner, spec, 4);
  EXPECT_EQ(calls, 32);
  EXPECT_EQ(train::to_json(one), train::to_json(four));
  EXPECT_EQ(one.selected_lr, 1e-4);
  ASSERT_EQ(one.cells.size(), 4u);
  for (const auto& c : one.cells) {
    ASSERT_EQ(c.runs.size(), 4u);
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(c.runs[r].seed, spec.run_seed(r));
  }
  EXPECT_FALSE(one.cells[1].runs[0].metric);
  EXPECT_NE(one.cells[1].runs[0].error.find("boom"), std::string::npos);

  train::GridSpec single{{3e-5}, 1, 0};
  EXPECT_EQ(train::run_grid(runner, single).cells.size(), 1u);
  EXPECT_THROW((train::GridSpec{{}, 1, 0}.validate()), ConfigError);
  EXPECT_THROW((train::GridSpec{{1e-5}, 0, 0}.validate()), ConfigError);
}

TEST(Report, StarsOnlyForSignificantDifferences) {
  std::vector<train::ReportCell> cells{
      {"ner", "a", train::select_grid({cell(1e-5, {0.90, 0.91, 0.92, 0.91})})},
      {"ner", "b", train::select_grid({cell(1e-5, {0.50, 0.52, 0.51, 0.50})})},
      {"ner", "c", train::select_grid({cell(1e-5, {0.90, 0.91, 0.92, 0.91})})},
      {"cls", "a", train::select_grid({cell(1e-5, {1.0, 1.0, 1.0, 1.0})})},
      {"cls", "b", train::select_grid({cell(1e-5, {1.0, 1.0, 1.0, 1.0})})},
      {"cls", "c", train::select_grid({cell(1e-5, {1.0, 1.0, 1.0, 1.0})})},
  };
  const auto report = train::compare(cells);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_EQ(report.rows[0].best_model, "a");
  EXPECT_TRUE(report.rows[0].significant.at("b"));
  EXPECT_FALSE(report.rows[0].significant.at("c"));
  for (const auto& [m, s] : report.rows[1].significant) EXPECT_FALSE(s) << m;
  const std::string md = train::render_markdown(report);
  EXPECT_NE(md.find("| ner | **91.00** | 50.75* | 91.00 |"), std::string::npos) << md;
  EXPECT_NE(md.find("| cls | **100.00** | 100.00 | 100.00 |"), std::string::npos) << md;
}

TEST(Config, JsonRoundTrip) {
  train::TrainConfig c;
  c.schedule = {2e-4, 7, 90};
  c.batch_size = 3;
  c.grad_accum_steps = 2;
  c.seed = 11;
  c.strategy = train::Strategy::kContinual;
  c.optimizer.weight_decay = 0.1;
  c.mlm.select_rate = 0.2;
  const nlohmann::json j = c;
  EXPECT_EQ(nlohmann::json(j.get<train::TrainConfig>()), j);
  EXPECT_EQ(c.effective_batch(), 6u);
  EXPECT_THROW(train::strategy_from_string("warm"), ConfigError);
}

}  // namespace
}  // namespace longdoc
