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

// Finite-difference checks. Built against the double-precision core so
// that central differences are not dominated by rounding.

#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "longdoc/attention.hpp"
#include "longdoc/encoder.hpp"
#include "longdoc/gradcheck.hpp"
#include "longdoc/ops.hpp"
#include "test_util.hpp"

namespace longdoc {
namespace {

using testing::random_state;
using testing::random_tensor;
using testing::tiny_config;

static_assert(sizeof(Real) == sizeof(double));

constexpr double kStep = 1e-3;
constexpr double kTolerance = 1e-3;

// Scalar read-out <out, w> with a fixed random w.
double project(const Tensor& out, const Tensor& w) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) s += double(out[i]) * w[i];
  return s;
}

TEST(OpGradients, LinearGeluLayerNorm) {
  Rng rng(11);
  Parameter x(random_tensor({5, 6}, rng)), w(random_tensor({6, 4}, rng)), b(random_tensor({4}, rng));
  Parameter gamma(random_tensor({4}, rng)), beta(random_tensor({4}, rng));
  const Tensor probe = random_tensor({5, 4}, rng);
  LossFn loss = [&](bool want) {
    const Tensor h = linear(x.value, w.value, b.value);
    const Tensor g = gelu(h);
    LayerNormCache cache;
    const Tensor y = layer_norm(g, gamma.value, beta.value, 1e-5, &cache);
    if (want) {
      const Tensor dg = layer_norm_backward(g, gamma.value, cache, probe, gamma.grad, beta.grad);
      const Tensor dh = gelu_backward(h, dg);
      add_inplace(x.grad, linear_backward(x.value, w.value, dh, w.grad, &b.grad));
    }
    return project(y, probe);
  };
  std::vector<Parameter*> params{&x, &w, &b, &gamma, &beta};
  EXPECT_LT(finite_diff_check(loss, params, kStep).max_rel_error, 1e-5);
}

TEST(GradCheck, DetectsACorruptedGradient) {
  Rng rng(4);
  Parameter x(random_tensor({3, 5}, rng)), w(random_tensor({5, 2}, rng)), b(random_tensor({2}, rng));
  const Tensor probe = random_tensor({3, 2}, rng);
  LossFn loss = [&](bool want) {
    const Tensor y = gelu(linear(x.value, w.value, b.value));
    if (want) {
      const Tensor dh = gelu_backward(linear(x.value, w.value, b.value), probe);
      add_inplace(x.grad, linear_backward(x.value, w.value, dh, w.grad, &b.grad));
      w.grad[3] += 1.0;
    }
    return project(y, probe);
  };
  std::vector<Parameter*> params{&x, &w, &b};
  const auto r = finite_diff_check(loss, params, kStep);
  EXPECT_GT(r.max_rel_error, 0.1);
  EXPECT_EQ(r.worst_param, 1u);
}

TEST(OpGradients, SoftmaxAndTanh) {
  Rng rng(12);
  Parameter x(random_tensor({3, 7}, rng));
  const Tensor probe = random_tensor({3, 7}, rng);
  LossFn loss = [&](bool want) {
    const Tensor t = tanh(x.value);
    const Tensor y = softmax_rows(t);
    if (want) add_inplace(x.grad, tanh_backward(t, softmax_rows_backward(y, probe)));
    return project(y, probe);
  };
  std::vector<Parameter*> params{&x};
  EXPECT_LT(finite_diff_check(loss, params, kStep).max_rel_error, 1e-5);
}

TEST(OpGradients, Losses) {
  Rng rng(13);
  Parameter z(random_tensor({4, 3}, rng));
  const std::vector<std::int32_t> labels{2, kIgnoreLabel, 0, 1};
  const Tensor targets = Tensor::matrix({{1, 0, 1}, {0, 0, 0}, {1, 1, 1}, {0, 1, 0}});
  const std::vector<Real> reg(12, 0.3);
  LossFn loss = [&](bool want) {
    const LossResult a = cross_entropy(z.value, labels);
    const LossResult b = binary_cross_entropy(z.value, targets);
    const LossResult c = mean_squared_error(z.value, reg);
    if (want) {
      add_inplace(z.grad, a.dlogits);
      add_inplace(z.grad, b.dlogits);
      add_inplace(z.grad, c.dlogits);
    }
    return a.loss + b.loss + c.loss;
  };
  std::vector<Parameter*> params{&z};
  EXPECT_LT(finite_diff_check(loss, params, kStep).max_rel_error, 1e-5);
}

class AttentionGradients : public ::testing::TestWithParam<bool> {};

TEST_P(AttentionGradients, MatchCentralDifferences) {
  const bool sliding = GetParam();
  Rng rng(14);
  const std::size_t n = 9;
  attn::AttentionSpec spec;
  spec.n_heads = 2;
  spec.head_dim = 3;
  spec.window = 4;
  spec.global_indices = {0, 5};
  const std::size_t h = 6;
  Parameter q(random_tensor({n, h}, rng)), k(random_tensor({n, h}, rng)), v(random_tensor({n, h}, rng));
  Parameter gq(random_tensor({2, h}, rng)), gk(random_tensor({n, h}, rng)), gv(random_tensor({n, h}, rng));
  const Tensor probe = random_tensor({n, h}, rng);
  const std::vector<std::uint8_t> valid{1, 1, 1, 1, 1, 1, 1, 0, 0};
  LossFn loss = [&](bool want) {
    if (sliding) {
      attn::SlidingCache cache;
      const attn::Qkv local{q.value, k.value, v.value}, global{gq.value, gk.value, gv.value};
      const Tensor out = attn::sliding_global_attention(local, global, spec, valid, &cache);
      if (want) {
        const auto g = attn::sliding_global_attention_backward(local, global, spec, cache, probe);
        add_inplace(q.grad, g.local.q);
        add_inplace(k.grad, g.local.k);
        add_inplace(v.grad, g.local.v);
        add_inplace(gq.grad, g.global.q);
        add_inplace(gk.grad, g.global.k);
        add_inplace(gv.grad, g.global.v);
      }
      return project(out, probe);
    }
    attn::DenseCache cache;
    const Tensor out = attn::full_attention(q.value, k.value, v.value, 2, valid, &cache);
    if (want) {
      const auto g = attn::full_attention_backward(q.value, k.value, v.value, 2, cache, probe);
      add_inplace(q.grad, g.q);
      add_inplace(k.grad, g.k);
      add_inplace(v.grad, g.v);
    }
    return project(out, probe);
  };
  std::vector<Parameter*> params{&q, &k, &v};
  if (sliding) params.insert(params.end(), {&gq, &gk, &gv});
  EXPECT_LT(finite_diff_check(loss, params, kStep).max_rel_error, 1e-5);
}

INSTANTIATE_TEST_SUITE_P(Geometry, AttentionGradients, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "Sliding" : "Full"; });

struct EncoderCase {
  HeadKind head;
  bool sliding;
  bool dropout;
};

std::string case_name(const ::testing::TestParamInfo<EncoderCase>& info) {
  std::string name(to_string(info.param.head));
  std::erase(name, '_');
  return name + (info.param.sliding ? "Sliding" : "Full") + (info.param.dropout ? "Dropout" : "");
}

bool is_key_bias(const std::string& name) { return name.ends_with("key.bias"); }

class EncoderGradients : public ::testing::TestWithParam<EncoderCase> {};

// 2 layers, hidden 8, 12 tokens.
TEST_P(EncoderGradients, MatchCentralDifferences) {
  const EncoderCase c = GetParam();
  ModelConfig config = tiny_config(c.sliding);
  config.dropout = c.dropout ? 0.1 : 0.0;
  const int labels = c.head == HeadKind::kMlm ? config.vocab_size : c.head == HeadKind::kStsReg ? 1 : 3;
  EncoderState state = random_state(config, HeadConfig{c.head, labels}, 21);
  std::vector<TokenId> tokens;
  for (int i = 0; i < 12; ++i) tokens.push_back(6 + (i * 7) % 18);
  const std::vector<int> positions{2, 7, 9};

  LossFn loss = [&](bool want) {
    ForwardOptions options;
    options.record = want;
    options.train = c.dropout;
    options.dropout_seed = 99;
    const EncodeResult enc = encode(state, tokens, cls_globals(), {}, options);
    const HeadOutput head = apply_head(state, enc.hidden, positions);
    LossResult l;
    switch (c.head) {
      case HeadKind::kTokenCls: {
        std::vector<std::int32_t> y(12);
        for (int i = 0; i < 12; ++i) y[i] = i % 3;
        l = cross_entropy(head.logits, y);
        break;
      }
      case HeadKind::kSeqCls: {
        const std::vector<std::int32_t> y{1};
        l = cross_entropy(head.logits, y);
        break;
      }
      case HeadKind::kStsReg: {
        const std::vector<Real> y{2.5};
        l = mean_squared_error(head.logits, y);
        break;
      }
      case HeadKind::kMlm: {
        const std::vector<std::int32_t> y{7, 11, 20};
        l = cross_entropy(head.logits, y);
        break;
      }
    }
    if (want) encode_backward(state, enc, apply_head_backward(state, head, l.dlogits));
    return l.loss;
  };

  std::vector<Parameter*> checked, key_biases;
  for (auto& [name, p] : state.params) (is_key_bias(name) ? key_biases : checked).push_back(&p);
  const GradCheckResult r = finite_diff_check(loss, checked, kStep);
  EXPECT_LT(r.max_rel_error, kTolerance) << "worst parameter index " << r.worst_param;

  // Key biases shift every score of a query row equally, so their exact
  // gradient is zero; both estimates must vanish.
  ASSERT_FALSE(key_biases.empty());
  const GradCheckResult kb = finite_diff_check(loss, key_biases, kStep);
  EXPECT_LT(kb.max_abs_error, 1e-8);
  for (Parameter* p : key_biases) {
    for (Real g : p->grad.data()) EXPECT_LT(std::abs(g), 1e-10);
  }
}

INSTANTIATE_TEST_SUITE_P(
    Heads, EncoderGradients,
    ::testing::Values(EncoderCase{HeadKind::kTokenCls, false, false},
                      EncoderCase{HeadKind::kSeqCls, false, false},
                      EncoderCase{HeadKind::kStsReg, false, false},
                      EncoderCase{HeadKind::kMlm, false, false},
                      EncoderCase{HeadKind::kTokenCls, true, false},
                      EncoderCase{HeadKind::kSeqCls, true, false},
                      EncoderCase{HeadKind::kStsReg, true, false},
                      EncoderCase{HeadKind::kMlm, true, false},
                      EncoderCase{HeadKind::kSeqCls, true, true}),
    case_name);

}  // namespace
}  // namespace longdoc
