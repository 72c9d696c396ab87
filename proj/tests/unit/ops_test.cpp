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
#include <vector>

#include <gtest/gtest.h>

#include "longdoc/errors.hpp"
#include "longdoc/ops.hpp"
#include "longdoc/rng.hpp"
#include "test_util.hpp"

namespace longdoc {
namespace {

using testing::random_tensor;

std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += double(a(i, p)) * double(b(p, j));
    }
  }
  return c;
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(3);
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 5, 2}, {17, 33, 9}, {64, 7, 65}}) {
    const Tensor a = random_tensor({std::size_t(m), std::size_t(k)}, rng);
    const Tensor b = random_tensor({std::size_t(k), std::size_t(n)}, rng);
    const Tensor c = matmul(a, b);
    const auto ref = naive_matmul(a, b);
    ASSERT_EQ(c.shape(), (Shape{std::size_t(m), std::size_t(n)}));
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-4 * (1 + std::abs(ref[i])));
  }
}

TEST(Matmul, RejectsMismatchedInnerDimension) {
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST(Matmul, BackwardIsTransposedProducts) {
  Rng rng(4);
  const Tensor a = random_tensor({4, 3}, rng), b = random_tensor({3, 5}, rng);
  const Tensor dout = random_tensor({4, 5}, rng);
  const MatmulGrads g = matmul_backward(a, b, dout);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t p = 0; p < 3; ++p) {
      double ref = 0;
      for (std::size_t j = 0; j < 5; ++j) ref += double(dout(i, j)) * b(p, j);
      EXPECT_NEAR(g.da(i, p), ref, 1e-5);
    }
  }
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t j = 0; j < 5; ++j) {
      double ref = 0;
      for (std::size_t i = 0; i < 4; ++i) ref += double(a(i, p)) * dout(i, j);
      EXPECT_NEAR(g.db(p, j), ref, 1e-5);
    }
  }
}

TEST(Linear, AddsBiasPerRow) {
  const Tensor x = Tensor::matrix({{1, 2}, {3, 4}});
  const Tensor w = Tensor::matrix({{1, 0, 1}, {0, 1, 1}});
  const Tensor b = Tensor::vector({10, 20, 30});
  const Tensor y = linear(x, w, b);
  EXPECT_EQ(y, Tensor::matrix({{11, 22, 33}, {13, 24, 37}}));
}

TEST(Softmax, RowsSumToOneAndRespectMask) {
  Rng rng(5);
  const Tensor x = random_tensor({6, 9}, rng, 5.0);
  const Tensor y = softmax_rows(x);
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0;
    for (Real v : y.row(r)) {
      EXPECT_GE(v, 0.0f);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
  const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 0, 0, 0, 1};
  std::vector<std::uint8_t> full;
  for (int r = 0; r < 6; ++r) full.insert(full.end(), mask.begin(), mask.end());
  const Tensor ym = softmax_rows(x, full);
  for (std::size_t r = 0; r < 6; ++r) {
    double denom = 0;
    for (std::size_t c = 0; c < 9; ++c) {
      if (mask[c]) denom += std::exp(double(x(r, c)));
    }
    for (std::size_t c = 0; c < 9; ++c) {
      const double ref = mask[c] ? std::exp(double(x(r, c))) / denom : 0.0;
      EXPECT_NEAR(ym(r, c), ref, 1e-6);
    }
  }
}

TEST(Softmax, StableForLargeLogits) {
  const Tensor y = softmax_rows(Tensor::matrix({{1000, 1000}}));
  EXPECT_FLOAT_EQ(y[0], 0.5f);
  EXPECT_FLOAT_EQ(y[1], 0.5f);
}

TEST(Softmax, FullyMaskedRowIsAnError) {
  const std::vector<std::uint8_t> mask{0, 0};
  EXPECT_THROW(softmax_rows(Tensor::matrix({{1, 2}}), mask), DegenerateRowError);
}

TEST(LayerNorm, NormalizesEachRow) {
  Rng rng(6);
  const Tensor x = random_tensor({5, 16}, rng, 3.0);
  const Tensor gamma(Shape{16}, 1.0f), beta(Shape{16}, 0.0f);
  const Tensor y = layer_norm(x, gamma, beta, 1e-12);
  for (std::size_t r = 0; r < 5; ++r) {
    double mean = 0, var = 0;
    for (Real v : y.row(r)) mean += v;
    mean /= 16;
    for (Real v : y.row(r)) var += (v - mean) * (v - mean);
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var / 16, 1.0, 1e-5);
  }
}

TEST(Gelu, MatchesErfForm) {
  const Tensor x = Tensor::vector({-3, -1, 0, 0.5, 2});
  const Tensor y = gelu(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    EXPECT_NEAR(y[i], 0.5 * v * (1 + std::erf(v / std::sqrt(2.0))), 1e-6);
  }
}

TEST(CrossEntropy, HandComputedExample) {
  // Logits (0, ln 3): probabilities (1/4, 3/4).
  const Tensor logits = Tensor::matrix({{0.0f, float(std::log(3.0))}});
  const std::vector<std::int32_t> labels{1};
  const LossResult r = cross_entropy(logits, labels);
  EXPECT_NEAR(r.loss, -std::log(0.75), 1e-6);
  EXPECT_NEAR(r.dlogits[0], 0.25, 1e-6);
  EXPECT_NEAR(r.dlogits[1], -0.25, 1e-6);
  EXPECT_EQ(r.count, 1u);
}

TEST(CrossEntropy, IgnoredRowsDoNotCount) {
  const Tensor logits = Tensor::matrix({{0, 0}, {5, -5}, {0, 0}});
  const std::vector<std::int32_t> labels{0, kIgnoreLabel, 1};
  const LossResult r = cross_entropy(logits, labels);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-6);
  EXPECT_EQ(r.count, 2u);
  EXPECT_EQ(r.dlogits[2], 0.0f);
  EXPECT_EQ(r.dlogits[3], 0.0f);
  const std::vector<std::int32_t> none{kIgnoreLabel, kIgnoreLabel, kIgnoreLabel};
  EXPECT_THROW(cross_entropy(logits, none), EmptySelectionError);
}

TEST(BinaryCrossEntropy, MatchesLogSigmoid) {
  const Tensor logits = Tensor::matrix({{2, -1}});
  const Tensor targets = Tensor::matrix({{1, 0}});
  const LossResult r = binary_cross_entropy(logits, targets);
  const double s2 = 1 / (1 + std::exp(-2.0)), s1 = 1 / (1 + std::exp(1.0));
  EXPECT_NEAR(r.loss, (-std::log(s2) - std::log(1 - s1)) / 2, 1e-6);
  EXPECT_NEAR(r.dlogits[0], (s2 - 1) / 2, 1e-6);
  EXPECT_NEAR(r.dlogits[1], s1 / 2, 1e-6);
}

TEST(MeanSquaredError, HandComputedExample) {
  const Tensor pred = Tensor::matrix({{1, 4}});
  const std::vector<Real> targets{3, 4};
  const LossResult r = mean_squared_error(pred, targets);
  EXPECT_DOUBLE_EQ(r.loss, 2.0);
  EXPECT_FLOAT_EQ(r.dlogits[0], -2.0f);
  EXPECT_FLOAT_EQ(r.dlogits[1], 0.0f);
}

}  // namespace
}  // namespace longdoc
