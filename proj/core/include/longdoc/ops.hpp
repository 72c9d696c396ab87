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

#ifndef LONGDOC_OPS_HPP_
#define LONGDOC_OPS_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "longdoc/tensor.hpp"

// Dense kernels with explicit backward functions. Storage is float32;
// reductions (dot products, softmax sums, norms) accumulate in double.
namespace longdoc::inline LONGDOC_ABI {

using Mask = std::span<const std::uint8_t>;

// ---------------------------------------------------------------------------
// Matrix products.

Tensor matmul(const Tensor& a, const Tensor& b);

struct MatmulGrads {
  Tensor da;
  Tensor db;
};
MatmulGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& dout);

// C (+)= A * B^T, with A: m x k and B: n x k.
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b,
             Real* c, bool accumulate);
// C (+)= A^T * B, with A: r x m and B: r x n.
void gemm_tn(std::size_t m, std::size_t n, std::size_t r, const Real* a, const Real* b,
             Real* c, bool accumulate);
// C (+)= A * B, with A: m x k and B: k x n.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b,
             Real* c, bool accumulate);

// y = x W + b over the rows of x; `bias` may be empty.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
// Accumulates into dweight / dbias (dbias may be null) and returns dx.
Tensor linear_backward(const Tensor& x, const Tensor& weight, const Tensor& dy,
                       Tensor& dweight, Tensor* dbias);

// ---------------------------------------------------------------------------
// Elementwise.

Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);

Tensor gelu(const Tensor& x);
Tensor gelu_backward(const Tensor& x, const Tensor& dy);

Tensor tanh(const Tensor& x);
// Takes the forward output y = tanh(x).
Tensor tanh_backward(const Tensor& y, const Tensor& dy);

// ---------------------------------------------------------------------------
// Row-wise normalizations.

// Softmax over the last axis. Positions where `mask` is 0 get exactly 0 and are
// excluded from the normalizer; an empty mask means every position is valid.
// A row with no valid position raises DegenerateRowError.
Tensor softmax_rows(const Tensor& x, Mask mask = {});
Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy);

struct LayerNormCache {
  std::vector<double> mean;
  std::vector<double> rstd;
};
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  LayerNormCache* cache = nullptr);
// Accumulates into dgamma / dbeta and returns dx.
Tensor layer_norm_backward(const Tensor& x, const Tensor& gamma, const LayerNormCache& cache,
                           const Tensor& dy, Tensor& dgamma, Tensor& dbeta);

// ---------------------------------------------------------------------------
// Losses. Both return the mean loss and the gradient w.r.t. the logits.

inline constexpr std::int32_t kIgnoreLabel = -1;

struct LossResult {
  double loss = 0.0;
  Tensor dlogits;
  std::size_t count = 0;
};

// Softmax cross-entropy per row; rows labelled kIgnoreLabel are skipped.
// Raises EmptySelectionError when every row is ignored.
LossResult cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels);

// Independent sigmoid cross-entropy per element, averaged over elements.
LossResult binary_cross_entropy(const Tensor& logits, const Tensor& targets);

// Mean squared error between a column of predictions and targets.
LossResult mean_squared_error(const Tensor& pred, std::span<const Real> targets);

}  // namespace longdoc::inline LONGDOC_ABI

#endif  // LONGDOC_OPS_HPP_
