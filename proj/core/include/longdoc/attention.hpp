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

#ifndef LONGDOC_ATTENTION_HPP_
#define LONGDOC_ATTENTION_HPP_

#include <cstdint>
#include <vector>

#include "longdoc/ops.hpp"
#include "longdoc/tensor.hpp"

// Scaled dot-product attention over one sequence, heads packed along the
// hidden axis (head h owns columns [h * head_dim, (h + 1) * head_dim)).
//
// Two patterns are provided:
//  * full_attention: every query sees every unmasked key. Serves as the
//    BERT-shaped attention and as the equivalence oracle.
//  * sliding_global_attention: query i sees keys j with |i - j| <= window / 2
//    plus every global token; global tokens see every key through their own
//    query/key/value projections. Scores live in banded storage of
//    n x (window + 1 + |globals|) per head; nothing n x n is materialized.
namespace longdoc::inline LONGDOC_ABI::attn {

struct AttentionSpec {
  int n_heads = 1;
  int head_dim = 1;
  // Total span; each query sees window / 2 tokens on either side.
  int window = 512;
  // Sorted, unique token positions with global attention.
  std::vector<int> global_indices;

  int hidden() const { return n_heads * head_dim; }
  // Raises ConfigError for an odd or < 2 window, non-positive head layout,
  // or global indices that are unsorted or outside [0, seq_len).
  void validate(std::size_t seq_len) const;
};

struct AttentionCost {
  std::uint64_t mults = 0;          // scalar multiply-accumulates (QK^T and PV)
  std::uint64_t score_entries = 0;  // attention scores computed, summed over heads
};

// Exact cost of the sparse pattern over a fully valid sequence of length n.
AttentionCost attention_cost(std::size_t n, const AttentionSpec& spec);
// Cost of full attention: n^2 score entries per head.
AttentionCost full_attention_cost(std::size_t n, int n_heads, int head_dim);

struct Qkv {
  Tensor q;
  Tensor k;
  Tensor v;
};

// ---------------------------------------------------------------------------
// Full attention.

struct DenseCache {
  std::size_t n = 0;
  int n_heads = 0;
  std::vector<Real> probs;  // [n_heads][n][n]
};

// `mask` is empty (all keys valid), length n (key validity), or length n * n
// (row-major pairwise support). A query row with no valid key raises
// DegenerateRowError.
Tensor full_attention(const Tensor& q, const Tensor& k, const Tensor& v, int n_heads,
                      Mask mask = {}, DenseCache* cache = nullptr);
Qkv full_attention_backward(const Tensor& q, const Tensor& k, const Tensor& v, int n_heads,
                            const DenseCache& cache, const Tensor& dout);

// ---------------------------------------------------------------------------
// Sliding window + global attention.

struct SlidingCache {
  std::size_t n = 0;
  int n_heads = 0;
  int window = 0;
  std::vector<int> globals;
  std::vector<Real> band_probs;    // [n_heads][n][window + 1]; offset o is key i + o - window/2
  std::vector<Real> to_global;     // [n_heads][n][|G|]; local query -> global key
  std::vector<Real> global_rows;   // [n_heads][|G|][n]; global query -> every key
};

// `local` holds q, k, v of shape n x hidden. `global` holds q of shape
// |G| x hidden (rows in global_indices order) and k, v of shape n x hidden.
// `key_mask` (empty or length n) excludes padded keys. With
// `reference_dense` the same support is evaluated through dense masked
// attention; it exists for testing and cannot fill a cache.
Tensor sliding_global_attention(const Qkv& local, const Qkv& global, const AttentionSpec& spec,
                                Mask key_mask = {}, SlidingCache* cache = nullptr,
                                bool reference_dense = false);

struct SlidingGrads {
  Qkv local;
  Qkv global;
};
SlidingGrads sliding_global_attention_backward(const Qkv& local, const Qkv& global,
                                               const AttentionSpec& spec,
                                               const SlidingCache& cache, const Tensor& dout);

// Attention weights of query row i expanded to dense form: n_heads rows of n.
Tensor attention_row(const DenseCache& cache, std::size_t i);
Tensor attention_row(const SlidingCache& cache, std::size_t i);

}  // namespace longdoc::inline LONGDOC_ABI::attn

#endif  // LONGDOC_ATTENTION_HPP_
