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

#include <benchmark/benchmark.h>

#include "longdoc/attention.hpp"
#include "longdoc/ops.hpp"
#include "longdoc/rng.hpp"

namespace {

using longdoc::Real;
using longdoc::Tensor;
namespace attn = longdoc::attn;

Tensor random_matrix(std::size_t rows, std::size_t cols, longdoc::Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.data()) v = static_cast<Real>(rng.normal());
  return t;
}

constexpr int kHeads = 2;
constexpr int kHeadDim = 32;
constexpr int kWindow = 128;

void BM_FullAttention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  longdoc::Rng rng(1);
  const std::size_t h = kHeads * kHeadDim;
  const Tensor q = random_matrix(n, h, rng), k = random_matrix(n, h, rng), v = random_matrix(n, h, rng);
  for (auto _ : state) benchmark::DoNotOptimize(attn::full_attention(q, k, v, kHeads));
  state.counters["score_entries"] =
      static_cast<double>(attn::full_attention_cost(n, kHeads, kHeadDim).score_entries);
}
BENCHMARK(BM_FullAttention)->RangeMultiplier(2)->Range(256, 2048)->Unit(benchmark::kMillisecond);

void BM_SlidingGlobalAttention(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  longdoc::Rng rng(1);
  const std::size_t h = kHeads * kHeadDim;
  attn::AttentionSpec spec;
  spec.n_heads = kHeads;
  spec.head_dim = kHeadDim;
  spec.window = kWindow;
  spec.global_indices = {0};
  const attn::Qkv local{random_matrix(n, h, rng), random_matrix(n, h, rng), random_matrix(n, h, rng)};
  const attn::Qkv global{random_matrix(1, h, rng), local.k, local.v};
  for (auto _ : state) benchmark::DoNotOptimize(attn::sliding_global_attention(local, global, spec));
  state.counters["score_entries"] = static_cast<double>(attn::attention_cost(n, spec).score_entries);
}
BENCHMARK(BM_SlidingGlobalAttention)->RangeMultiplier(2)->Range(256, 8192)->Unit(benchmark::kMillisecond);

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  longdoc::Rng rng(2);
  const Tensor a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(longdoc::matmul(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(64, 512)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
