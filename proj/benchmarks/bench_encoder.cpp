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

#include "longdoc/checkpoint.hpp"
#include "longdoc/encoder.hpp"

namespace {

longdoc::ModelConfig toy_config(int max_positions) {
  longdoc::ModelConfig c;
  c.vocab_size = 512;
  c.hidden = 64;
  c.n_layers = 2;
  c.n_heads = 4;
  c.ffn_dim = 256;
  c.max_positions = max_positions;
  c.window = 64;
  return c;
}

std::vector<longdoc::TokenId> tokens(std::size_t n) {
  std::vector<longdoc::TokenId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<longdoc::TokenId>(6 + (i * 37) % 500);
  ids[0] = 2;
  return ids;
}

void BM_EncodeForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int positions = n <= 512 && state.range(1) == 0 ? 512 : 4096;
  const auto s = longdoc::ckpt::init_from_scratch(toy_config(positions), std::nullopt, 1);
  const auto ids = tokens(n);
  for (auto _ : state) benchmark::DoNotOptimize(longdoc::encode_hidden(s, ids, longdoc::cls_globals()));
  state.SetLabel(positions == 512 ? "full" : "sliding");
}
BENCHMARK(BM_EncodeForward)
    ->Args({128, 0})
    ->Args({512, 0})
    ->Args({128, 1})
    ->Args({512, 1})
    ->Args({2048, 1})
    ->Unit(benchmark::kMillisecond);

void BM_EncodeForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto s = longdoc::ckpt::init_from_scratch(toy_config(4096), std::nullopt, 1);
  const auto ids = tokens(n);
  longdoc::ForwardOptions options;
  options.record = true;
  for (auto _ : state) {
    auto r = longdoc::encode(s, ids, longdoc::cls_globals(), {}, options);
    longdoc::Tensor d(r.hidden.shape(), 1.0f);
    longdoc::encode_backward(s, r, d);
  }
}
BENCHMARK(BM_EncodeForwardBackward)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace
