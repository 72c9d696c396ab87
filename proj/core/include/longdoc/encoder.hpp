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

#ifndef LONGDOC_ENCODER_HPP_
#define LONGDOC_ENCODER_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "longdoc/attention.hpp"
#include "longdoc/ops.hpp"
#include "longdoc/tensor.hpp"

namespace longdoc::inline LONGDOC_ABI {

using TokenId = std::int32_t;

// Fixed special-token ids; every vocabulary lists them first in this order.
struct SpecialIds {
  TokenId pad = 0;
  TokenId unk = 1;
  TokenId cls = 2;
  TokenId sep = 3;
  TokenId mask = 4;
  TokenId eos = 5;

  static constexpr int kCount = 6;
  bool is_special(TokenId id) const { return id >= 0 && id < kCount; }
  friend bool operator==(const SpecialIds&, const SpecialIds&) = default;
};

// The two supported geometries: 512 positions with full attention
// (BERT-shaped) and 4,096 positions with sliding-window + global attention
// (Longformer-shaped).
struct ModelConfig {
  static constexpr int kBertPositions = 512;
  static constexpr int kLongformerPositions = 4096;

  int vocab_size = 0;
  int hidden = 768;
  int n_layers = 12;
  int n_heads = 12;
  int ffn_dim = 3072;
  int max_positions = kLongformerPositions;
  int window = 512;
  double dropout = 0.1;
  double layer_norm_eps = 1e-12;
  SpecialIds specials;

  bool sliding() const { return max_positions == kLongformerPositions; }
  int head_dim() const { return hidden / n_heads; }
  // Raises ConfigError on a violated invariant.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

enum class HeadKind {
  kTokenCls,  // linear over every hidden state
  kSeqCls,    // linear over the pooled output
  kStsReg,    // scalar over the pooled output
  kMlm,       // dense + gelu + layer norm + vocabulary projection
};

std::string_view to_string(HeadKind kind);
HeadKind head_kind_from_string(std::string_view name);

struct HeadConfig {
  HeadKind kind = HeadKind::kSeqCls;
  int n_labels = 1;  // vocab size for kMlm, 1 for kStsReg

  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

void to_json(nlohmann::json& j, const HeadConfig& h);
void from_json(const nlohmann::json& j, HeadConfig& h);

using ParameterMap = std::map<std::string, Parameter>;

// Canonical parameter names and shapes implied by a configuration. Heads
// other than `head` contribute nothing; the pooler is always present.
std::map<std::string, Shape> parameter_shapes(const ModelConfig& config,
                                              const std::optional<HeadConfig>& head);

struct EncoderState {
  ModelConfig config;
  std::optional<HeadConfig> head;
  ParameterMap params;

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  std::size_t parameter_count() const;
  void zero_grad();
  // Pointers in canonical (name) order.
  std::vector<Parameter*> parameters();
};

// Count for a configuration without allocating it.
std::size_t parameter_count(const ModelConfig& config, const std::optional<HeadConfig>& head);

// ---------------------------------------------------------------------------
// Forward / backward.

struct ForwardOptions {
  bool train = false;   // enables dropout
  bool record = false;  // keep the tape needed by encode_backward
  std::uint64_t dropout_seed = 0;
  bool capture_attention = false;  // keep last-layer [CLS] weights in eval mode
};

struct LayerTape {
  Tensor input;
  attn::Qkv local;
  attn::Qkv global;
  attn::DenseCache dense;
  attn::SlidingCache sliding;
  Tensor context;   // attention output before the output projection
  Tensor attn_out;  // after projection and dropout
  Tensor attn_drop;
  Tensor ln1_in;
  LayerNormCache ln1;
  Tensor h1;
  Tensor ffn_pre;
  Tensor ffn_act;
  Tensor ffn_drop;
  Tensor ln2_in;
  LayerNormCache ln2;
};

struct EncoderTape {
  std::vector<TokenId> tokens;
  std::vector<int> globals;
  std::vector<std::uint8_t> valid;
  Tensor emb_sum;
  LayerNormCache emb_ln;
  Tensor emb_drop;
  std::vector<LayerTape> layers;
  bool has_grad_state = false;
};

struct EncodeResult {
  Tensor hidden;  // n x hidden
  EncoderTape tape;
  // Last-layer attention of query 0, n_heads x n (only with capture_attention).
  Tensor cls_attention;
};

// Runs the encoder over one sequence. `globals` is only used by the
// sliding geometry; `valid` (empty or length n) marks real tokens. Raises
// TruncationError when the sequence exceeds max_positions.
EncodeResult encode(const EncoderState& state, std::span<const TokenId> tokens,
                    std::span<const int> globals, std::span<const std::uint8_t> valid = {},
                    const ForwardOptions& options = {});
// Eval-mode convenience.
Tensor encode_hidden(const EncoderState& state, std::span<const TokenId> tokens,
                     std::span<const int> globals);

// Accumulates parameter gradients for d(loss)/d(hidden).
void encode_backward(EncoderState& state, const EncodeResult& forward, const Tensor& d_hidden);

// tanh(W h_0 + b) over the first ([CLS]) row; returns a 1 x hidden tensor.
Tensor pooled_output(const EncoderState& state, const Tensor& hidden);

struct HeadTape {
  HeadKind kind = HeadKind::kSeqCls;
  std::size_t seq_len = 0;
  Tensor input;      // hidden (token), CLS row (pooled heads), gathered rows (mlm)
  Tensor pooled;     // tanh output for pooled heads
  Tensor mlm_pre;    // transform pre-activation
  Tensor mlm_act;    // gelu output
  LayerNormCache mlm_ln;
  Tensor mlm_norm;   // layer-norm output
  std::vector<int> positions;
};

struct HeadOutput {
  Tensor logits;  // n x labels, 1 x labels, 1 x 1, or |positions| x vocab
  HeadTape tape;
};

// Applies the configured head. `positions` selects the rows scored by the
// MLM head and must be non-empty for it.
HeadOutput apply_head(const EncoderState& state, const Tensor& hidden,
                      std::span<const int> positions = {});
// Accumulates head gradients and returns d(loss)/d(hidden).
Tensor apply_head_backward(EncoderState& state, const HeadOutput& forward,
                           const Tensor& dlogits);

// Standard [CLS]-anchored global set: position 0 only.
inline const std::vector<int>& cls_globals() {
  static const std::vector<int> globals{0};
  return globals;
}

}  // namespace longdoc::inline LONGDOC_ABI

#endif  // LONGDOC_ENCODER_HPP_
