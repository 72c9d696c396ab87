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

#include "longdoc/encoder.hpp"

#include <algorithm>

#include "longdoc/errors.hpp"
#include "longdoc/rng.hpp"

namespace longdoc::inline LONGDOC_ABI {

// ---------------------------------------------------------------------------
// Configuration.

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (vocab_size <= SpecialIds::kCount) fail("vocab_size must exceed the special tokens");
  if (hidden <= 0 || n_layers <= 0 || n_heads <= 0 || ffn_dim <= 0) {
    fail("hidden, n_layers, n_heads and ffn_dim must be positive");
  }
  if (hidden % n_heads != 0) fail("hidden must be divisible by n_heads");
  if (max_positions != kBertPositions && max_positions != kLongformerPositions) {
    fail("max_positions must be 512 or 4096, got " + std::to_string(max_positions));
  }
  if (window < 2 || window % 2 != 0) fail("window must be an even number >= 2");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
  if (!(layer_norm_eps > 0.0)) fail("layer_norm_eps must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"vocab_size", c.vocab_size},
                     {"hidden", c.hidden},
                     {"n_layers", c.n_layers},
                     {"n_heads", c.n_heads},
                     {"ffn_dim", c.ffn_dim},
                     {"max_positions", c.max_positions},
                     {"window", c.window},
                     {"dropout", c.dropout},
                     {"layer_norm_eps", c.layer_norm_eps}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.hidden = j.value("hidden", d.hidden);
  c.n_layers = j.value("n_layers", d.n_layers);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.ffn_dim = j.value("ffn_dim", 4 * c.hidden);
  c.max_positions = j.value("max_positions", d.max_positions);
  c.window = j.value("window", d.window);
  c.dropout = j.value("dropout", d.dropout);
  c.layer_norm_eps = j.value("layer_norm_eps", d.layer_norm_eps);
}

std::string_view to_string(HeadKind kind) {
  switch (kind) {
    case HeadKind::kTokenCls: return "token_cls";
    case HeadKind::kSeqCls: return "seq_cls";
    case HeadKind::kStsReg: return "sts_reg";
    case HeadKind::kMlm: return "mlm";
  }
  return "unknown";
}

HeadKind head_kind_from_string(std::string_view name) {
  for (HeadKind k : {HeadKind::kTokenCls, HeadKind::kSeqCls, HeadKind::kStsReg, HeadKind::kMlm}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown head kind '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const HeadConfig& h) {
  j = nlohmann::json{{"kind", std::string(to_string(h.kind))}, {"n_labels", h.n_labels}};
}

void from_json(const nlohmann::json& j, HeadConfig& h) {
  h.kind = head_kind_from_string(j.at("kind").get<std::string>());
  h.n_labels = j.at("n_labels").get<int>();
}

// ---------------------------------------------------------------------------
// Parameter layout.

namespace {

std::string layer_prefix(int l) { return "layers." + std::to_string(l) + "."; }

std::string head_prefix(HeadKind kind) { return "head." + std::string(to_string(kind)) + "."; }

}  // namespace

std::map<std::string, Shape> parameter_shapes(const ModelConfig& config,
                                              const std::optional<HeadConfig>& head) {
  config.validate();
  const auto H = static_cast<std::size_t>(config.hidden);
  const auto F = static_cast<std::size_t>(config.ffn_dim);
  const auto V = static_cast<std::size_t>(config.vocab_size);
  const auto P = static_cast<std::size_t>(config.max_positions);
  std::map<std::string, Shape> s;
  s["embeddings.word"] = {V, H};
  s["embeddings.position"] = {P, H};
  s["embeddings.token_type"] = {1, H};
  s["embeddings.norm.gamma"] = {H};
  s["embeddings.norm.beta"] = {H};
  std::vector<std::string> projections{"query", "key", "value", "output"};
  if (config.sliding()) {
    projections.insert(projections.end(), {"global_query", "global_key", "global_value"});
  }
  for (int l = 0; l < config.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    for (const auto& proj : projections) {
      s[p + "attention." + proj + ".weight"] = {H, H};
      s[p + "attention." + proj + ".bias"] = {H};
    }
    s[p + "attention.norm.gamma"] = {H};
    s[p + "attention.norm.beta"] = {H};
    s[p + "ffn.in.weight"] = {H, F};
    s[p + "ffn.in.bias"] = {F};
    s[p + "ffn.out.weight"] = {F, H};
    s[p + "ffn.out.bias"] = {H};
    s[p + "ffn.norm.gamma"] = {H};
    s[p + "ffn.norm.beta"] = {H};
  }
  s["pooler.weight"] = {H, H};
  s["pooler.bias"] = {H};
  if (head) {
    if (head->n_labels <= 0) throw ConfigError("head: n_labels must be positive");
    const std::string p = head_prefix(head->kind);
    const auto L = static_cast<std::size_t>(head->n_labels);
    switch (head->kind) {
      case HeadKind::kTokenCls:
      case HeadKind::kSeqCls:
        s[p + "weight"] = {H, L};
        s[p + "bias"] = {L};
        break;
      case HeadKind::kStsReg:
        if (head->n_labels != 1) throw ConfigError("head: sts_reg has exactly one output");
        s[p + "weight"] = {H, 1};
        s[p + "bias"] = {1};
        break;
      case HeadKind::kMlm:
        if (head->n_labels != config.vocab_size) {
          throw ConfigError("head: mlm output width must equal vocab_size");
        }
        s[p + "transform.weight"] = {H, H};
        s[p + "transform.bias"] = {H};
        s[p + "norm.gamma"] = {H};
        s[p + "norm.beta"] = {H};
        s[p + "decoder.weight"] = {H, V};
        s[p + "decoder.bias"] = {V};
        break;
    }
  }
  return s;
}

std::size_t parameter_count(const ModelConfig& config, const std::optional<HeadConfig>& head) {
  std::size_t total = 0;
  for (const auto& [name, shape] : parameter_shapes(config, head)) total += shape_product(shape);
  return total;
}

Parameter& EncoderState::at(const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

const Parameter& EncoderState::at(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

std::size_t EncoderState::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, p] : params) total += p.value.size();
  return total;
}

void EncoderState::zero_grad() {
  for (auto& [name, p] : params) p.zero_grad();
}

std::vector<Parameter*> EncoderState::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params.size());
  for (auto& [name, p] : params) out.push_back(&p);
  return out;
}

// ---------------------------------------------------------------------------
// Forward.

namespace {

// Draws an inverted-dropout scale tensor and applies it to x in place.
Tensor apply_dropout(Tensor& x, double rate, Rng& rng) {
  Tensor scale(x.shape());
  const auto keep = static_cast<Real>(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale[i] = rng.uniform() < rate ? 0.0f : keep;
    x[i] *= scale[i];
  }
  return scale;
}

Tensor times(const Tensor& a, const Tensor& scale) {
  if (scale.empty()) return a;
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * scale[i];
  return out;
}

Tensor gather_rows(const Tensor& x, std::span<const int> rows) {
  Tensor out({rows.size(), x.cols()});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = static_cast<std::size_t>(rows[r]);
    std::copy_n(x.raw() + src * x.cols(), x.cols(), out.raw() + r * x.cols());
  }
  return out;
}

void scatter_add_rows(Tensor& x, std::span<const int> rows, const Tensor& src) {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Real* dst = x.raw() + static_cast<std::size_t>(rows[r]) * x.cols();
    for (std::size_t c = 0; c < x.cols(); ++c) dst[c] += src(r, c);
  }
}

const Tensor& value(const EncoderState& s, const std::string& name) { return s.at(name).value; }

Tensor& grad(EncoderState& s, const std::string& name) { return s.at(name).grad; }

Tensor proj(const EncoderState& s, const Tensor& x, const std::string& name) {
  return linear(x, value(s, name + ".weight"), value(s, name + ".bias"));
}

Tensor proj_backward(EncoderState& s, const Tensor& x, const std::string& name, const Tensor& dy) {
  return linear_backward(x, value(s, name + ".weight"), dy, grad(s, name + ".weight"),
                         &grad(s, name + ".bias"));
}

attn::AttentionSpec layer_spec(const ModelConfig& c, const std::vector<int>& globals) {
  attn::AttentionSpec spec;
  spec.n_heads = c.n_heads;
  spec.head_dim = c.head_dim();
  spec.window = c.window;
  spec.global_indices = globals;
  return spec;
}

}  // namespace

EncodeResult encode(const EncoderState& state, std::span<const TokenId> tokens,
                    std::span<const int> globals, std::span<const std::uint8_t> valid,
                    const ForwardOptions& options) {
  const ModelConfig& c = state.config;
  const std::size_t n = tokens.size();
  if (n == 0) throw ConfigError("encode: empty token sequence");
  if (n > static_cast<std::size_t>(c.max_positions)) {
    throw TruncationError("encode: sequence of " + std::to_string(n) +
                          " tokens exceeds max_positions " + std::to_string(c.max_positions) +
                          "; truncate explicitly");
  }
  if (!valid.empty() && valid.size() != n) {
    throw DimensionError("encode: validity mask length differs from token count");
  }
  for (TokenId t : tokens) {
    if (t < 0 || t >= c.vocab_size) {
      throw RangeError("encode: token id " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(c.vocab_size));
    }
  }
  const auto H = static_cast<std::size_t>(c.hidden);
  const bool dropout_on = options.train && c.dropout > 0.0;
  Rng rng(derive_seed(options.dropout_seed, "dropout"));

  EncodeResult result;
  EncoderTape& tape = result.tape;
  tape.has_grad_state = options.record;
  tape.tokens.assign(tokens.begin(), tokens.end());
  if (c.sliding()) tape.globals.assign(globals.begin(), globals.end());
  tape.valid.assign(valid.begin(), valid.end());
  const attn::AttentionSpec spec = layer_spec(c, tape.globals);
  if (c.sliding()) spec.validate(n);

  // Embeddings.
  const Tensor& word = value(state, "embeddings.word");
  const Tensor& pos = value(state, "embeddings.position");
  const Tensor& type = value(state, "embeddings.token_type");
  Tensor emb({n, H});
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(tokens[i]);
    for (std::size_t d = 0; d < H; ++d) emb(i, d) = word(t, d) + pos(i, d) + type(0, d);
  }
  LayerNormCache emb_ln;
  Tensor x = layer_norm(emb, value(state, "embeddings.norm.gamma"),
                        value(state, "embeddings.norm.beta"), c.layer_norm_eps, &emb_ln);
  Tensor emb_drop;
  if (dropout_on) emb_drop = apply_dropout(x, c.dropout, rng);
  if (options.record) {
    tape.emb_sum = std::move(emb);
    tape.emb_ln = std::move(emb_ln);
    tape.emb_drop = std::move(emb_drop);
    tape.layers.resize(static_cast<std::size_t>(c.n_layers));
  }

  for (int l = 0; l < c.n_layers; ++l) {
    const std::string p = layer_prefix(l);
    const bool last = l + 1 == c.n_layers;
    const bool keep_cache = options.record || (options.capture_attention && last);
    LayerTape lt;
    lt.local = {proj(state, x, p + "attention.query"), proj(state, x, p + "attention.key"),
                proj(state, x, p + "attention.value")};
    Tensor context;
    if (c.sliding()) {
      if (!tape.globals.empty()) {
        lt.global.q = proj(state, gather_rows(x, tape.globals), p + "attention.global_query");
        lt.global.k = proj(state, x, p + "attention.global_key");
        lt.global.v = proj(state, x, p + "attention.global_value");
      }
      context = attn::sliding_global_attention(lt.local, lt.global, spec, tape.valid,
                                               keep_cache ? &lt.sliding : nullptr);
    } else {
      context = attn::full_attention(lt.local.q, lt.local.k, lt.local.v, c.n_heads, tape.valid,
                                     keep_cache ? &lt.dense : nullptr);
    }
    if (options.capture_attention && last) {
      result.cls_attention =
          c.sliding() ? attn::attention_row(lt.sliding, 0) : attn::attention_row(lt.dense, 0);
    }
    Tensor attn_out = proj(state, context, p + "attention.output");
    Tensor attn_drop;
    if (dropout_on) attn_drop = apply_dropout(attn_out, c.dropout, rng);
    Tensor ln1_in = add(x, attn_out);
    LayerNormCache ln1;
    Tensor h1 = layer_norm(ln1_in, value(state, p + "attention.norm.gamma"),
                           value(state, p + "attention.norm.beta"), c.layer_norm_eps, &ln1);
    Tensor ffn_pre = proj(state, h1, p + "ffn.in");
    Tensor ffn_act = gelu(ffn_pre);
    Tensor ffn_out = proj(state, ffn_act, p + "ffn.out");
    Tensor ffn_drop;
    if (dropout_on) ffn_drop = apply_dropout(ffn_out, c.dropout, rng);
    Tensor ln2_in = add(h1, ffn_out);
    LayerNormCache ln2;
    Tensor next = layer_norm(ln2_in, value(state, p + "ffn.norm.gamma"),
                             value(state, p + "ffn.norm.beta"), c.layer_norm_eps, &ln2);
    if (options.record) {
      lt.input = std::move(x);
      lt.context = std::move(context);
      lt.attn_out = std::move(attn_out);
      lt.attn_drop = std::move(attn_drop);
      lt.ln1_in = std::move(ln1_in);
      lt.ln1 = std::move(ln1);
      lt.h1 = std::move(h1);
      lt.ffn_pre = std::move(ffn_pre);
      lt.ffn_act = std::move(ffn_act);
      lt.ffn_drop = std::move(ffn_drop);
      lt.ln2_in = std::move(ln2_in);
      lt.ln2 = std::move(ln2);
      tape.layers[static_cast<std::size_t>(l)] = std::move(lt);
    }
    x = std::move(next);
  }
  result.hidden = std::move(x);
  return result;
}

Tensor encode_hidden(const EncoderState& state, std::span<const TokenId> tokens,
                     std::span<const int> globals) {
  return encode(state, tokens, globals, {}, ForwardOptions{}).hidden;
}

void encode_backward(EncoderState& state, const EncodeResult& forward, const Tensor& d_hidden) {
  const EncoderTape& tape = forward.tape;
  if (!tape.has_grad_state) {
    throw ConfigError("encode_backward: forward pass was not recorded");
  }
  const ModelConfig& c = state.config;
  const std::size_t n = tape.tokens.size();
  const auto H = static_cast<std::size_t>(c.hidden);
  if (d_hidden.rows() != n || d_hidden.cols() != H) {
    throw DimensionError("encode_backward: gradient " + shape_to_string(d_hidden.shape()) +
                         " does not match hidden states");
  }
  const attn::AttentionSpec spec = layer_spec(c, tape.globals);
  Tensor dx = d_hidden;
  for (int l = c.n_layers - 1; l >= 0; --l) {
    const std::string p = layer_prefix(l);
    const LayerTape& lt = tape.layers[static_cast<std::size_t>(l)];

    Tensor d_ln2_in = layer_norm_backward(lt.ln2_in, value(state, p + "ffn.norm.gamma"), lt.ln2, dx,
                                          grad(state, p + "ffn.norm.gamma"),
                                          grad(state, p + "ffn.norm.beta"));
    Tensor d_h1 = d_ln2_in;
    Tensor d_ffn_out = times(d_ln2_in, lt.ffn_drop);
    Tensor d_act = proj_backward(state, lt.ffn_act, p + "ffn.out", d_ffn_out);
    Tensor d_pre = gelu_backward(lt.ffn_pre, d_act);
    add_inplace(d_h1, proj_backward(state, lt.h1, p + "ffn.in", d_pre));

    Tensor d_ln1_in = layer_norm_backward(lt.ln1_in, value(state, p + "attention.norm.gamma"),
                                          lt.ln1, d_h1, grad(state, p + "attention.norm.gamma"),
                                          grad(state, p + "attention.norm.beta"));
    Tensor d_x = d_ln1_in;
    Tensor d_attn_out = times(d_ln1_in, lt.attn_drop);
    Tensor d_context = proj_backward(state, lt.context, p + "attention.output", d_attn_out);

    attn::Qkv d_local;
    if (c.sliding()) {
      attn::SlidingGrads g =
          attn::sliding_global_attention_backward(lt.local, lt.global, spec, lt.sliding, d_context);
      d_local = std::move(g.local);
      if (!tape.globals.empty()) {
        const Tensor x_globals = gather_rows(lt.input, tape.globals);
        Tensor d_xg = proj_backward(state, x_globals, p + "attention.global_query", g.global.q);
        scatter_add_rows(d_x, tape.globals, d_xg);
        add_inplace(d_x, proj_backward(state, lt.input, p + "attention.global_key", g.global.k));
        add_inplace(d_x, proj_backward(state, lt.input, p + "attention.global_value", g.global.v));
      }
    } else {
      d_local = attn::full_attention_backward(lt.local.q, lt.local.k, lt.local.v, c.n_heads,
                                              lt.dense, d_context);
    }
    add_inplace(d_x, proj_backward(state, lt.input, p + "attention.query", d_local.q));
    add_inplace(d_x, proj_backward(state, lt.input, p + "attention.key", d_local.k));
    add_inplace(d_x, proj_backward(state, lt.input, p + "attention.value", d_local.v));
    dx = std::move(d_x);
  }

  Tensor d_norm = times(dx, tape.emb_drop);
  Tensor d_emb = layer_norm_backward(tape.emb_sum, value(state, "embeddings.norm.gamma"),
                                     tape.emb_ln, d_norm, grad(state, "embeddings.norm.gamma"),
                                     grad(state, "embeddings.norm.beta"));
  Tensor& g_word = grad(state, "embeddings.word");
  Tensor& g_pos = grad(state, "embeddings.position");
  Tensor& g_type = grad(state, "embeddings.token_type");
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(tape.tokens[i]);
    for (std::size_t d = 0; d < H; ++d) {
      const Real g = d_emb(i, d);
      g_word(t, d) += g;
      g_pos(i, d) += g;
      g_type(0, d) += g;
    }
  }
}

// ---------------------------------------------------------------------------
// Pooler and heads.

namespace {

Tensor cls_row(const Tensor& hidden) {
  if (hidden.rows() == 0) throw DimensionError("pooled_output: empty hidden states");
  Tensor row({1, hidden.cols()});
  std::copy_n(hidden.raw(), hidden.cols(), row.raw());
  return row;
}

void require_head(const EncoderState& state) {
  if (!state.head) throw ConfigError("apply_head: encoder has no head attached");
}

}  // namespace

Tensor pooled_output(const EncoderState& state, const Tensor& hidden) {
  return tanh(proj(state, cls_row(hidden), "pooler"));
}

HeadOutput apply_head(const EncoderState& state, const Tensor& hidden,
                      std::span<const int> positions) {
  require_head(state);
  if (hidden.rank() != 2 || hidden.cols() != static_cast<std::size_t>(state.config.hidden)) {
    throw DimensionError("apply_head: hidden states " + shape_to_string(hidden.shape()) +
                         " do not match the encoder width");
  }
  HeadOutput out;
  HeadTape& t = out.tape;
  t.kind = state.head->kind;
  t.seq_len = hidden.rows();
  const std::string p = head_prefix(t.kind);
  switch (t.kind) {
    case HeadKind::kTokenCls:
      t.input = hidden;
      out.logits = proj(state, hidden, p.substr(0, p.size() - 1));
      break;
    case HeadKind::kSeqCls:
    case HeadKind::kStsReg:
      t.input = cls_row(hidden);
      t.pooled = tanh(proj(state, t.input, "pooler"));
      out.logits = proj(state, t.pooled, p.substr(0, p.size() - 1));
      break;
    case HeadKind::kMlm: {
      if (positions.empty()) {
        throw EmptySelectionError("apply_head: mlm head needs at least one masked position");
      }
      for (int pos : positions) {
        if (pos < 0 || static_cast<std::size_t>(pos) >= hidden.rows()) {
          throw RangeError("apply_head: masked position " + std::to_string(pos) +
                           " outside the sequence");
        }
      }
      t.positions.assign(positions.begin(), positions.end());
      t.input = gather_rows(hidden, positions);
      t.mlm_pre = proj(state, t.input, p + "transform");
      t.mlm_act = gelu(t.mlm_pre);
      t.mlm_norm = layer_norm(t.mlm_act, value(state, p + "norm.gamma"),
                              value(state, p + "norm.beta"), state.config.layer_norm_eps,
                              &t.mlm_ln);
      out.logits = proj(state, t.mlm_norm, p + "decoder");
      break;
    }
  }
  return out;
}

Tensor apply_head_backward(EncoderState& state, const HeadOutput& forward,
                           const Tensor& dlogits) {
  require_head(state);
  const HeadTape& t = forward.tape;
  if (dlogits.shape() != forward.logits.shape()) {
    throw DimensionError("apply_head_backward: gradient shape differs from logits");
  }
  const std::string p = head_prefix(t.kind);
  const std::string base = p.substr(0, p.size() - 1);
  const auto H = static_cast<std::size_t>(state.config.hidden);
  Tensor d_hidden({t.seq_len, H});
  switch (t.kind) {
    case HeadKind::kTokenCls:
      d_hidden = proj_backward(state, t.input, base, dlogits);
      break;
    case HeadKind::kSeqCls:
    case HeadKind::kStsReg: {
      Tensor d_pooled = proj_backward(state, t.pooled, base, dlogits);
      Tensor d_pre = tanh_backward(t.pooled, d_pooled);
      Tensor d_cls = proj_backward(state, t.input, "pooler", d_pre);
      std::copy_n(d_cls.raw(), H, d_hidden.raw());
      break;
    }
    case HeadKind::kMlm: {
      Tensor d_norm = proj_backward(state, t.mlm_norm, p + "decoder", dlogits);
      Tensor d_act = layer_norm_backward(t.mlm_act, value(state, p + "norm.gamma"), t.mlm_ln,
                                         d_norm, grad(state, p + "norm.gamma"),
                                         grad(state, p + "norm.beta"));
      Tensor d_pre = gelu_backward(t.mlm_pre, d_act);
      Tensor d_rows = proj_backward(state, t.input, p + "transform", d_pre);
      scatter_add_rows(d_hidden, t.positions, d_rows);
      break;
    }
  }
  return d_hidden;
}

}  // namespace longdoc::inline LONGDOC_ABI
