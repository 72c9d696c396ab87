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

#include "longdoc/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "longdoc/errors.hpp"

namespace longdoc::inline LONGDOC_ABI::attn {

namespace {

double dot(const Real* a, const Real* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

template <typename T>
void axpy(double alpha, const Real* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<T>(y[i] + alpha * x[i]);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

// In-place softmax over the entries flagged valid; invalid entries become 0.
// Returns false when no entry is valid.
bool masked_softmax(std::vector<double>& scores, const std::vector<char>& valid) {
  double max_v = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (!valid[j]) continue;
    any = true;
    max_v = std::max(max_v, scores[j]);
  }
  if (!any) return false;
  double sum = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    scores[j] = valid[j] ? std::exp(scores[j] - max_v) : 0.0;
    sum += scores[j];
  }
  for (auto& s : scores) s /= sum;
  return true;
}

std::vector<char> global_flags(const std::vector<int>& globals, std::size_t n) {
  std::vector<char> flags(n, 0);
  for (int g : globals) flags[static_cast<std::size_t>(g)] = 1;
  return flags;
}

}  // namespace

void AttentionSpec::validate(std::size_t seq_len) const {
  if (n_heads <= 0 || head_dim <= 0) {
    throw ConfigError("attention: n_heads and head_dim must be positive");
  }
  if (window < 2 || window % 2 != 0) {
    throw ConfigError("attention: window must be an even number >= 2, got " +
                      std::to_string(window));
  }
  for (std::size_t i = 0; i < global_indices.size(); ++i) {
    const int g = global_indices[i];
    if (g < 0 || static_cast<std::size_t>(g) >= seq_len) {
      throw ConfigError("attention: global index " + std::to_string(g) + " outside [0, " +
                        std::to_string(seq_len) + ")");
    }
    if (i > 0 && global_indices[i - 1] >= g) {
      throw ConfigError("attention: global indices must be sorted and unique");
    }
  }
}

AttentionCost attention_cost(std::size_t n, const AttentionSpec& spec) {
  spec.validate(n);
  const auto half = static_cast<std::size_t>(spec.window / 2);
  const auto& g = spec.global_indices;
  std::uint64_t per_head = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::binary_search(g.begin(), g.end(), static_cast<int>(i))) {
      per_head += n;
      continue;
    }
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    const auto g_lo = std::lower_bound(g.begin(), g.end(), static_cast<int>(lo));
    const auto g_hi = std::upper_bound(g.begin(), g.end(), static_cast<int>(hi));
    per_head += (hi - lo + 1) - static_cast<std::uint64_t>(g_hi - g_lo) + g.size();
  }
  AttentionCost cost;
  cost.score_entries = per_head * static_cast<std::uint64_t>(spec.n_heads);
  cost.mults = cost.score_entries * 2 * static_cast<std::uint64_t>(spec.head_dim);
  return cost;
}

AttentionCost full_attention_cost(std::size_t n, int n_heads, int head_dim) {
  AttentionCost cost;
  cost.score_entries = static_cast<std::uint64_t>(n) * n * static_cast<std::uint64_t>(n_heads);
  cost.mults = cost.score_entries * 2 * static_cast<std::uint64_t>(head_dim);
  return cost;
}

// ---------------------------------------------------------------------------

Tensor full_attention(const Tensor& q, const Tensor& k, const Tensor& v, int n_heads, Mask mask,
                      DenseCache* cache) {
  require(q.rank() == 2 && q.shape() == k.shape() && q.shape() == v.shape(),
          "full_attention: q, k, v must be matrices of equal shape");
  require(n_heads > 0 && q.cols() % static_cast<std::size_t>(n_heads) == 0,
          "full_attention: hidden width not divisible by n_heads");
  const std::size_t n = q.rows();
  const std::size_t hidden = q.cols();
  const std::size_t hd = hidden / static_cast<std::size_t>(n_heads);
  const bool pairwise = mask.size() == n * n && n > 1;
  require(mask.empty() || mask.size() == n || pairwise,
          "full_attention: mask must be empty, length n, or n x n");
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  if (cache) {
    cache->n = n;
    cache->n_heads = n_heads;
    cache->probs.assign(static_cast<std::size_t>(n_heads) * n * n, 0.0f);
  }
  Tensor out({n, hidden});
  std::vector<double> scores(n), acc(hd);
  std::vector<char> valid(n);
  for (int h = 0; h < n_heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * hd;
    for (std::size_t i = 0; i < n; ++i) {
      const Real* qi = q.raw() + i * hidden + off;
      for (std::size_t j = 0; j < n; ++j) {
        valid[j] = mask.empty() ? 1 : (pairwise ? mask[i * n + j] : mask[j]);
        scores[j] = valid[j] ? dot(qi, k.raw() + j * hidden + off, hd) * scale : 0.0;
      }
      if (!masked_softmax(scores, valid)) {
        throw DegenerateRowError("full_attention: query " + std::to_string(i) +
                                 " has no valid key");
      }
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (scores[j] != 0.0) axpy(scores[j], v.raw() + j * hidden + off, acc.data(), hd);
      }
      Real* oi = out.raw() + i * hidden + off;
      for (std::size_t d = 0; d < hd; ++d) oi[d] = static_cast<Real>(acc[d]);
      if (cache) {
        Real* p = cache->probs.data() + (static_cast<std::size_t>(h) * n + i) * n;
        for (std::size_t j = 0; j < n; ++j) p[j] = static_cast<Real>(scores[j]);
      }
    }
  }
  return out;
}

Qkv full_attention_backward(const Tensor& q, const Tensor& k, const Tensor& v, int n_heads,
                            const DenseCache& cache, const Tensor& dout) {
  const std::size_t n = q.rows();
  const std::size_t hidden = q.cols();
  const std::size_t hd = hidden / static_cast<std::size_t>(n_heads);
  require(cache.n == n && cache.n_heads == n_heads && dout.shape() == q.shape(),
          "full_attention_backward: cache or gradient does not match inputs");
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Qkv g{Tensor(q.shape()), Tensor(k.shape()), Tensor(v.shape())};
  std::vector<double> dp(n), dq(hd);
  for (int h = 0; h < n_heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * hd;
    for (std::size_t i = 0; i < n; ++i) {
      const Real* p = cache.probs.data() + (static_cast<std::size_t>(h) * n + i) * n;
      const Real* doi = dout.raw() + i * hidden + off;
      double weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        dp[j] = p[j] != 0.0f ? dot(doi, v.raw() + j * hidden + off, hd) : 0.0;
        weighted += p[j] * dp[j];
      }
      std::fill(dq.begin(), dq.end(), 0.0);
      const Real* qi = q.raw() + i * hidden + off;
      for (std::size_t j = 0; j < n; ++j) {
        if (p[j] == 0.0f) continue;
        axpy(p[j], doi, g.v.raw() + j * hidden + off, hd);
        const double ds = p[j] * (dp[j] - weighted) * scale;
        axpy(ds, k.raw() + j * hidden + off, dq.data(), hd);
        axpy(ds, qi, g.k.raw() + j * hidden + off, hd);
      }
      Real* gq = g.q.raw() + i * hidden + off;
      for (std::size_t d = 0; d < hd; ++d) gq[d] = static_cast<Real>(gq[d] + dq[d]);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

namespace {

struct SlidingShape {
  std::size_t n;
  std::size_t hidden;
  std::size_t hd;
  std::size_t n_globals;
  std::size_t half;
  std::size_t band;
};

SlidingShape check_sliding(const Qkv& local, const Qkv& global, const AttentionSpec& spec,
                           Mask key_mask) {
  const std::size_t n = local.q.rows();
  spec.validate(n);
  const std::size_t hidden = static_cast<std::size_t>(spec.hidden());
  require(local.q.rank() == 2 && local.q.cols() == hidden,
          "sliding_global_attention: q width " + shape_to_string(local.q.shape()) +
              " does not match n_heads x head_dim = " + std::to_string(hidden));
  require(local.k.shape() == local.q.shape() && local.v.shape() == local.q.shape(),
          "sliding_global_attention: local k/v shapes differ from q");
  const std::size_t ng = spec.global_indices.size();
  if (ng > 0) {
    require(global.q.rank() == 2 && global.q.rows() == ng && global.q.cols() == hidden,
            "sliding_global_attention: global q must be |globals| x hidden");
    require(global.k.shape() == local.q.shape() && global.v.shape() == local.q.shape(),
            "sliding_global_attention: global k/v must be n x hidden");
  }
  require(key_mask.empty() || key_mask.size() == n,
          "sliding_global_attention: key mask length differs from sequence length");
  const auto half = static_cast<std::size_t>(spec.window / 2);
  return {n, hidden, static_cast<std::size_t>(spec.head_dim), ng, half,
          static_cast<std::size_t>(spec.window) + 1};
}

Tensor sliding_reference_dense(const Qkv& local, const Qkv& global, const AttentionSpec& spec,
                               Mask key_mask, const SlidingShape& s) {
  const std::size_t n = s.n;
  const auto is_global = global_flags(spec.global_indices, n);
  std::vector<std::uint8_t> support(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t dist = i > j ? i - j : j - i;
      const bool key_ok = key_mask.empty() || key_mask[j];
      support[i * n + j] = key_ok && (dist <= s.half || is_global[j]) ? 1 : 0;
    }
    // Global query rows are recomputed below; keep the dense pass well-defined.
    if (is_global[i]) support[i * n + i] = 1;
  }
  Tensor out = full_attention(local.q, local.k, local.v, spec.n_heads, support);
  if (s.n_globals > 0) {
    Tensor gq(local.q.shape());
    for (std::size_t gi = 0; gi < s.n_globals; ++gi) {
      const auto g = static_cast<std::size_t>(spec.global_indices[gi]);
      std::copy_n(global.q.raw() + gi * s.hidden, s.hidden, gq.raw() + g * s.hidden);
    }
    std::vector<std::uint8_t> keys(n, 1);
    if (!key_mask.empty()) keys.assign(key_mask.begin(), key_mask.end());
    Tensor gout = full_attention(gq, global.k, global.v, spec.n_heads, keys);
    for (int g : spec.global_indices) {
      const auto row = static_cast<std::size_t>(g);
      std::copy_n(gout.raw() + row * s.hidden, s.hidden, out.raw() + row * s.hidden);
    }
  }
  return out;
}

}  // namespace

Tensor sliding_global_attention(const Qkv& local, const Qkv& global, const AttentionSpec& spec,
                                Mask key_mask, SlidingCache* cache, bool reference_dense) {
  const SlidingShape s = check_sliding(local, global, spec, key_mask);
  if (reference_dense) {
    if (cache) throw ConfigError("sliding_global_attention: reference mode has no cache");
    return sliding_reference_dense(local, global, spec, key_mask, s);
  }
  const std::size_t n = s.n;
  const std::size_t ng = s.n_globals;
  const auto& globals = spec.global_indices;
  const auto is_global = global_flags(globals, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(s.hd));
  const auto key_ok = [&](std::size_t j) { return key_mask.empty() || key_mask[j] != 0; };

  if (cache) {
    cache->n = n;
    cache->n_heads = spec.n_heads;
    cache->window = spec.window;
    cache->globals = globals;
    cache->band_probs.assign(static_cast<std::size_t>(spec.n_heads) * n * s.band, 0.0f);
    cache->to_global.assign(static_cast<std::size_t>(spec.n_heads) * n * ng, 0.0f);
    cache->global_rows.assign(static_cast<std::size_t>(spec.n_heads) * ng * n, 0.0f);
  }

  Tensor out({n, s.hidden});
  const std::size_t width = s.band + ng;
  std::vector<double> scores(std::max(width, n)), acc(s.hd);
  std::vector<char> valid(std::max(width, n));

  for (int h = 0; h < spec.n_heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * s.hd;
    const auto hh = static_cast<std::size_t>(h);

    // Local queries: band keys (minus globals, which have their own slots)
    // followed by the global keys, all through the local projections.
    scores.resize(width);
    valid.resize(width);
    for (std::size_t i = 0; i < n; ++i) {
      if (is_global[i]) continue;
      const Real* qi = local.q.raw() + i * s.hidden + off;
      for (std::size_t o = 0; o < s.band; ++o) {
        const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i + o) -
                                 static_cast<std::ptrdiff_t>(s.half);
        const bool in_range = j >= 0 && static_cast<std::size_t>(j) < n;
        const auto ju = static_cast<std::size_t>(j);
        valid[o] = in_range && !is_global[ju] && key_ok(ju);
        scores[o] = valid[o] ? dot(qi, local.k.raw() + ju * s.hidden + off, s.hd) * scale : 0.0;
      }
      for (std::size_t gi = 0; gi < ng; ++gi) {
        const auto j = static_cast<std::size_t>(globals[gi]);
        valid[s.band + gi] = key_ok(j);
        scores[s.band + gi] =
            valid[s.band + gi] ? dot(qi, local.k.raw() + j * s.hidden + off, s.hd) * scale : 0.0;
      }
      if (!masked_softmax(scores, valid)) {
        throw DegenerateRowError("sliding_global_attention: query " + std::to_string(i) +
                                 " has no valid key");
      }
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t o = 0; o < s.band; ++o) {
        if (scores[o] == 0.0) continue;
        const std::size_t j = i + o - s.half;
        axpy(scores[o], local.v.raw() + j * s.hidden + off, acc.data(), s.hd);
      }
      for (std::size_t gi = 0; gi < ng; ++gi) {
        const double p = scores[s.band + gi];
        if (p == 0.0) continue;
        axpy(p, local.v.raw() + static_cast<std::size_t>(globals[gi]) * s.hidden + off,
             acc.data(), s.hd);
      }
      Real* oi = out.raw() + i * s.hidden + off;
      for (std::size_t d = 0; d < s.hd; ++d) oi[d] = static_cast<Real>(acc[d]);
      if (cache) {
        Real* bp = cache->band_probs.data() + (hh * n + i) * s.band;
        for (std::size_t o = 0; o < s.band; ++o) bp[o] = static_cast<Real>(scores[o]);
        Real* gp = cache->to_global.data() + (hh * n + i) * ng;
        for (std::size_t gi = 0; gi < ng; ++gi) gp[gi] = static_cast<Real>(scores[s.band + gi]);
      }
    }

    // Global queries attend to every valid key through the global projections.
    scores.resize(n);
    valid.resize(n);
    for (std::size_t gi = 0; gi < ng; ++gi) {
      const auto i = static_cast<std::size_t>(globals[gi]);
      const Real* qi = global.q.raw() + gi * s.hidden + off;
      for (std::size_t j = 0; j < n; ++j) {
        valid[j] = key_ok(j);
        scores[j] = valid[j] ? dot(qi, global.k.raw() + j * s.hidden + off, s.hd) * scale : 0.0;
      }
      if (!masked_softmax(scores, valid)) {
        throw DegenerateRowError("sliding_global_attention: global query " +
                                 std::to_string(i) + " has no valid key");
      }
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (scores[j] != 0.0) axpy(scores[j], global.v.raw() + j * s.hidden + off, acc.data(), s.hd);
      }
      Real* oi = out.raw() + i * s.hidden + off;
      for (std::size_t d = 0; d < s.hd; ++d) oi[d] = static_cast<Real>(acc[d]);
      if (cache) {
        Real* rp = cache->global_rows.data() + (hh * ng + gi) * n;
        for (std::size_t j = 0; j < n; ++j) rp[j] = static_cast<Real>(scores[j]);
      }
    }
    scores.resize(std::max(width, n));
    valid.resize(std::max(width, n));
  }
  return out;
}

SlidingGrads sliding_global_attention_backward(const Qkv& local, const Qkv& global,
                                               const AttentionSpec& spec,
                                               const SlidingCache& cache, const Tensor& dout) {
  const SlidingShape s = check_sliding(local, global, spec, {});
  require(cache.n == s.n && cache.n_heads == spec.n_heads && cache.window == spec.window &&
              cache.globals == spec.global_indices,
          "sliding_global_attention_backward: cache does not match inputs");
  require(dout.shape() == local.q.shape(),
          "sliding_global_attention_backward: gradient shape differs from output");
  const std::size_t n = s.n;
  const std::size_t ng = s.n_globals;
  const auto& globals = spec.global_indices;
  const auto is_global = global_flags(globals, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(s.hd));

  SlidingGrads g;
  g.local = {Tensor(local.q.shape()), Tensor(local.k.shape()), Tensor(local.v.shape())};
  if (ng > 0) {
    g.global = {Tensor(global.q.shape()), Tensor(global.k.shape()), Tensor(global.v.shape())};
  }
  std::vector<double> dp(std::max(s.band + ng, n)), dq(s.hd);

  for (int h = 0; h < spec.n_heads; ++h) {
    const std::size_t off = static_cast<std::size_t>(h) * s.hd;
    const auto hh = static_cast<std::size_t>(h);
    for (std::size_t i = 0; i < n; ++i) {
      if (is_global[i]) continue;
      const Real* bp = cache.band_probs.data() + (hh * n + i) * s.band;
      const Real* gp = cache.to_global.data() + (hh * n + i) * ng;
      const Real* doi = dout.raw() + i * s.hidden + off;
      const Real* qi = local.q.raw() + i * s.hidden + off;
      const auto key_of = [&](std::size_t slot) {
        return slot < s.band ? i + slot - s.half : static_cast<std::size_t>(globals[slot - s.band]);
      };
      const auto prob_of = [&](std::size_t slot) {
        return slot < s.band ? bp[slot] : gp[slot - s.band];
      };
      double weighted = 0.0;
      for (std::size_t slot = 0; slot < s.band + ng; ++slot) {
        const Real p = prob_of(slot);
        dp[slot] = p != 0.0f ? dot(doi, local.v.raw() + key_of(slot) * s.hidden + off, s.hd) : 0.0;
        weighted += p * dp[slot];
      }
      std::fill(dq.begin(), dq.end(), 0.0);
      for (std::size_t slot = 0; slot < s.band + ng; ++slot) {
        const Real p = prob_of(slot);
        if (p == 0.0f) continue;
        const std::size_t j = key_of(slot);
        axpy(p, doi, g.local.v.raw() + j * s.hidden + off, s.hd);
        const double ds = p * (dp[slot] - weighted) * scale;
        axpy(ds, local.k.raw() + j * s.hidden + off, dq.data(), s.hd);
        axpy(ds, qi, g.local.k.raw() + j * s.hidden + off, s.hd);
      }
      Real* gq = g.local.q.raw() + i * s.hidden + off;
      for (std::size_t d = 0; d < s.hd; ++d) gq[d] = static_cast<Real>(gq[d] + dq[d]);
    }

    for (std::size_t gi = 0; gi < ng; ++gi) {
      const auto i = static_cast<std::size_t>(globals[gi]);
      const Real* rp = cache.global_rows.data() + (hh * ng + gi) * n;
      const Real* doi = dout.raw() + i * s.hidden + off;
      const Real* qi = global.q.raw() + gi * s.hidden + off;
      double weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        dp[j] = rp[j] != 0.0f ? dot(doi, global.v.raw() + j * s.hidden + off, s.hd) : 0.0;
        weighted += rp[j] * dp[j];
      }
      std::fill(dq.begin(), dq.end(), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (rp[j] == 0.0f) continue;
        axpy(rp[j], doi, g.global.v.raw() + j * s.hidden + off, s.hd);
        const double ds = rp[j] * (dp[j] - weighted) * scale;
        axpy(ds, global.k.raw() + j * s.hidden + off, dq.data(), s.hd);
        axpy(ds, qi, g.global.k.raw() + j * s.hidden + off, s.hd);
      }
      Real* gq = g.global.q.raw() + gi * s.hidden + off;
      for (std::size_t d = 0; d < s.hd; ++d) gq[d] = static_cast<Real>(gq[d] + dq[d]);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

Tensor attention_row(const DenseCache& cache, std::size_t i) {
  Tensor row({static_cast<std::size_t>(cache.n_heads), cache.n});
  for (int h = 0; h < cache.n_heads; ++h) {
    const Real* p = cache.probs.data() + (static_cast<std::size_t>(h) * cache.n + i) * cache.n;
    std::copy_n(p, cache.n, row.raw() + static_cast<std::size_t>(h) * cache.n);
  }
  return row;
}

Tensor attention_row(const SlidingCache& cache, std::size_t i) {
  const std::size_t n = cache.n;
  const std::size_t ng = cache.globals.size();
  const auto band = static_cast<std::size_t>(cache.window) + 1;
  const auto half = static_cast<std::size_t>(cache.window / 2);
  Tensor row({static_cast<std::size_t>(cache.n_heads), n});
  const auto git = std::find(cache.globals.begin(), cache.globals.end(), static_cast<int>(i));
  for (int h = 0; h < cache.n_heads; ++h) {
    const auto hh = static_cast<std::size_t>(h);
    Real* out = row.raw() + hh * n;
    if (git != cache.globals.end()) {
      const auto gi = static_cast<std::size_t>(git - cache.globals.begin());
      std::copy_n(cache.global_rows.data() + (hh * ng + gi) * n, n, out);
      continue;
    }
    const Real* bp = cache.band_probs.data() + (hh * n + i) * band;
    for (std::size_t o = 0; o < band; ++o) {
      if (bp[o] != 0.0f) out[i + o - half] += bp[o];
    }
    const Real* gp = cache.to_global.data() + (hh * n + i) * ng;
    for (std::size_t gi = 0; gi < ng; ++gi) out[static_cast<std::size_t>(cache.globals[gi])] += gp[gi];
  }
  return row;
}

}  // namespace longdoc::inline LONGDOC_ABI::attn
