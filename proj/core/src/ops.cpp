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

#include "longdoc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "longdoc/errors.hpp"

namespace longdoc::inline LONGDOC_ABI {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_to_string(t.shape()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b,
             Real* c, bool accumulate) {
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const Real* a_row = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a_row[p];
      if (aip == 0.0) continue;
      const Real* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) acc[j] += aip * b_row[j];
    }
    Real* c_row = c + i * n;
    if (accumulate) {
      for (std::size_t j = 0; j < n; ++j) c_row[j] = static_cast<Real>(c_row[j] + acc[j]);
    } else {
      for (std::size_t j = 0; j < n; ++j) c_row[j] = static_cast<Real>(acc[j]);
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b,
             Real* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const Real* a_row = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const Real* b_row = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += static_cast<double>(a_row[p]) * b_row[p];
      c[i * n + j] = accumulate ? static_cast<Real>(c[i * n + j] + s) : static_cast<Real>(s);
    }
  }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t r, const Real* a, const Real* b,
             Real* c, bool accumulate) {
  std::vector<double> acc(m * n, 0.0);
  for (std::size_t t = 0; t < r; ++t) {
    const Real* a_row = a + t * m;
    const Real* b_row = b + t * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double ati = a_row[i];
      if (ati == 0.0) continue;
      double* acc_row = acc.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) acc_row[j] += ati * b_row[j];
    }
  }
  for (std::size_t i = 0; i < m * n; ++i) {
    c[i] = accumulate ? static_cast<Real>(c[i] + acc[i]) : static_cast<Real>(acc[i]);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner extents disagree for " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
  }
  Tensor c({a.dim(0), b.dim(1)});
  gemm_nn(a.dim(0), b.dim(1), a.dim(1), a.raw(), b.raw(), c.raw(), false);
  return c;
}

MatmulGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& dout) {
  if (dout.rank() != 2 || dout.dim(0) != a.dim(0) || dout.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_backward: upstream gradient " + shape_to_string(dout.shape()) +
                         " does not match product of " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  MatmulGrads g{Tensor(a.shape()), Tensor(b.shape())};
  // dA = dC B^T, dB = A^T dC
  gemm_nt(a.dim(0), a.dim(1), b.dim(1), dout.raw(), b.raw(), g.da.raw(), false);
  gemm_tn(a.dim(1), b.dim(1), a.dim(0), a.raw(), dout.raw(), g.db.raw(), false);
  return g;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(weight, "linear");
  if (x.cols() != weight.dim(0)) {
    throw DimensionError("linear: input " + shape_to_string(x.shape()) +
                         " does not match weight " + shape_to_string(weight.shape()));
  }
  const std::size_t rows = x.rows();
  const std::size_t out = weight.dim(1);
  Tensor y({rows, out});
  gemm_nn(rows, out, x.cols(), x.raw(), weight.raw(), y.raw(), false);
  if (!bias.empty()) {
    if (bias.size() != out) {
      throw DimensionError("linear: bias " + shape_to_string(bias.shape()) +
                           " does not match output width " + std::to_string(out));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < out; ++j) y(r, j) += bias[j];
    }
  }
  return y;
}

Tensor linear_backward(const Tensor& x, const Tensor& weight, const Tensor& dy,
                       Tensor& dweight, Tensor* dbias) {
  const std::size_t rows = x.rows();
  const std::size_t in = weight.dim(0);
  const std::size_t out = weight.dim(1);
  if (dy.rows() != rows || dy.cols() != out) {
    throw DimensionError("linear_backward: gradient " + shape_to_string(dy.shape()) +
                         " does not match output");
  }
  Tensor dx({rows, in});
  gemm_nt(rows, in, out, dy.raw(), weight.raw(), dx.raw(), false);
  gemm_tn(in, out, rows, x.raw(), dy.raw(), dweight.raw(), true);
  if (dbias) {
    for (std::size_t j = 0; j < out; ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < rows; ++r) s += dy(r, j);
      (*dbias)[j] = static_cast<Real>((*dbias)[j] + s);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor c = a;
  add_inplace(c, b);
  return c;
}

void add_inplace(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Tensor gelu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    y[i] = static_cast<Real>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
  }
  return y;
}

Tensor gelu_backward(const Tensor& x, const Tensor& dy) {
  require_same_shape(x, dy, "gelu_backward");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
    dx[i] = static_cast<Real>(dy[i] * (cdf + v * pdf));
  }
  return dx;
}

Tensor tanh(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

Tensor tanh_backward(const Tensor& y, const Tensor& dy) {
  require_same_shape(y, dy, "tanh_backward");
  Tensor dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = y[i];
    dx[i] = static_cast<Real>(dy[i] * (1.0 - v * v));
  }
  return dx;
}

// ---------------------------------------------------------------------------

Tensor softmax_rows(const Tensor& x, Mask mask) {
  if (x.empty()) throw DimensionError("softmax_rows: empty input");
  if (!mask.empty() && mask.size() != x.size()) {
    throw DimensionError("softmax_rows: mask has " + std::to_string(mask.size()) +
                         " entries for input " + shape_to_string(x.shape()));
  }
  const std::size_t rows = x.rows();
  const std::size_t n = x.cols();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* in = x.raw() + r * n;
    Real* out = y.raw() + r * n;
    const std::uint8_t* m = mask.empty() ? nullptr : mask.data() + r * n;
    double max_v = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (m && !m[j]) continue;
      any = true;
      max_v = std::max(max_v, static_cast<double>(in[j]));
    }
    if (!any) {
      throw DegenerateRowError("softmax_rows: row " + std::to_string(r) + " is fully masked");
    }
    double sum = 0.0;
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (m && !m[j]) continue;
      e[j] = std::exp(static_cast<double>(in[j]) - max_v);
      sum += e[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] = static_cast<Real>(e[j] / sum);
  }
  return y;
}

Tensor softmax_rows_backward(const Tensor& y, const Tensor& dy) {
  require_same_shape(y, dy, "softmax_rows_backward");
  const std::size_t rows = y.rows();
  const std::size_t n = y.cols();
  Tensor dx(y.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += static_cast<double>(y(r, j)) * dy(r, j);
    for (std::size_t j = 0; j < n; ++j) {
      dx(r, j) = static_cast<Real>(y(r, j) * (dy(r, j) - dot));
    }
  }
  return dx;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  LayerNormCache* cache) {
  const std::size_t d = x.cols();
  if (d == 0 || gamma.size() != d || beta.size() != d) {
    throw DimensionError("layer_norm: input " + shape_to_string(x.shape()) + " with gamma " +
                         shape_to_string(gamma.shape()) + " and beta " +
                         shape_to_string(beta.shape()));
  }
  const std::size_t rows = x.rows();
  Tensor y(x.shape());
  if (cache) {
    cache->mean.assign(rows, 0.0);
    cache->rstd.assign(rows, 0.0);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const Real* in = x.raw() + r * d;
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = in[j] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + eps);
    Real* out = y.raw() + r * d;
    for (std::size_t j = 0; j < d; ++j) {
      out[j] = static_cast<Real>((in[j] - mean) * rstd * gamma[j] + beta[j]);
    }
    if (cache) {
      cache->mean[r] = mean;
      cache->rstd[r] = rstd;
    }
  }
  return y;
}

Tensor layer_norm_backward(const Tensor& x, const Tensor& gamma, const LayerNormCache& cache,
                           const Tensor& dy, Tensor& dgamma, Tensor& dbeta) {
  require_same_shape(x, dy, "layer_norm_backward");
  const std::size_t d = x.cols();
  const std::size_t rows = x.rows();
  Tensor dx(x.shape());
  std::vector<double> dg(d, 0.0), db(d, 0.0), xhat(d), g(d);
  for (std::size_t r = 0; r < rows; ++r) {
    const double mean = cache.mean[r];
    const double rstd = cache.rstd[r];
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      xhat[j] = (x(r, j) - mean) * rstd;
      g[j] = static_cast<double>(dy(r, j)) * gamma[j];
      sum_g += g[j];
      sum_gx += g[j] * xhat[j];
      dg[j] += static_cast<double>(dy(r, j)) * xhat[j];
      db[j] += dy(r, j);
    }
    const double inv_d = 1.0 / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx(r, j) = static_cast<Real>(rstd * (g[j] - inv_d * sum_g - xhat[j] * inv_d * sum_gx));
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    dgamma[j] = static_cast<Real>(dgamma[j] + dg[j]);
    dbeta[j] = static_cast<Real>(dbeta[j] + db[j]);
  }
  return dx;
}

// ---------------------------------------------------------------------------

LossResult cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels) {
  const std::size_t rows = logits.rows();
  const std::size_t n = logits.cols();
  if (labels.size() != rows) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " rows");
  }
  LossResult result;
  result.dlogits = Tensor(logits.shape());
  std::vector<double> p(n);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] == kIgnoreLabel) continue;
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= n) {
      throw DimensionError("cross_entropy: label " + std::to_string(labels[r]) +
                           " outside [0, " + std::to_string(n) + ")");
    }
    ++result.count;
    double max_v = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) max_v = std::max(max_v, static_cast<double>(logits(r, j)));
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      p[j] = std::exp(logits(r, j) - max_v);
      sum += p[j];
    }
    total += std::log(sum) + max_v - logits(r, static_cast<std::size_t>(labels[r]));
    for (std::size_t j = 0; j < n; ++j) p[j] /= sum;
    p[static_cast<std::size_t>(labels[r])] -= 1.0;
    for (std::size_t j = 0; j < n; ++j) result.dlogits(r, j) = static_cast<Real>(p[j]);
  }
  if (result.count == 0) {
    throw EmptySelectionError("cross_entropy: no labelled rows (every position ignored)");
  }
  const double scale = 1.0 / static_cast<double>(result.count);
  for (auto& v : result.dlogits.data()) v = static_cast<Real>(v * scale);
  result.loss = total * scale;
  return result;
}

LossResult binary_cross_entropy(const Tensor& logits, const Tensor& targets) {
  require_same_shape(logits, targets, "binary_cross_entropy");
  LossResult result;
  result.dlogits = Tensor(logits.shape());
  result.count = logits.size();
  const double scale = 1.0 / static_cast<double>(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double t = targets[i];
    // log(1 + exp(-|z|)) + max(z, 0) - z t
    total += std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * t;
    const double s = 1.0 / (1.0 + std::exp(-z));
    result.dlogits[i] = static_cast<Real>((s - t) * scale);
  }
  result.loss = total * scale;
  return result;
}

LossResult mean_squared_error(const Tensor& pred, std::span<const Real> targets) {
  if (pred.size() != targets.size()) {
    throw DimensionError("mean_squared_error: " + std::to_string(pred.size()) +
                         " predictions for " + std::to_string(targets.size()) + " targets");
  }
  LossResult result;
  result.dlogits = Tensor(pred.shape());
  result.count = pred.size();
  const double scale = 1.0 / static_cast<double>(pred.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = static_cast<double>(pred[i]) - targets[i];
    total += diff * diff;
    result.dlogits[i] = static_cast<Real>(2.0 * diff * scale);
  }
  result.loss = total * scale;
  return result;
}

}  // namespace longdoc::inline LONGDOC_ABI
