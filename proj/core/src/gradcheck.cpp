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

#include "longdoc/gradcheck.hpp"

#include <cmath>
#include <vector>

#include "longdoc/errors.hpp"

namespace longdoc::inline LONGDOC_ABI {

namespace {

double checked(double v, const char* when) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("finite_diff_check: non-finite loss ") + when);
  }
  return v;
}

}  // namespace

GradCheckResult finite_diff_check(const LossFn& loss, std::span<Parameter* const> params,
                                  double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_check: step must be positive");

  for (Parameter* p : params) p->zero_grad();
  checked(loss(true), "at the base point");
  std::vector<std::vector<Real>> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.emplace_back(p->grad.data().begin(), p->grad.data().end());

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& value = params[pi]->value;
    double diff_sq = 0.0, a_sq = 0.0, c_sq = 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const Real original = value[i];
      const Real plus = static_cast<Real>(original + h);
      const Real minus = static_cast<Real>(original - h);
      value[i] = plus;
      const double f_plus = checked(loss(false), "at +h");
      value[i] = minus;
      const double f_minus = checked(loss(false), "at -h");
      value[i] = original;
      const double central =
          (f_plus - f_minus) / (static_cast<double>(plus) - static_cast<double>(minus));
      const double a = analytic[pi][i];
      diff_sq += (a - central) * (a - central);
      a_sq += a * a;
      c_sq += central * central;
      result.max_abs_error = std::max(result.max_abs_error, std::abs(a - central));
    }
    const double rel = std::sqrt(diff_sq) / (std::sqrt(a_sq) + std::sqrt(c_sq) + 1e-12);
    if (rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_param = pi;
    }
  }
  return result;
}

}  // namespace longdoc::inline LONGDOC_ABI
