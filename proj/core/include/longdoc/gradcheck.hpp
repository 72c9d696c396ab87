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

#ifndef LONGDOC_GRADCHECK_HPP_
#define LONGDOC_GRADCHECK_HPP_

#include <functional>
#include <span>
#include <string>

#include "longdoc/tensor.hpp"

namespace longdoc::inline LONGDOC_ABI {

// Computes a scalar loss from the current parameter values. When
// `want_grad` is true the function must also accumulate d(loss)/d(param)
// into every Parameter::grad (grads are zeroed beforehand).
using LossFn = std::function<double(bool want_grad)>;

struct GradCheckResult {
  // Max over parameter tensors of |a - c| / (|a| + |c| + 1e-12), where a and
  // c are the analytic and central-difference gradients of that tensor and
  // |.| is the Euclidean norm.
  double max_rel_error = 0.0;
  // Index of the parameter attaining max_rel_error.
  std::size_t worst_param = 0;
  // Largest elementwise |a - c|, for diagnostics.
  double max_abs_error = 0.0;
};

// Central-difference gradient check with step h > 0. A non-finite loss
// raises NumericError.
GradCheckResult finite_diff_check(const LossFn& loss, std::span<Parameter* const> params,
                                  double h);

}  // namespace longdoc::inline LONGDOC_ABI

#endif  // LONGDOC_GRADCHECK_HPP_
