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

#ifndef LONGDOC_TENSOR_HPP_
#define LONGDOC_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "longdoc/real.hpp"

namespace longdoc::inline LONGDOC_ABI {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_product(const Shape& shape);

// Dense row-major float32 array. A default-constructed tensor is empty (rank
// 0, no data); every other tensor has strictly positive extents.
//
// Most operations view a tensor of rank r as a matrix of rows() x cols(),
// where cols() is the last extent and rows() the product of the others.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0.0f);
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor matrix(std::initializer_list<std::initializer_list<Real>> rows);
  static Tensor vector(std::initializer_list<Real> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const;
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  Real* raw() { return data_.data(); }
  const Real* raw() const { return data_.data(); }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }
  Real& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const Real> row(std::size_t r) const {
    return {data_.data() + r * cols(), cols()};
  }

  void fill(Real value);
  Tensor reshaped(Shape shape) const;
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<Real> data_;
};

// Max |a - b| over elements; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);

// A trainable tensor with its accumulated gradient.
struct Parameter {
  Tensor value;
  Tensor grad;

  Parameter() = default;
  explicit Parameter(Tensor v) : value(std::move(v)), grad(value.shape()) {}

  void zero_grad() { grad.fill(0.0f); }
};

}  // namespace longdoc::inline LONGDOC_ABI

#endif  // LONGDOC_TENSOR_HPP_
