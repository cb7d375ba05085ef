/* Copyright 2026 The svae Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "svae/errors.hpp"

namespace svae {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/**
 * Dense row-major array of doubles with an optional gradient slot of the
 * same shape. The gradient slot is empty until something accumulates into it.
 */
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(checked_size(shape_), 0.0) {}

  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vector(std::vector<double> v) {
    const std::size_t n = v.size();
    return Tensor({n}, std::move(v));
  }
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_.front(); }
  std::size_t cols() const { return rank() == 2 ? shape_[1] : 1; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }

  bool has_grad() const { return !grad_.empty(); }
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }

  // Allocates a zeroed gradient slot if none exists.
  std::span<double> ensure_grad() {
    if (grad_.empty()) grad_.assign(data_.size(), 0.0);
    return grad_;
  }
  void zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }
  void clear_grad() { grad_.clear(); }

 private:
  static std::size_t checked_size(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one extent");
    for (std::size_t extent : shape) {
      if (extent == 0) throw DimensionError("tensor shape " + shape_string(shape) + " has a zero extent");
    }
    return shape_size(shape);
  }

  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
};

}  // namespace svae
