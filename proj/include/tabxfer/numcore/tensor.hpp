// Copyright 2026 The tabxfer Authors
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

#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabxfer {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense row-major array. Graph operations work on rank-2 tensors; a scalar
// is 1x1.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), data(shape_size(shape), fill) {
    check_dims();
  }

  Tensor(Shape s, std::vector<T> values) : shape(std::move(s)), data(std::move(values)) {
    check_dims();
    if (data.size() != shape_size(shape)) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                       shape_string(shape));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, T fill = T(0)) {
    return Tensor(Shape{rows, cols}, fill);
  }
  static Tensor scalar(T v) { return Tensor(Shape{1, 1}, std::vector<T>{v}); }

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : data.size() / shape[0]; }

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols(), cols()}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }

  T item() const {
    if (data.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape));
    return data[0];
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  void check_dims() const {
    for (std::size_t d : shape) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_string(shape));
    }
  }
};

}  // namespace tabxfer
