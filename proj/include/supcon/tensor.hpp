// Copyright 2026 The supcon Authors.
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

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "supcon/errors.hpp"

namespace supcon {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// Dense row-major tensor with an optional gradient buffer.
//
// Tensor is a shared handle: copies alias the same storage, which is what the
// compute tape relies on to route gradients back to parameters. Use clone()
// for an independent copy.
template <std::floating_point T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
      : impl_(std::make_shared<Impl>()) {
    if (shape.empty() || std::find(shape.begin(), shape.end(), 0) != shape.end()) {
      throw DimensionError("tensor shape must have positive dimensions, got " + shape_str(shape));
    }
    if (shape_size(shape) != values.size()) {
      throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                           std::to_string(values.size()) + " values");
    }
    impl_->shape = std::move(shape);
    impl_->values = std::move(values);
    impl_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T{0}), requires_grad);
  }

  static Tensor filled(Shape shape, T value, bool requires_grad = false) {
    const auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor({1}, {value}, requires_grad);
  }

  bool defined() const noexcept { return impl_ != nullptr; }
  bool same(const Tensor& other) const noexcept { return impl_ == other.impl_; }

  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->values.size(); }
  std::size_t rank() const { return impl_->shape.size(); }

  // Matrix view: the last dimension is the column count and everything before
  // it folds into rows. A 1-D tensor is a single row.
  std::size_t cols() const { return impl_->shape.back(); }
  std::size_t rows() const { return size() / cols(); }

  std::span<T> values() { return impl_->values; }
  std::span<const T> values() const { return impl_->values; }

  T& operator[](std::size_t i) { return impl_->values[i]; }
  T operator[](std::size_t i) const { return impl_->values[i]; }
  T& at(std::size_t r, std::size_t c) { return impl_->values[r * cols() + c]; }
  T at(std::size_t r, std::size_t c) const { return impl_->values[r * cols() + c]; }

  T item() const {
    if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return impl_->values[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }

  // Gradient buffer, allocated (zero-filled) on first use. Const because the
  // handle, not the storage, is const: ops capture their inputs by value.
  std::span<T> grad_mut() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), T{0});
    return impl_->grad;
  }

  void zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), T{0}); }
  void drop_grad() {
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
  }

  Tensor clone() const {
    Tensor out(impl_->shape, impl_->values, impl_->requires_grad);
    return out;
  }

  template <std::floating_point U>
  Tensor<U> cast() const {
    std::vector<U> v(impl_->values.begin(), impl_->values.end());
    return Tensor<U>(impl_->shape, std::move(v), impl_->requires_grad);
  }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

}  // namespace supcon
