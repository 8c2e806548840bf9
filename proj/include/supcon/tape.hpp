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

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <utility>
#include <vector>

#include "supcon/errors.hpp"
#include "supcon/tensor.hpp"

namespace supcon {

// Records differentiable operations in execution order. Because an operation
// can only consume tensors that already exist, the recorded order is a
// topological order and backward() simply replays it in reverse.
//
// A tape constructed with recording disabled turns every op into a plain
// forward computation (evaluation mode).
template <std::floating_point T>
class Tape {
 public:
  // Receives the gradient of the loss w.r.t. the op output and accumulates
  // into the op inputs it captured.
  using BackwardFn = std::function<void(std::span<const T> grad_out)>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  static Tape inference() { return Tape(false); }

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) const {
    if (!recording_) return false;
    for (const auto* t : inputs) {
      if (t->requires_grad()) return true;
    }
    return false;
  }

  bool needs_grad(const std::vector<Tensor<T>>& inputs) const {
    if (!recording_) return false;
    for (const auto& t : inputs) {
      if (t.requires_grad()) return true;
    }
    return false;
  }

  void record(Tensor<T>& output, BackwardFn fn) {
    output.set_requires_grad(true);
    nodes_.push_back(Node{output, std::move(fn)});
  }

  void backward(const Tensor<T>& loss) {
    if (loss.size() != 1) {
      throw ContractError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) {
      throw ContractError("backward() on a loss that does not depend on any parameter");
    }
    Tensor<T> seed = loss;
    seed.grad_mut()[0] = T{1};
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      if (!it->output.has_grad()) continue;
      it->backward(it->output.grad());
    }
  }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor<T> output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  bool recording_;
};

}  // namespace supcon
