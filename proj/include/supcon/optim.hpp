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

#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include "supcon/tensor.hpp"

namespace supcon {

template <std::floating_point T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
};

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Adam with decoupled weight decay and bias-corrected moments.
template <std::floating_point T>
class AdamW {
 public:
  AdamW(std::vector<NamedParameter<T>> params, AdamWConfig config);

  // Applies one update from the gradients currently stored on the parameters.
  // Throws TrainingDivergence naming the first parameter with a non-finite
  // gradient; nothing is modified in that case.
  void step();

  void zero_grad();

  std::uint64_t step_count() const noexcept { return steps_; }
  const AdamWConfig& config() const noexcept { return config_; }
  const std::vector<NamedParameter<T>>& parameters() const noexcept { return params_; }

  // Moment accumulators, one per parameter in parameter order. Exposed for
  // checkpointing.
  std::vector<std::vector<T>>& first_moments() noexcept { return m_; }
  std::vector<std::vector<T>>& second_moments() noexcept { return v_; }
  const std::vector<std::vector<T>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<T>>& second_moments() const noexcept { return v_; }
  void set_step_count(std::uint64_t steps) noexcept { steps_ = steps; }

 private:
  std::vector<NamedParameter<T>> params_;
  AdamWConfig config_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::uint64_t steps_ = 0;
};

}  // namespace supcon
