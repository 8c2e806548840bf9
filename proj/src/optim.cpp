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

#include "supcon/optim.hpp"

#include <cmath>

namespace supcon {

template <std::floating_point T>
AdamW<T>::AdamW(std::vector<NamedParameter<T>> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  if (!(config_.learning_rate > 0.0) || config_.beta1 < 0.0 || config_.beta1 >= 1.0 ||
      config_.beta2 < 0.0 || config_.beta2 >= 1.0 || config_.epsilon <= 0.0 ||
      config_.weight_decay < 0.0) {
    throw ConfigError("invalid AdamW hyperparameters");
  }
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), T{0});
    v_.emplace_back(p.tensor.size(), T{0});
  }
}

template <std::floating_point T>
void AdamW<T>::step() {
  for (const auto& p : params_) {
    for (T g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw TrainingDivergence("non-finite gradient in parameter '" + p.name + "' at step " +
                                 std::to_string(steps_ + 1));
      }
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const T b1 = static_cast<T>(config_.beta1);
  const T b2 = static_cast<T>(config_.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(config_.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(config_.beta2, t));
  const T lr = static_cast<T>(config_.learning_rate);
  const T decay = static_cast<T>(config_.learning_rate * config_.weight_decay);
  const T eps = static_cast<T>(config_.epsilon);

  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].tensor;
    auto w = p.values();
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    const bool has_grad = !g.empty();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const T gj = has_grad ? g[j] : T{0};
      w[j] -= decay * w[j];
      m[j] = b1 * m[j] + (T{1} - b1) * gj;
      v[j] = b2 * v[j] + (T{1} - b2) * gj * gj;
      const T mhat = m[j] / correction1;
      const T vhat = v[j] / correction2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template <std::floating_point T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace supcon
