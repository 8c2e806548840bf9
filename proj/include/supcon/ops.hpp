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
#include <cstddef>
#include <span>
#include <vector>

#include "supcon/rng.hpp"
#include "supcon/tape.hpp"
#include "supcon/tensor.hpp"

// Differentiable operations. Each op computes its forward value eagerly and,
// when the tape is recording and some input requires a gradient, records the
// local gradient rule on the tape.
//
// Matrix ops use the Tensor matrix view (last dimension = columns).
namespace supcon::ops {

// a [m x k] * b [k x n] -> [m x n]
template <std::floating_point T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// a [m x k] * b^T where b is [n x k] -> [m x n]
template <std::floating_point T>
Tensor<T> matmul_nt(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <std::floating_point T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// Adds bias [n] to every row of x [m x n].
template <std::floating_point T>
Tensor<T> add_bias(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& bias);

template <std::floating_point T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <std::floating_point T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor);

template <std::floating_point T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

template <std::floating_point T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x);

// x [m x k] * w [k x n] + b [n]
template <std::floating_point T>
Tensor<T> linear(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// tanh approximation of GELU
template <std::floating_point T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x);

// Max-subtracted softmax along `axis`.
template <std::floating_point T>
Tensor<T> softmax(Tape<T>& tape, const Tensor<T>& x, std::size_t axis);

// Row softmax of scores [m x n] restricted to columns with key_mask[j] != 0.
// Masked columns get exactly zero probability.
template <std::floating_point T>
Tensor<T> masked_softmax(Tape<T>& tape, const Tensor<T>& scores, std::span<const int> key_mask);

// Per-row normalization over the last dimension followed by gain/bias.
template <std::floating_point T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps = T(1e-5));

// Rows of table [V x d] selected by ids -> [ids.size() x d]. Gradients are
// scatter-added back into the table.
template <std::floating_point T>
Tensor<T> gather_rows(Tape<T>& tape, const Tensor<T>& table, std::span<const int> ids);

template <std::floating_point T>
Tensor<T> slice_columns(Tape<T>& tape, const Tensor<T>& x, std::size_t start, std::size_t width);

template <std::floating_point T>
Tensor<T> concat_columns(Tape<T>& tape, const std::vector<Tensor<T>>& parts);

template <std::floating_point T>
Tensor<T> concat_rows(Tape<T>& tape, const std::vector<Tensor<T>>& parts);

// Mean of the rows of x [m x d] with mask[r] != 0 -> [1 x d].
template <std::floating_point T>
Tensor<T> masked_mean_rows(Tape<T>& tape, const Tensor<T>& x, std::span<const int> mask);

// Each row scaled to unit L2 norm. Zero rows are a DegenerateInputError.
template <std::floating_point T>
Tensor<T> l2_normalize_rows(Tape<T>& tape, const Tensor<T>& x);

// a.b / (|a| |b|) over the flattened tensors -> scalar.
template <std::floating_point T>
Tensor<T> cosine_similarity(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// Inverted dropout. rate == 0 returns x unchanged.
template <std::floating_point T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double rate, Rng& rng);

// Mean over rows of -log softmax(logits)[r, targets[r]].
template <std::floating_point T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                        std::span<const std::size_t> targets);

}  // namespace supcon::ops
