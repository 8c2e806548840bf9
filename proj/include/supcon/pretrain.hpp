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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "supcon/checkpoint.hpp"
#include "supcon/encoder.hpp"
#include "supcon/rng.hpp"
#include "supcon/tape.hpp"
#include "supcon/text.hpp"

namespace supcon {

struct PretrainConfig {
  double temperature = 0.05;
  double mlm_weight = 0.0;  // 0 disables the auxiliary objective
  double masking_rate = 0.15;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  std::uint64_t seed = 42;
  Pooling pooling = Pooling::mean;
  double data_fraction = 1.0;
  double validation_fraction = 0.1;

  void validate() const;
  io::Json to_json() const;
  static PretrainConfig from_json(const io::Json& j);
};

// Mean over rows i of
//   -log( exp(s(a_i, p_i)/tau) / sum_j [exp(s(a_i, p_j)/tau) + exp(s(a_i, n_j)/tau)] )
// with s = cosine similarity. Every in-batch positive and hard negative is a
// candidate for every anchor. Inputs are [N x d].
template <std::floating_point T>
Tensor<T> contrastive_loss(Tape<T>& tape, const Tensor<T>& anchors, const Tensor<T>& positives,
                           const Tensor<T>& negatives, double temperature);

struct MaskedSequence {
  text::TokenSequence corrupted;
  std::vector<int> positions;       // masked positions, ascending
  std::vector<std::size_t> targets;  // original ids at those positions
};

// Selects each non-special, non-padding token independently with probability
// rate and replaces it with [MASK].
MaskedSequence mask_for_mlm(const text::TokenSequence& seq, double rate, Rng& rng);

template <std::floating_point T>
struct MlmTarget {
  Tensor<T> last_hidden;  // [seq x d] final-layer states of the corrupted sequence
  std::vector<int> positions;
  std::vector<std::size_t> targets;
};

// Mean cross-entropy over all masked positions of all items, with logits
// tied to the token embedding (state * E^T). Zero when nothing is masked.
template <std::floating_point T>
Tensor<T> mlm_loss(Tape<T>& tape, const std::vector<MlmTarget<T>>& items,
                   const Tensor<T>& token_embedding);

struct LossRecord {
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  std::string split;  // "train" or "validation"
  double contrastive = 0.0;
  double mlm = 0.0;
  double combined = 0.0;
};

std::string loss_log_csv(std::span<const LossRecord> records);

// Indices kept by data-fraction subsampling. The selection for a smaller
// fraction is always a subset of the selection for a larger one (same seed).
std::vector<std::size_t> subsample_indices(std::size_t count, double fraction, std::uint64_t seed);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LossRecord> log;
};

// Supervised contrastive pretraining, optionally with the auxiliary MLM
// objective. Passing `resume` continues from its weights, optimizer state and
// completed-epoch count up to config.epochs.
TrainResult pretrain(std::span<const text::ContrastiveTriple> triples, const PretrainConfig& config,
                     const EncoderConfig& encoder_config, const text::Vocabulary& vocab,
                     const Checkpoint* resume = nullptr,
                     const std::function<void(const LossRecord&)>& on_record = {});

}  // namespace supcon
