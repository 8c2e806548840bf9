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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "supcon/encoder.hpp"
#include "supcon/io.hpp"
#include "supcon/tensor.hpp"

namespace supcon {

// Optional classifier head stored alongside the encoder by fine-tuning.
struct HeadState {
  io::Json meta;  // task kind, label names, ...
  Tensor<float> weight;  // [d x C]
  Tensor<float> bias;    // [C]
};

struct OptimizerSnapshot {
  std::uint64_t step = 0;
  std::vector<std::vector<float>> first_moments;
  std::vector<std::vector<float>> second_moments;
};

struct Checkpoint {
  EncoderConfig encoder;
  io::Json pretrain = io::Json::object();  // PretrainConfig as written by the trainer
  std::string vocab_hash;
  std::uint64_t step = 0;
  std::size_t epochs_completed = 0;
  EncoderWeights<float> weights;
  std::optional<OptimizerSnapshot> optimizer;
  std::optional<HeadState> head;
};

inline constexpr char kCheckpointMagic[4] = {'V', 'C', 'L', 'S'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (all integers little-endian):
//   "VCLS" | u32 version | u32 header_bytes | JSON header |
//   f32 blobs: encoder parameters in EncoderWeights::parameters() order,
//   then (if present) Adam first moments, Adam second moments, in the same
//   order, then (if present) head weight and head bias.
// The header lists every blob's name and shape and the total float count.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace supcon
