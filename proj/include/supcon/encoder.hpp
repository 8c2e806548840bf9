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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "supcon/io.hpp"
#include "supcon/optim.hpp"
#include "supcon/rng.hpp"
#include "supcon/tape.hpp"
#include "supcon/tensor.hpp"
#include "supcon/text.hpp"

namespace supcon {

struct EncoderConfig {
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t hidden_size = 64;
  std::size_t ff_size = 256;
  std::size_t vocab_size = 0;
  std::size_t max_len = 64;
  double dropout = 0.1;

  std::size_t head_dim() const { return hidden_size / num_heads; }
  void validate() const;  // ConfigError on violation

  io::Json to_json() const;
  static EncoderConfig from_json(const io::Json& j);

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

enum class Pooling { cls, mean, first_last, top2 };

std::optional<Pooling> parse_pooling(std::string_view name);
std::string_view to_string(Pooling pooling);
inline constexpr Pooling kAllPoolings[] = {Pooling::cls, Pooling::mean, Pooling::first_last,
                                           Pooling::top2};

template <std::floating_point T>
struct LayerWeights {
  Tensor<T> query_weight, query_bias;
  Tensor<T> key_weight, key_bias;
  Tensor<T> value_weight, value_bias;
  Tensor<T> output_weight, output_bias;
  Tensor<T> attention_norm_gain, attention_norm_bias;
  Tensor<T> ff_in_weight, ff_in_bias;
  Tensor<T> ff_out_weight, ff_out_bias;
  Tensor<T> ff_norm_gain, ff_norm_bias;
};

template <std::floating_point T>
struct EncoderWeights {
  Tensor<T> token_embedding;     // [V x d]
  Tensor<T> position_embedding;  // [max_len x d]
  std::vector<LayerWeights<T>> layers;

  // Matrices ~ Normal(0, 0.02), biases 0, normalization gains 1.
  static EncoderWeights init(const EncoderConfig& config, std::uint64_t seed);

  // Every learnable tensor, in the fixed order used for checkpoints.
  std::vector<NamedParameter<T>> parameters() const;

  EncoderWeights clone() const;

  template <std::floating_point U>
  EncoderWeights<U> cast() const {
    EncoderWeights<U> out = EncoderWeights<U>::shaped_like(*this);
    auto src = parameters();
    auto dst = out.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
      auto sv = src[i].tensor.values();
      auto dv = dst[i].tensor.values();
      for (std::size_t j = 0; j < sv.size(); ++j) dv[j] = static_cast<U>(sv[j]);
    }
    return out;
  }

  // Zero-filled weights with the same shapes as `other`.
  template <std::floating_point U>
  static EncoderWeights shaped_like(const EncoderWeights<U>& other) {
    EncoderWeights out;
    auto z = [](const Tensor<U>& t) { return Tensor<T>::zeros(t.shape(), true); };
    out.token_embedding = z(other.token_embedding);
    out.position_embedding = z(other.position_embedding);
    for (const auto& l : other.layers) {
      out.layers.push_back({z(l.query_weight), z(l.query_bias), z(l.key_weight), z(l.key_bias),
                            z(l.value_weight), z(l.value_bias), z(l.output_weight), z(l.output_bias),
                            z(l.attention_norm_gain), z(l.attention_norm_bias), z(l.ff_in_weight),
                            z(l.ff_in_bias), z(l.ff_out_weight), z(l.ff_out_bias), z(l.ff_norm_gain),
                            z(l.ff_norm_bias)});
    }
    return out;
  }
};

// Copies parameter values from src into dst (same architecture).
template <std::floating_point T>
void copy_weights(const EncoderWeights<T>& src, EncoderWeights<T>& dst);

template <std::floating_point T>
struct LayerOutputs {
  std::vector<Tensor<T>> hidden;                 // num_layers + 1 states [seq x d]; 0 = embeddings
  std::vector<std::vector<Tensor<T>>> attention;  // [layer][head] -> [seq x seq]
  std::vector<int> mask;
};

// Runs the encoder over one sequence. Dropout is active only when train_mode
// is set, in which case dropout_rng must be provided.
template <std::floating_point T>
LayerOutputs<T> forward(Tape<T>& tape, const text::TokenSequence& seq,
                        const EncoderWeights<T>& weights, const EncoderConfig& config,
                        bool train_mode, Rng* dropout_rng = nullptr);

// Pooled sentence vector [1 x d].
template <std::floating_point T>
Tensor<T> pool(Tape<T>& tape, const LayerOutputs<T>& outputs, std::span<const int> mask,
               Pooling strategy);

// Convenience: forward + pool in evaluation mode, returning plain values.
template <std::floating_point T>
std::vector<T> embed(const text::TokenSequence& seq, const EncoderWeights<T>& weights,
                     const EncoderConfig& config, Pooling strategy);

}  // namespace supcon
