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

#include "supcon/encoder.hpp"

#include <cmath>
#include <numeric>

#include "supcon/ops.hpp"

namespace supcon {

void EncoderConfig::validate() const {
  if (num_layers == 0 || num_heads == 0 || hidden_size == 0 || ff_size == 0 || max_len == 0) {
    throw ConfigError("encoder dimensions must all be positive");
  }
  if (vocab_size <= static_cast<std::size_t>(text::kNumReserved)) {
    throw ConfigError("encoder vocab_size must exceed the reserved token count");
  }
  if (hidden_size % num_heads != 0) {
    throw ConfigError("hidden_size " + std::to_string(hidden_size) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

io::Json EncoderConfig::to_json() const {
  return io::Json{{"num_layers", num_layers}, {"num_heads", num_heads}, {"hidden_size", hidden_size},
                  {"ff_size", ff_size},       {"vocab_size", vocab_size}, {"max_len", max_len},
                  {"dropout", dropout}};
}

EncoderConfig EncoderConfig::from_json(const io::Json& j) {
  EncoderConfig c;
  try {
    c.num_layers = j.at("num_layers").get<std::size_t>();
    c.num_heads = j.at("num_heads").get<std::size_t>();
    c.hidden_size = j.at("hidden_size").get<std::size_t>();
    c.ff_size = j.at("ff_size").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
  } catch (const io::Json::exception& e) {
    throw FormatError(std::string("bad encoder config: ") + e.what());
  }
  c.validate();
  return c;
}

std::optional<Pooling> parse_pooling(std::string_view name) {
  if (name == "cls") return Pooling::cls;
  if (name == "mean") return Pooling::mean;
  if (name == "first_last") return Pooling::first_last;
  if (name == "top2") return Pooling::top2;
  return std::nullopt;
}

std::string_view to_string(Pooling pooling) {
  switch (pooling) {
    case Pooling::cls:
      return "cls";
    case Pooling::mean:
      return "mean";
    case Pooling::first_last:
      return "first_last";
    case Pooling::top2:
      return "top2";
  }
  return "cls";
}

template <std::floating_point T>
EncoderWeights<T> EncoderWeights<T>::init(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, 0x1417));
  const std::size_t d = config.hidden_size;
  auto normal = [&](Shape shape) {
    auto t = Tensor<T>::zeros(std::move(shape), true);
    for (auto& v : t.values()) v = static_cast<T>(rng.normal(0.0, 0.02));
    return t;
  };
  auto zeros = [](std::size_t n) { return Tensor<T>::zeros({n}, true); };
  auto ones = [](std::size_t n) { return Tensor<T>::filled({n}, T{1}, true); };

  EncoderWeights w;
  w.token_embedding = normal({config.vocab_size, d});
  w.position_embedding = normal({config.max_len, d});
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    LayerWeights<T> layer;
    layer.query_weight = normal({d, d});
    layer.query_bias = zeros(d);
    layer.key_weight = normal({d, d});
    layer.key_bias = zeros(d);
    layer.value_weight = normal({d, d});
    layer.value_bias = zeros(d);
    layer.output_weight = normal({d, d});
    layer.output_bias = zeros(d);
    layer.attention_norm_gain = ones(d);
    layer.attention_norm_bias = zeros(d);
    layer.ff_in_weight = normal({d, config.ff_size});
    layer.ff_in_bias = zeros(config.ff_size);
    layer.ff_out_weight = normal({config.ff_size, d});
    layer.ff_out_bias = zeros(d);
    layer.ff_norm_gain = ones(d);
    layer.ff_norm_bias = zeros(d);
    w.layers.push_back(std::move(layer));
  }
  return w;
}

template <std::floating_point T>
std::vector<NamedParameter<T>> EncoderWeights<T>::parameters() const {
  std::vector<NamedParameter<T>> out;
  out.push_back({"embeddings.token", token_embedding});
  out.push_back({"embeddings.position", position_embedding});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    out.push_back({p + "attention.query.weight", L.query_weight});
    out.push_back({p + "attention.query.bias", L.query_bias});
    out.push_back({p + "attention.key.weight", L.key_weight});
    out.push_back({p + "attention.key.bias", L.key_bias});
    out.push_back({p + "attention.value.weight", L.value_weight});
    out.push_back({p + "attention.value.bias", L.value_bias});
    out.push_back({p + "attention.output.weight", L.output_weight});
    out.push_back({p + "attention.output.bias", L.output_bias});
    out.push_back({p + "attention.norm.gain", L.attention_norm_gain});
    out.push_back({p + "attention.norm.bias", L.attention_norm_bias});
    out.push_back({p + "ff.in.weight", L.ff_in_weight});
    out.push_back({p + "ff.in.bias", L.ff_in_bias});
    out.push_back({p + "ff.out.weight", L.ff_out_weight});
    out.push_back({p + "ff.out.bias", L.ff_out_bias});
    out.push_back({p + "ff.norm.gain", L.ff_norm_gain});
    out.push_back({p + "ff.norm.bias", L.ff_norm_bias});
  }
  return out;
}

template <std::floating_point T>
EncoderWeights<T> EncoderWeights<T>::clone() const {
  EncoderWeights out = shaped_like(*this);
  copy_weights(*this, out);
  return out;
}

template <std::floating_point T>
void copy_weights(const EncoderWeights<T>& src, EncoderWeights<T>& dst) {
  auto s = src.parameters();
  auto d = dst.parameters();
  if (s.size() != d.size()) throw DimensionError("copy_weights: architectures differ");
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].tensor.shape() != d[i].tensor.shape()) {
      throw DimensionError("copy_weights: shape mismatch for " + s[i].name);
    }
    std::copy(s[i].tensor.values().begin(), s[i].tensor.values().end(), d[i].tensor.values().begin());
  }
}

template <std::floating_point T>
LayerOutputs<T> forward(Tape<T>& tape, const text::TokenSequence& seq, const EncoderWeights<T>& weights,
                        const EncoderConfig& config, bool train_mode, Rng* dropout_rng) {
  const std::size_t n = seq.ids.size();
  if (n == 0) throw DegenerateInputError("forward: empty token sequence");
  if (n > config.max_len) {
    throw DimensionError("forward: sequence length " + std::to_string(n) + " exceeds max_len " +
                         std::to_string(config.max_len));
  }
  if (seq.attention_mask.size() != n) throw DimensionError("forward: mask length differs from ids");
  for (int id : seq.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
      throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(config.vocab_size));
    }
  }
  const double rate = train_mode ? config.dropout : 0.0;
  if (rate > 0.0 && dropout_rng == nullptr) {
    throw ContractError("forward: train mode with dropout needs a random source");
  }
  auto drop = [&](const Tensor<T>& x) { return rate > 0.0 ? ops::dropout(tape, x, rate, *dropout_rng) : x; };

  std::vector<int> positions(n);
  std::iota(positions.begin(), positions.end(), 0);

  LayerOutputs<T> out;
  out.mask = seq.attention_mask;
  auto x = ops::add(tape, ops::gather_rows(tape, weights.token_embedding, std::span<const int>(seq.ids)),
                    ops::gather_rows(tape, weights.position_embedding, std::span<const int>(positions)));
  x = drop(x);
  out.hidden.push_back(x);

  const std::size_t heads = config.num_heads;
  const std::size_t dh = config.head_dim();
  const T inv_sqrt_dh = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
  const std::span<const int> mask(seq.attention_mask);

  for (const auto& layer : weights.layers) {
    auto q = ops::linear(tape, x, layer.query_weight, layer.query_bias);
    auto k = ops::linear(tape, x, layer.key_weight, layer.key_bias);
    auto v = ops::linear(tape, x, layer.value_weight, layer.value_bias);
    std::vector<Tensor<T>> contexts;
    std::vector<Tensor<T>> maps;
    contexts.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      auto qh = ops::slice_columns(tape, q, h * dh, dh);
      auto kh = ops::slice_columns(tape, k, h * dh, dh);
      auto vh = ops::slice_columns(tape, v, h * dh, dh);
      auto scores = ops::scale(tape, ops::matmul_nt(tape, qh, kh), inv_sqrt_dh);
      auto probs = ops::masked_softmax(tape, scores, mask);
      maps.push_back(probs);
      contexts.push_back(ops::matmul(tape, probs, vh));
    }
    auto attended = ops::linear(tape, ops::concat_columns(tape, contexts), layer.output_weight,
                                layer.output_bias);
    x = ops::layer_norm(tape, ops::add(tape, x, drop(attended)), layer.attention_norm_gain,
                        layer.attention_norm_bias);
    auto ff = ops::linear(tape, ops::gelu(tape, ops::linear(tape, x, layer.ff_in_weight, layer.ff_in_bias)),
                          layer.ff_out_weight, layer.ff_out_bias);
    x = ops::layer_norm(tape, ops::add(tape, x, drop(ff)), layer.ff_norm_gain, layer.ff_norm_bias);
    out.hidden.push_back(x);
    out.attention.push_back(std::move(maps));
  }
  return out;
}

template <std::floating_point T>
Tensor<T> pool(Tape<T>& tape, const LayerOutputs<T>& outputs, std::span<const int> mask,
               Pooling strategy) {
  if (outputs.hidden.size() < 2) throw ContractError("pool: outputs carry no encoder layers");
  const auto& last = outputs.hidden.back();
  if (mask.size() != last.rows()) {
    throw DimensionError("pool: mask of length " + std::to_string(mask.size()) + " for " +
                         std::to_string(last.rows()) + " positions");
  }
  if (std::none_of(mask.begin(), mask.end(), [](int m) { return m != 0; })) {
    throw DegenerateInputError("pool: every position is padding");
  }
  const std::size_t num_layers = outputs.hidden.size() - 1;
  switch (strategy) {
    case Pooling::cls: {
      const int first = 0;
      return ops::gather_rows(tape, last, std::span<const int>(&first, 1));
    }
    case Pooling::mean:
      return ops::masked_mean_rows(tape, last, mask);
    case Pooling::first_last:
    case Pooling::top2: {
      const std::size_t lo = strategy == Pooling::first_last ? 1 : num_layers - 1;
      auto avg = ops::scale(tape, ops::add(tape, outputs.hidden[lo], last), T(0.5));
      return ops::masked_mean_rows(tape, avg, mask);
    }
  }
  throw ContractError("pool: unknown strategy");
}

template <std::floating_point T>
std::vector<T> embed(const text::TokenSequence& seq, const EncoderWeights<T>& weights,
                     const EncoderConfig& config, Pooling strategy) {
  auto tape = Tape<T>::inference();
  auto outputs = forward(tape, seq, weights, config, false);
  auto pooled = pool(tape, outputs, std::span<const int>(seq.attention_mask), strategy);
  return {pooled.values().begin(), pooled.values().end()};
}

template struct EncoderWeights<float>;
template struct EncoderWeights<double>;

#define SUPCON_INSTANTIATE_ENCODER(T)                                                              \
  template void copy_weights(const EncoderWeights<T>&, EncoderWeights<T>&);                        \
  template LayerOutputs<T> forward(Tape<T>&, const text::TokenSequence&, const EncoderWeights<T>&, \
                                   const EncoderConfig&, bool, Rng*);                              \
  template Tensor<T> pool(Tape<T>&, const LayerOutputs<T>&, std::span<const int>, Pooling);        \
  template std::vector<T> embed(const text::TokenSequence&, const EncoderWeights<T>&,              \
                                const EncoderConfig&, Pooling);

SUPCON_INSTANTIATE_ENCODER(float)
SUPCON_INSTANTIATE_ENCODER(double)

#undef SUPCON_INSTANTIATE_ENCODER

}  // namespace supcon
