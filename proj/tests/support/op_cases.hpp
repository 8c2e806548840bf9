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
#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "supcon/encoder.hpp"
#include "supcon/ops.hpp"
#include "supcon/pretrain.hpp"
#include "supcon/rng.hpp"

// Finite-difference cases for every differentiable operation and for a full
// micro-encoder loss. Each case draws its inputs in [-1, 1] from the seed.
namespace supcon::testing {

inline Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>(std::move(shape), std::move(v));
}

// sum(out * weights) for fixed random weights, so every output entry carries
// a distinct gradient.
inline Tensor<double> weighted_sum(Tape<double>& tape, const Tensor<double>& out, const Tensor<double>& weights) {
  return ops::sum(tape, ops::mul(tape, out, weights));
}

struct OpCase {
  std::string name;
  std::function<GradCheckResult(std::uint64_t seed)> run;
};

using In = std::vector<std::pair<std::string, Tensor<double>>>;

inline std::vector<OpCase> op_cases() {
  std::vector<OpCase> cases;
  auto unary = [&](std::string name, Shape shape, std::function<Tensor<double>(Tape<double>&, const Tensor<double>&)> op) {
    cases.push_back({name, [shape, op](std::uint64_t seed) {
                       Rng rng(derive_seed(seed, 11));
                       auto x = random_tensor(shape, rng);
                       auto probe_tape = Tape<double>::inference();
                       auto probe = op(probe_tape, x);
                       auto w = random_tensor(probe.shape(), rng);
                       return grad_check([&](Tape<double>& t) { return weighted_sum(t, op(t, x), w); }, In{{"x", x}});
                     }});
  };
  auto binary = [&](std::string name, Shape sa, Shape sb,
                    std::function<Tensor<double>(Tape<double>&, const Tensor<double>&, const Tensor<double>&)> op) {
    cases.push_back({name, [sa, sb, op](std::uint64_t seed) {
                       Rng rng(derive_seed(seed, 12));
                       auto a = random_tensor(sa, rng);
                       auto b = random_tensor(sb, rng);
                       auto probe_tape = Tape<double>::inference();
                       auto probe = op(probe_tape, a, b);
                       auto w = random_tensor(probe.shape(), rng);
                       return grad_check([&](Tape<double>& t) { return weighted_sum(t, op(t, a, b), w); },
                                         In{{"a", a}, {"b", b}});
                     }});
  };

  binary("matmul", {4, 3}, {3, 5}, [](auto& t, auto& a, auto& b) { return ops::matmul(t, a, b); });
  binary("matmul_nt", {4, 3}, {5, 3}, [](auto& t, auto& a, auto& b) { return ops::matmul_nt(t, a, b); });
  binary("add", {3, 4}, {3, 4}, [](auto& t, auto& a, auto& b) { return ops::add(t, a, b); });
  binary("add_bias", {3, 4}, {4}, [](auto& t, auto& a, auto& b) { return ops::add_bias(t, a, b); });
  binary("mul", {3, 4}, {3, 4}, [](auto& t, auto& a, auto& b) { return ops::mul(t, a, b); });
  unary("scale", {3, 4}, [](auto& t, auto& x) { return ops::scale(t, x, -1.7); });
  unary("sum", {3, 4}, [](auto& t, auto& x) { return ops::sum(t, x); });
  unary("mean", {3, 4}, [](auto& t, auto& x) { return ops::mean(t, x); });
  unary("gelu", {3, 4}, [](auto& t, auto& x) { return ops::gelu(t, x); });
  unary("softmax_last_axis", {5}, [](auto& t, auto& x) { return ops::softmax(t, x, 0); });
  unary("softmax_rows", {3, 5}, [](auto& t, auto& x) { return ops::softmax(t, x, 1); });
  unary("softmax_columns", {3, 5}, [](auto& t, auto& x) { return ops::softmax(t, x, 0); });
  unary("masked_softmax", {4, 5}, [](auto& t, auto& x) {
    static const int mask[] = {1, 0, 1, 1, 0};
    return ops::masked_softmax(t, x, std::span<const int>(mask));
  });
  unary("slice_columns", {3, 5}, [](auto& t, auto& x) { return ops::slice_columns(t, x, 1, 3); });
  unary("masked_mean_rows", {4, 3}, [](auto& t, auto& x) {
    static const int mask[] = {1, 1, 0, 1};
    return ops::masked_mean_rows(t, x, std::span<const int>(mask));
  });
  unary("l2_normalize_rows", {3, 4}, [](auto& t, auto& x) { return ops::l2_normalize_rows(t, x); });
  unary("gather_rows", {5, 3}, [](auto& t, auto& x) {
    static const int ids[] = {4, 0, 4, 2};
    return ops::gather_rows(t, x, std::span<const int>(ids));
  });
  unary("dropout", {4, 4}, [](auto& t, auto& x) {
    Rng rng(1234);  // same mask for every evaluation
    return ops::dropout(t, x, 0.3, rng);
  });
  binary("concat_columns", {3, 2}, {3, 4}, [](auto& t, auto& a, auto& b) {
    return ops::concat_columns(t, std::vector<Tensor<double>>{a, b, a});
  });
  binary("concat_rows", {2, 3}, {4, 3}, [](auto& t, auto& a, auto& b) {
    return ops::concat_rows(t, std::vector<Tensor<double>>{b, a});
  });
  binary("cosine_similarity", {6}, {6}, [](auto& t, auto& a, auto& b) { return ops::cosine_similarity(t, a, b); });

  cases.push_back({"linear", [](std::uint64_t seed) {
                     Rng rng(derive_seed(seed, 13));
                     auto x = random_tensor({3, 4}, rng), w = random_tensor({4, 2}, rng), b = random_tensor({2}, rng);
                     auto r = random_tensor({3, 2}, rng);
                     return grad_check([&](Tape<double>& t) { return weighted_sum(t, ops::linear(t, x, w, b), r); },
                                       In{{"x", x}, {"weight", w}, {"bias", b}});
                   }});
  cases.push_back({"layer_norm", [](std::uint64_t seed) {
                     Rng rng(derive_seed(seed, 14));
                     auto x = random_tensor({3, 5}, rng), g = random_tensor({5}, rng), b = random_tensor({5}, rng);
                     auto r = random_tensor({3, 5}, rng);
                     return grad_check(
                         [&](Tape<double>& t) { return weighted_sum(t, ops::layer_norm(t, x, g, b), r); },
                         In{{"x", x}, {"gain", g}, {"bias", b}});
                   }});
  cases.push_back({"cross_entropy", [](std::uint64_t seed) {
                     Rng rng(derive_seed(seed, 15));
                     auto logits = random_tensor({4, 6}, rng);
                     std::vector<std::size_t> targets(4);
                     for (auto& y : targets) y = rng.below(6);
                     return grad_check(
                         [&](Tape<double>& t) {
                           return ops::cross_entropy(t, logits, std::span<const std::size_t>(targets));
                         },
                         In{{"logits", logits}});
                   }});
  cases.push_back({"contrastive_loss", [](std::uint64_t seed) {
                     Rng rng(derive_seed(seed, 16));
                     auto a = random_tensor({3, 5}, rng), p = random_tensor({3, 5}, rng), n = random_tensor({3, 5}, rng);
                     return grad_check([&](Tape<double>& t) { return contrastive_loss(t, a, p, n, 0.5); },
                                       In{{"anchors", a}, {"positives", p}, {"negatives", n}});
                   }});
  cases.push_back({"mlm_loss", [](std::uint64_t seed) {
                     Rng rng(derive_seed(seed, 17));
                     auto hidden = random_tensor({5, 4}, rng), emb = random_tensor({9, 4}, rng);
                     std::vector<MlmTarget<double>> items{{hidden, {1, 3}, {rng.below(9), rng.below(9)}}};
                     return grad_check([&](Tape<double>& t) { return mlm_loss(t, items, emb); },
                                       In{{"hidden", hidden}, {"embedding", emb}});
                   }});
  return cases;
}

inline EncoderConfig micro_encoder_config() {
  EncoderConfig c;
  c.num_layers = 2;
  c.num_heads = 2;
  c.hidden_size = 16;
  c.ff_size = 32;
  c.vocab_size = 12;
  c.max_len = 10;
  c.dropout = 0.1;
  return c;
}

// Contrastive + MLM loss of the 2-layer, d=16, 2-head encoder, in training
// mode with a fixed dropout stream. Weights are redrawn in [-1, 1] scaled by
// 0.5 so the nonlinearities are exercised away from the tiny-init regime.
inline GradCheckResult micro_encoder_grad_check(std::uint64_t seed, std::size_t max_per_tensor = 6) {
  const auto config = micro_encoder_config();
  Rng rng(derive_seed(seed, 21));
  auto weights = EncoderWeights<double>::init(config, seed);
  auto params = weights.parameters();
  for (auto& p : params)
    for (auto& v : p.tensor.values()) v = 0.5 * rng.uniform(-1.0, 1.0);
  const Pooling pooling = kAllPoolings[seed % 4];
  auto sequence = [&](std::size_t len, std::size_t pad) {
    text::TokenSequence s;
    s.ids.push_back(text::kClsId);
    for (std::size_t i = 0; i < len; ++i) s.ids.push_back(static_cast<int>(text::kNumReserved + rng.below(7)));
    s.ids.push_back(text::kSepId);
    s.attention_mask.assign(s.ids.size(), 1);
    for (std::size_t i = 0; i < pad; ++i) {
      s.ids.push_back(text::kPadId);
      s.attention_mask.push_back(0);
    }
    return s;
  };
  std::vector<text::TokenSequence> seqs = {sequence(3, 2), sequence(5, 0), sequence(2, 3),
                                           sequence(4, 1), sequence(1, 0), sequence(3, 0)};
  auto masked = seqs[0];
  masked.ids[2] = text::kMaskId;

  auto loss_fn = [&](Tape<double>& tape) {
    std::vector<Tensor<double>> pooled;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      Rng drop(derive_seed(seed, 22, i));
      auto out = forward(tape, seqs[i], weights, config, true, &drop);
      pooled.push_back(pool(tape, out, std::span<const int>(seqs[i].attention_mask), pooling));
    }
    auto anchors = ops::concat_rows(tape, std::vector<Tensor<double>>{pooled[0], pooled[1]});
    auto positives = ops::concat_rows(tape, std::vector<Tensor<double>>{pooled[2], pooled[3]});
    auto negatives = ops::concat_rows(tape, std::vector<Tensor<double>>{pooled[4], pooled[5]});
    auto cl = contrastive_loss(tape, anchors, positives, negatives, 0.5);
    Rng drop(derive_seed(seed, 23));
    auto out = forward(tape, masked, weights, config, true, &drop);
    std::vector<MlmTarget<double>> items{{out.hidden.back(), {2}, {static_cast<std::size_t>(seqs[0].ids[2])}}};
    auto mlm = mlm_loss(tape, items, weights.token_embedding);
    return ops::add(tape, cl, ops::scale(tape, mlm, 0.3));
  };
  In inputs;
  for (auto& p : params) inputs.push_back({p.name, p.tensor});
  Rng sample(derive_seed(seed, 24));
  return grad_check(loss_fn, inputs, kFiniteDifferenceStep, &sample, max_per_tensor);
}

}  // namespace supcon::testing
