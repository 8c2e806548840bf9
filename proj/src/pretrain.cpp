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

#include "supcon/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "supcon/ops.hpp"
#include "supcon/optim.hpp"

namespace supcon {
namespace {

// Stream tags for derive_seed.
enum : std::uint64_t {
  kStreamFraction = 0xf1,
  kStreamSplit = 0xf2,
  kStreamEpoch = 0xf3,
  kStreamDropout = 0xf4,
  kStreamMlmTrain = 0xf5,
  kStreamMlmValidation = 0xf6,
};

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void PretrainConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(mlm_weight >= 0.0)) throw ConfigError("mlm_weight must be non-negative");
  if (!(masking_rate > 0.0 && masking_rate < 1.0)) throw ConfigError("masking_rate must lie in (0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(data_fraction > 0.0 && data_fraction <= 1.0)) throw ConfigError("data_fraction must lie in (0, 1]");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in [0, 1)");
  }
}

io::Json PretrainConfig::to_json() const {
  return io::Json{{"temperature", temperature},
                  {"mlm_weight", mlm_weight},
                  {"masking_rate", masking_rate},
                  {"batch_size", batch_size},
                  {"epochs", epochs},
                  {"learning_rate", learning_rate},
                  {"weight_decay", weight_decay},
                  {"seed", seed},
                  {"pooling", std::string(to_string(pooling))},
                  {"data_fraction", data_fraction},
                  {"validation_fraction", validation_fraction}};
}

PretrainConfig PretrainConfig::from_json(const io::Json& j) {
  PretrainConfig c;
  try {
    c.temperature = j.at("temperature").get<double>();
    c.mlm_weight = j.at("mlm_weight").get<double>();
    c.masking_rate = j.at("masking_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    auto pooling = parse_pooling(j.at("pooling").get<std::string>());
    if (!pooling) throw FormatError("unknown pooling in pretrain config");
    c.pooling = *pooling;
    c.data_fraction = j.at("data_fraction").get<double>();
    c.validation_fraction = j.at("validation_fraction").get<double>();
  } catch (const io::Json::exception& e) {
    throw FormatError(std::string("bad pretrain config: ") + e.what());
  }
  c.validate();
  return c;
}

template <std::floating_point T>
Tensor<T> contrastive_loss(Tape<T>& tape, const Tensor<T>& anchors, const Tensor<T>& positives,
                           const Tensor<T>& negatives, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("contrastive_loss: temperature must be positive");
  if (anchors.rank() != 2 || positives.shape() != anchors.shape() || negatives.shape() != anchors.shape()) {
    throw DimensionError("contrastive_loss: anchors " + shape_str(anchors.shape()) + ", positives " +
                         shape_str(positives.shape()) + ", negatives " + shape_str(negatives.shape()));
  }
  const std::size_t n = anchors.rows();
  auto a = ops::l2_normalize_rows(tape, anchors);
  auto p = ops::l2_normalize_rows(tape, positives);
  auto h = ops::l2_normalize_rows(tape, negatives);
  auto sims = ops::concat_columns(tape, {ops::matmul_nt(tape, a, p), ops::matmul_nt(tape, a, h)});
  auto logits = ops::scale(tape, sims, static_cast<T>(1.0 / temperature));
  std::vector<std::size_t> targets(n);
  std::iota(targets.begin(), targets.end(), std::size_t{0});
  return ops::cross_entropy(tape, logits, std::span<const std::size_t>(targets));
}

MaskedSequence mask_for_mlm(const text::TokenSequence& seq, double rate, Rng& rng) {
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("masking rate must lie in (0, 1)");
  MaskedSequence out;
  out.corrupted = seq;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    const int id = seq.ids[i];
    if (!seq.attention_mask[i] || text::is_special(id)) continue;
    if (!rng.bernoulli(rate)) continue;
    out.positions.push_back(static_cast<int>(i));
    out.targets.push_back(static_cast<std::size_t>(id));
    out.corrupted.ids[i] = text::kMaskId;
  }
  return out;
}

template <std::floating_point T>
Tensor<T> mlm_loss(Tape<T>& tape, const std::vector<MlmTarget<T>>& items, const Tensor<T>& token_embedding) {
  std::vector<Tensor<T>> rows;
  std::vector<std::size_t> targets;
  for (const auto& item : items) {
    if (item.positions.size() != item.targets.size()) {
      throw DimensionError("mlm_loss: positions and targets differ in length");
    }
    if (item.positions.empty()) continue;
    rows.push_back(ops::gather_rows(tape, item.last_hidden, std::span<const int>(item.positions)));
    targets.insert(targets.end(), item.targets.begin(), item.targets.end());
  }
  if (rows.empty()) return Tensor<T>::scalar(T{0});
  auto states = rows.size() == 1 ? rows.front() : ops::concat_rows(tape, rows);
  auto logits = ops::matmul_nt(tape, states, token_embedding);
  return ops::cross_entropy(tape, logits, std::span<const std::size_t>(targets));
}

std::string loss_log_csv(std::span<const LossRecord> records) {
  std::string out = "epoch,step,split,contrastive,mlm,combined\n";
  for (const auto& r : records) {
    out += std::to_string(r.epoch) + ',' + std::to_string(r.step) + ',' + r.split + ',' +
           fmt_double(r.contrastive) + ',' + fmt_double(r.mlm) + ',' + fmt_double(r.combined) + '\n';
  }
  return out;
}

std::vector<std::size_t> subsample_indices(std::size_t count, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("data fraction must lie in (0, 1]");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kStreamFraction));
  rng.shuffle(std::span<std::size_t>(order));
  auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(count) - 1e-9));
  keep = std::clamp<std::size_t>(keep, count ? 1 : 0, count);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

namespace {

struct EncodedTriple {
  std::size_t index;  // position in the input triple list
  text::TokenSequence anchor, positive, negative;
};

struct BatchLosses {
  double contrastive = 0.0;
  double mlm = 0.0;
};

class ContrastiveTrainer {
 public:
  ContrastiveTrainer(const PretrainConfig& config, const EncoderConfig& enc, EncoderWeights<float>& weights)
      : config_(config), enc_(enc), weights_(weights) {}

  // One forward pass over a batch. With a recording tape the combined loss is
  // returned for backward(); dropout is only applied when train is set.
  std::pair<Tensor<float>, BatchLosses> run_batch(Tape<float>& tape, std::span<const EncodedTriple> batch,
                                                  bool train, std::uint64_t step, std::size_t epoch) {
    std::vector<Tensor<float>> anchors, positives, negatives;
    std::vector<MlmTarget<float>> mlm_items;
    const bool with_mlm = config_.mlm_weight > 0.0;
    for (std::size_t r = 0; r < batch.size(); ++r) {
      const auto& item = batch[r];
      const text::TokenSequence* seqs[3] = {&item.anchor, &item.positive, &item.negative};
      std::vector<Tensor<float>>* sinks[3] = {&anchors, &positives, &negatives};
      for (std::size_t s = 0; s < 3; ++s) {
        Rng rng(derive_seed(config_.seed, kStreamDropout, step, r * 4 + s));
        auto out = forward(tape, *seqs[s], weights_, enc_, train, &rng);
        sinks[s]->push_back(pool(tape, out, std::span<const int>(seqs[s]->attention_mask), config_.pooling));
      }
      if (with_mlm) {
        Rng mask_rng(derive_seed(config_.seed, train ? kStreamMlmTrain : kStreamMlmValidation, epoch, item.index));
        auto masked = mask_for_mlm(item.anchor, config_.masking_rate, mask_rng);
        if (!masked.positions.empty()) {
          Rng rng(derive_seed(config_.seed, kStreamDropout, step, r * 4 + 3));
          auto out = forward(tape, masked.corrupted, weights_, enc_, train, &rng);
          mlm_items.push_back({out.hidden.back(), std::move(masked.positions), std::move(masked.targets)});
        }
      }
    }
    auto cl = contrastive_loss(tape, ops::concat_rows(tape, anchors), ops::concat_rows(tape, positives),
                               ops::concat_rows(tape, negatives), config_.temperature);
    BatchLosses losses{cl.item(), 0.0};
    Tensor<float> total = cl;
    if (with_mlm) {
      auto mlm = mlm_loss(tape, mlm_items, weights_.token_embedding);
      losses.mlm = mlm.item();
      if (mlm.requires_grad()) {
        total = ops::add(tape, cl, ops::scale(tape, mlm, static_cast<float>(config_.mlm_weight)));
      }
    }
    return {total, losses};
  }

 private:
  const PretrainConfig& config_;
  const EncoderConfig& enc_;
  EncoderWeights<float>& weights_;
};

EncodedTriple encode_triple(const text::ContrastiveTriple& t, std::size_t index, const text::Vocabulary& vocab,
                            std::size_t max_len) {
  return {index, text::encode_single(t.sentence1, vocab, max_len), text::encode_single(t.sentence2, vocab, max_len),
          text::encode_single(t.hard_neg, vocab, max_len)};
}

}  // namespace

TrainResult pretrain(std::span<const text::ContrastiveTriple> triples, const PretrainConfig& config,
                     const EncoderConfig& encoder_config, const text::Vocabulary& vocab, const Checkpoint* resume,
                     const std::function<void(const LossRecord&)>& on_record) {
  config.validate();
  encoder_config.validate();
  if (triples.empty()) throw DataError("pretraining needs at least one triple");
  if (encoder_config.vocab_size != vocab.size()) {
    throw ConfigError("encoder vocab_size " + std::to_string(encoder_config.vocab_size) +
                      " differs from vocabulary size " + std::to_string(vocab.size()));
  }

  // Subsample first, then hold out the validation split from the selection.
  auto selected = subsample_indices(triples.size(), config.data_fraction, config.seed);
  std::vector<std::size_t> shuffled = selected;
  Rng split_rng(derive_seed(config.seed, kStreamSplit));
  split_rng.shuffle(std::span<std::size_t>(shuffled));
  std::size_t n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(selected.size())));
  if (n_val >= selected.size()) n_val = selected.size() - 1;
  std::vector<std::size_t> val_idx(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(shuffled.begin() + static_cast<std::ptrdiff_t>(n_val), shuffled.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  std::vector<EncodedTriple> train_set, val_set;
  for (auto i : train_idx) train_set.push_back(encode_triple(triples[i], i, vocab, encoder_config.max_len));
  for (auto i : val_idx) val_set.push_back(encode_triple(triples[i], i, vocab, encoder_config.max_len));

  TrainResult result;
  Checkpoint& ckpt = result.checkpoint;
  ckpt.encoder = encoder_config;
  ckpt.pretrain = config.to_json();
  ckpt.vocab_hash = vocab.hash();
  std::size_t start_epoch = 0;
  if (resume) {
    if (resume->encoder != encoder_config) throw ConfigError("resume checkpoint has a different encoder config");
    if (resume->vocab_hash != ckpt.vocab_hash) throw ConfigError("resume checkpoint was trained with another vocabulary");
    ckpt.weights = resume->weights.clone();
    start_epoch = resume->epochs_completed;
  } else {
    ckpt.weights = EncoderWeights<float>::init(encoder_config, config.seed);
  }

  AdamW<float> optimizer(ckpt.weights.parameters(), AdamWConfig{config.learning_rate, 0.9, 0.999, 1e-8,
                                                                config.weight_decay});
  if (resume && resume->optimizer) {
    optimizer.first_moments() = resume->optimizer->first_moments;
    optimizer.second_moments() = resume->optimizer->second_moments;
    optimizer.set_step_count(resume->optimizer->step);
  }

  ContrastiveTrainer trainer(config, encoder_config, ckpt.weights);
  auto emit = [&](LossRecord rec) {
    rec.combined = rec.contrastive + config.mlm_weight * rec.mlm;
    if (on_record) on_record(rec);
    result.log.push_back(std::move(rec));
  };

  for (std::size_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng epoch_rng(derive_seed(config.seed, kStreamEpoch, epoch));
    epoch_rng.shuffle(std::span<std::size_t>(order));

    double sum_cl = 0.0, sum_mlm = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      std::vector<EncodedTriple> batch;
      for (std::size_t i = b; i < e; ++i) batch.push_back(train_set[order[i]]);
      const std::uint64_t step = optimizer.step_count() + 1;

      Tape<float> tape;
      auto [loss, parts] = trainer.run_batch(tape, batch, true, step, epoch);
      if (!std::isfinite(loss.item())) {
        throw TrainingDivergence("non-finite loss at step " + std::to_string(step));
      }
      optimizer.zero_grad();
      tape.backward(loss);
      optimizer.step();
      sum_cl += parts.contrastive * static_cast<double>(batch.size());
      sum_mlm += parts.mlm * static_cast<double>(batch.size());
    }
    const double n_train = static_cast<double>(train_set.size());
    emit({epoch + 1, optimizer.step_count(), "train", sum_cl / n_train, sum_mlm / n_train, 0.0});

    if (!val_set.empty()) {
      double v_cl = 0.0, v_mlm = 0.0;
      for (std::size_t b = 0; b < val_set.size(); b += config.batch_size) {
        const std::size_t e = std::min(val_set.size(), b + config.batch_size);
        auto tape = Tape<float>::inference();
        std::span<const EncodedTriple> batch(val_set.data() + b, e - b);
        auto [loss, parts] = trainer.run_batch(tape, batch, false, 0, epoch);
        v_cl += parts.contrastive * static_cast<double>(batch.size());
        v_mlm += parts.mlm * static_cast<double>(batch.size());
      }
      const double n_val_d = static_cast<double>(val_set.size());
      emit({epoch + 1, optimizer.step_count(), "validation", v_cl / n_val_d, v_mlm / n_val_d, 0.0});
    }
  }

  ckpt.step = optimizer.step_count();
  ckpt.epochs_completed = std::max(start_epoch, config.epochs);
  ckpt.optimizer = OptimizerSnapshot{optimizer.step_count(), optimizer.first_moments(), optimizer.second_moments()};
  for (auto& p : ckpt.weights.parameters()) p.tensor.drop_grad();
  return result;
}

template Tensor<float> contrastive_loss(Tape<float>&, const Tensor<float>&, const Tensor<float>&,
                                       const Tensor<float>&, double);
template Tensor<double> contrastive_loss(Tape<double>&, const Tensor<double>&, const Tensor<double>&,
                                        const Tensor<double>&, double);
template Tensor<float> mlm_loss(Tape<float>&, const std::vector<MlmTarget<float>>&, const Tensor<float>&);
template Tensor<double> mlm_loss(Tape<double>&, const std::vector<MlmTarget<double>>&, const Tensor<double>&);

}  // namespace supcon
