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

#include "supcon/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "supcon/errors.hpp"
#include "supcon/ops.hpp"
#include "supcon/optim.hpp"
#include "supcon/rng.hpp"

namespace supcon::finetune {
namespace {

enum : std::uint64_t {
  kStreamHead = 0x4ead,
  kStreamEpoch = 0xe1,
  kStreamDropout = 0xe2,
};

std::string record_id(const io::Json& rec, const std::string& field, std::size_t line) {
  auto it = rec.find(field);
  if (it == rec.end()) return std::to_string(line);
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw DataError("field \"" + field + "\" must be a string or integer", line);
}

std::size_t require_label(const io::Json& rec, const TaskSpec& task, std::size_t line) {
  auto name = io::require_string(rec, task.fields.label, line);
  auto idx = task.label_index(name);
  if (!idx) throw DataError("unknown label \"" + name + "\"", line);
  return *idx;
}

std::vector<double> softmax_probs(const Tensor<float>& logits) {
  auto v = logits.values();
  double mx = -INFINITY;
  for (float x : v) mx = std::max(mx, static_cast<double>(x));
  std::vector<double> p(v.size());
  double z = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) z += p[i] = std::exp(static_cast<double>(v[i]) - mx);
  for (auto& x : p) x /= z;
  return p;
}

std::vector<std::vector<double>> mrc_choice_probabilities(const TunedModel& model, const text::Vocabulary& vocab,
                                                          std::string_view context, std::string_view question,
                                                          std::span<const std::string> choices) {
  std::vector<std::vector<double>> out;
  for (const auto& choice : choices) {
    LabeledExample ex{"", mrc_statement(question, choice), std::string(context), 0};
    out.push_back(class_probabilities(model, vocab, ex));
  }
  return out;
}

std::vector<NamedParameter<float>> trainable(const TunedModel& m) {
  auto params = m.weights.parameters();
  params.push_back({"head.weight", m.head.weight});
  params.push_back({"head.bias", m.head.bias});
  return params;
}

}  // namespace

std::optional<TaskKind> parse_task_kind(std::string_view name) {
  if (name == "pair") return TaskKind::pair;
  if (name == "single") return TaskKind::single;
  if (name == "mrc") return TaskKind::mrc;
  return std::nullopt;
}

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::pair: return "pair";
    case TaskKind::single: return "single";
    case TaskKind::mrc: return "mrc";
  }
  return "pair";
}

TaskSpec TaskSpec::multiple_choice(FieldMapping fields) {
  return {TaskKind::mrc, {"entailment", "contradiction"}, std::move(fields)};
}

void TaskSpec::validate() const {
  if (labels.size() < 2) throw ConfigError("a task needs at least two labels");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i].empty()) throw ConfigError("empty label name");
    for (std::size_t j = 0; j < i; ++j)
      if (labels[i] == labels[j]) throw ConfigError("duplicate label \"" + labels[i] + "\"");
  }
  if (kind == TaskKind::mrc && labels != std::vector<std::string>{"entailment", "contradiction"}) {
    throw ConfigError("multiple-choice tasks use the labels entailment,contradiction");
  }
}

std::optional<std::size_t> TaskSpec::label_index(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return i;
  return std::nullopt;
}

io::Json TaskSpec::to_json() const {
  return {{"kind", std::string(to_string(kind))},
          {"labels", labels},
          {"fields",
           {{"text_a", fields.text_a},
            {"text_b", fields.text_b},
            {"text", fields.text},
            {"label", fields.label},
            {"context", fields.context},
            {"question", fields.question},
            {"choices", fields.choices},
            {"answer", fields.answer},
            {"id", fields.id}}}};
}

TaskSpec TaskSpec::from_json(const io::Json& j) {
  TaskSpec t;
  auto kind = parse_task_kind(j.at("kind").get<std::string>());
  if (!kind) throw FormatError("unknown task kind in head metadata");
  t.kind = *kind;
  t.labels = j.at("labels").get<std::vector<std::string>>();
  const auto& f = j.at("fields");
  t.fields = {f.at("text_a").get<std::string>(),   f.at("text_b").get<std::string>(),
              f.at("text").get<std::string>(),     f.at("label").get<std::string>(),
              f.at("context").get<std::string>(),  f.at("question").get<std::string>(),
              f.at("choices").get<std::string>(),  f.at("answer").get<std::string>(),
              f.at("id").get<std::string>()};
  return t;
}

TaskData read_task_jsonl(const std::filesystem::path& path, const TaskSpec& task) {
  task.validate();
  TaskData data;
  const auto& f = task.fields;
  io::for_each_jsonl(path, [&](const io::Json& rec, std::size_t line) {
    auto id = record_id(rec, f.id, line);
    switch (task.kind) {
      case TaskKind::pair:
        data.examples.push_back({std::move(id), io::require_string(rec, f.text_a, line),
                                 io::require_string(rec, f.text_b, line), require_label(rec, task, line)});
        break;
      case TaskKind::single:
        data.examples.push_back(
            {std::move(id), io::require_string(rec, f.text, line), "", require_label(rec, task, line)});
        break;
      case TaskKind::mrc: {
        MrcQuestion q;
        q.id = std::move(id);
        q.context = io::require_string(rec, f.context, line);
        q.question = io::require_string(rec, f.question, line);
        auto it = rec.find(f.choices);
        if (it == rec.end() || !it->is_array() || it->empty()) {
          throw DataError("field \"" + f.choices + "\" must be a non-empty array of strings", line);
        }
        for (const auto& c : *it) {
          if (!c.is_string()) throw DataError("choices must be strings", line);
          q.choices.push_back(c.get<std::string>());
        }
        auto answer = io::require_integer(rec, f.answer, line);
        if (answer < 0 || static_cast<std::size_t>(answer) >= q.choices.size()) {
          throw DataError("answer index " + std::to_string(answer) + " outside the " +
                              std::to_string(q.choices.size()) + " choices",
                          line);
        }
        q.answer = static_cast<std::size_t>(answer);
        data.questions.push_back(std::move(q));
        break;
      }
    }
  });
  return data;
}

std::string mrc_statement(std::string_view question, std::string_view choice) {
  std::string s(question);
  s += ' ';
  s += choice;
  return s;
}

std::vector<LabeledExample> expand_mrc(std::span<const MrcQuestion> questions) {
  std::vector<LabeledExample> out;
  for (const auto& q : questions) {
    for (std::size_t k = 0; k < q.choices.size(); ++k) {
      out.push_back({q.id + "#" + std::to_string(k), mrc_statement(q.question, q.choices[k]), q.context,
                     k == q.answer ? kEntailmentClass : kContradictionClass});
    }
  }
  return out;
}

ClassifierHead ClassifierHead::init(std::size_t hidden, std::size_t classes, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("a classifier head needs at least two classes");
  Rng rng(derive_seed(seed, kStreamHead));
  std::vector<float> w(hidden * classes);
  for (auto& x : w) x = static_cast<float>(rng.normal(0.0, 0.02));
  return {Tensor<float>({hidden, classes}, std::move(w), true), Tensor<float>::zeros({classes}, true)};
}

void FinetuneConfig::validate() const {
  if (epochs == 0) throw ConfigError("finetune epochs must be positive");
  if (batch_size == 0) throw ConfigError("finetune batch size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("finetune learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("finetune weight decay must be non-negative");
}

io::Json FinetuneConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"seed", seed}};
}

FinetuneConfig FinetuneConfig::from_json(const io::Json& j) {
  FinetuneConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

text::TokenSequence encode_example(const LabeledExample& ex, const text::Vocabulary& vocab, std::size_t max_len) {
  if (ex.text_b.empty()) return text::encode_single(ex.text_a, vocab, max_len);
  return text::trim_padding(text::encode_pair(ex.text_a, ex.text_b, vocab, max_len));
}

Tensor<float> classify(Tape<float>& tape, const TunedModel& model, const text::TokenSequence& seq, bool train_mode,
                       Rng* dropout_rng) {
  auto outputs = forward(tape, seq, model.weights, model.encoder, train_mode, dropout_rng);
  auto cls = pool(tape, outputs, std::span<const int>(seq.attention_mask), Pooling::cls);
  return ops::linear(tape, cls, model.head.weight, model.head.bias);
}

std::vector<double> class_probabilities(const TunedModel& model, const text::Vocabulary& vocab,
                                        const LabeledExample& ex) {
  auto tape = Tape<float>::inference();
  return softmax_probs(classify(tape, model, encode_example(ex, vocab, model.encoder.max_len), false));
}

std::size_t argmax_first(std::span<const double> scores) {
  if (scores.empty()) throw ContractError("argmax of an empty score list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

MrcPrediction mrc_predict(const TunedModel& model, const text::Vocabulary& vocab, std::string_view context,
                          std::string_view question, std::span<const std::string> choices) {
  if (choices.empty()) throw ContractError("multiple-choice question without choices");
  MrcPrediction out;
  for (const auto& p : mrc_choice_probabilities(model, vocab, context, question, choices))
    out.scores.push_back(p[kEntailmentClass]);
  out.choice = argmax_first(out.scores);
  return out;
}

io::Json Prediction::to_json() const { return {{"id", id}, {"gold", gold}, {"pred", pred}, {"scores", scores}}; }

Evaluation evaluate(const TunedModel& model, const text::Vocabulary& vocab, const TaskData& data) {
  const auto& task = model.task;
  Evaluation ev;
  metrics::ConfusionMatrix cm(task.labels.size());
  if (task.kind != TaskKind::mrc) {
    for (const auto& ex : data.examples) {
      auto probs = class_probabilities(model, vocab, ex);
      const std::size_t pred = argmax_first(probs);
      cm.add(ex.label, pred);
      ev.predictions.push_back({ex.id, task.labels[ex.label], task.labels[pred], std::move(probs)});
    }
    ev.report = metrics::make_report(std::string(to_string(task.kind)), task.labels, cm);
    return ev;
  }
  std::vector<std::size_t> chosen, gold;
  for (const auto& q : data.questions) {
    if (q.choices.empty()) throw ContractError("multiple-choice question without choices");
    std::vector<double> scores;
    auto probs = mrc_choice_probabilities(model, vocab, q.context, q.question, q.choices);
    for (std::size_t k = 0; k < probs.size(); ++k) {
      scores.push_back(probs[k][kEntailmentClass]);
      cm.add(k == q.answer ? kEntailmentClass : kContradictionClass, argmax_first(probs[k]));
    }
    const std::size_t choice = argmax_first(scores);
    chosen.push_back(choice);
    gold.push_back(q.answer);
    ev.predictions.push_back({q.id, q.answer, choice, std::move(scores)});
  }
  ev.report = metrics::make_report("mrc", task.labels, cm);
  ev.report.has_mrc = true;
  ev.report.questions = gold.size();
  ev.report.mrc_accuracy = metrics::mrc_accuracy(chosen, gold);
  return ev;
}

FinetuneResult finetune_classifier(const Checkpoint& base, const text::Vocabulary& vocab, const TaskSpec& task,
                                   const TaskData& train, const TaskData& dev, const FinetuneConfig& config) {
  task.validate();
  config.validate();
  if (vocab.hash() != base.vocab_hash) {
    throw ConfigError("vocabulary hash " + vocab.hash() + " does not match checkpoint vocabulary " + base.vocab_hash);
  }
  std::vector<LabeledExample> train_examples =
      task.kind == TaskKind::mrc ? expand_mrc(train.questions) : train.examples;
  if (train_examples.empty()) throw DataError("fine-tuning needs at least one training example");
  if (dev.size() == 0) throw DataError("fine-tuning needs a non-empty dev set");

  std::vector<text::TokenSequence> encoded;
  std::vector<std::size_t> labels;
  for (const auto& ex : train_examples) {
    if (ex.label >= task.labels.size()) throw ContractError("training label index out of range");
    encoded.push_back(encode_example(ex, vocab, base.encoder.max_len));
    labels.push_back(ex.label);
  }

  FinetuneResult result;
  TunedModel model{base.encoder, base.weights.clone(),
                   ClassifierHead::init(base.encoder.hidden_size, task.labels.size(), config.seed), task};
  AdamW<float> optimizer(trainable(model),
                         AdamWConfig{config.learning_rate, 0.9, 0.999, 1e-8, config.weight_decay});

  bool have_best = false;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order(encoded.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, kStreamEpoch, epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      const std::uint64_t step = optimizer.step_count() + 1;
      Tape<float> tape;
      std::vector<Tensor<float>> logits;
      std::vector<std::size_t> targets;
      for (std::size_t i = b; i < e; ++i) {
        Rng rng(derive_seed(config.seed, kStreamDropout, step, i - b));
        logits.push_back(classify(tape, model, encoded[order[i]], true, &rng));
        targets.push_back(labels[order[i]]);
      }
      auto loss = ops::cross_entropy(tape, ops::concat_rows(tape, logits), std::span<const std::size_t>(targets));
      if (!std::isfinite(loss.item())) {
        throw TrainingDivergence("non-finite fine-tuning loss at step " + std::to_string(step));
      }
      optimizer.zero_grad();
      tape.backward(loss);
      optimizer.step();
      loss_sum += loss.item() * static_cast<double>(e - b);
    }

    auto ev = evaluate(model, vocab, dev);
    const double acc = ev.report.primary_accuracy();
    const double f1 = ev.report.macro_f1;
    result.history.push_back({epoch + 1, loss_sum / static_cast<double>(encoded.size()), acc, f1});
    const bool better = !have_best || acc > result.dev.report.primary_accuracy() ||
                        (acc == result.dev.report.primary_accuracy() && f1 > result.dev.report.macro_f1);
    if (better) {
      have_best = true;
      result.best_epoch = epoch + 1;
      result.dev = std::move(ev);
      result.model = {model.encoder, model.weights.clone(), model.head.clone(), model.task};
    }
  }
  for (auto& p : result.model.weights.parameters()) p.tensor.drop_grad();
  result.model.head.weight.drop_grad();
  result.model.head.bias.drop_grad();
  return result;
}

Checkpoint to_checkpoint(const TunedModel& model, const Checkpoint& base, const FinetuneConfig& config) {
  Checkpoint out;
  out.encoder = model.encoder;
  out.pretrain = base.pretrain;
  out.vocab_hash = base.vocab_hash;
  out.step = base.step;
  out.epochs_completed = base.epochs_completed;
  out.weights = model.weights.clone();
  out.head = HeadState{{{"task", model.task.to_json()}, {"finetune", config.to_json()}},
                       model.head.weight.clone(),
                       model.head.bias.clone()};
  return out;
}

TunedModel from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.head) throw FormatError("checkpoint has no classifier head; run finetune first");
  TaskSpec task;
  try {
    task = TaskSpec::from_json(ckpt.head->meta.at("task"));
    task.validate();
  } catch (const io::Json::exception& e) {
    throw FormatError(std::string("bad head metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad head metadata: ") + e.what());
  }
  const std::size_t d = ckpt.encoder.hidden_size, c = task.labels.size();
  if (ckpt.head->weight.shape() != Shape{d, c} || ckpt.head->bias.shape() != Shape{c}) {
    throw FormatError("classifier head shape does not match " + std::to_string(d) + " x " + std::to_string(c));
  }
  return {ckpt.encoder, ckpt.weights.clone(), {ckpt.head->weight.clone(), ckpt.head->bias.clone()}, task};
}

}  // namespace supcon::finetune
