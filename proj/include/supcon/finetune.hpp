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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "supcon/checkpoint.hpp"
#include "supcon/encoder.hpp"
#include "supcon/io.hpp"
#include "supcon/metrics.hpp"
#include "supcon/tape.hpp"
#include "supcon/text.hpp"

namespace supcon::finetune {

enum class TaskKind { pair, single, mrc };

std::optional<TaskKind> parse_task_kind(std::string_view name);
std::string_view to_string(TaskKind kind);

// Names of the JSON fields read for each role. Defaults give the documented
// record schema; a corpus with other names (premise/hypothesis, claim, ...)
// only needs a different mapping.
struct FieldMapping {
  std::string text_a = "text_a";
  std::string text_b = "text_b";
  std::string text = "text";
  std::string label = "label";
  std::string context = "context";
  std::string question = "question";
  std::string choices = "choices";
  std::string answer = "answer_index";
  std::string id = "id";

  friend bool operator==(const FieldMapping&, const FieldMapping&) = default;
};

inline constexpr std::size_t kEntailmentClass = 0;
inline constexpr std::size_t kContradictionClass = 1;

struct TaskSpec {
  TaskKind kind = TaskKind::pair;
  // Class names in head order. Multiple choice always uses
  // {"entailment", "contradiction"}.
  std::vector<std::string> labels = {"entailment", "contradiction", "neutral"};
  FieldMapping fields;

  static TaskSpec multiple_choice(FieldMapping fields = {});

  void validate() const;  // ConfigError
  std::optional<std::size_t> label_index(std::string_view label) const;

  io::Json to_json() const;
  static TaskSpec from_json(const io::Json& j);

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct LabeledExample {
  std::string id;
  std::string text_a;
  std::string text_b;  // empty for single-sentence tasks
  std::size_t label = 0;
};

struct MrcQuestion {
  std::string id;
  std::string context;
  std::string question;
  std::vector<std::string> choices;
  std::size_t answer = 0;
};

struct TaskData {
  std::vector<LabeledExample> examples;  // pair and single tasks
  std::vector<MrcQuestion> questions;    // multiple choice

  std::size_t size() const noexcept { return examples.size() + questions.size(); }
};

// Throws DataError naming the line for malformed records and unknown labels.
TaskData read_task_jsonl(const std::filesystem::path& path, const TaskSpec& task);

std::string mrc_statement(std::string_view question, std::string_view choice);

// One (statement, context) example per choice: the gold choice is labeled
// entailment, every other choice contradiction.
std::vector<LabeledExample> expand_mrc(std::span<const MrcQuestion> questions);

struct ClassifierHead {
  Tensor<float> weight;  // [d x C]
  Tensor<float> bias;    // [C]

  static ClassifierHead init(std::size_t hidden, std::size_t classes, std::uint64_t seed);
  std::size_t classes() const noexcept { return bias.size(); }
  ClassifierHead clone() const { return {weight.clone(), bias.clone()}; }
};

struct FinetuneConfig {
  std::size_t epochs = 7;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  std::uint64_t seed = 42;

  void validate() const;
  io::Json to_json() const;
  static FinetuneConfig from_json(const io::Json& j);
};

struct TunedModel {
  EncoderConfig encoder;
  EncoderWeights<float> weights;
  ClassifierHead head;
  TaskSpec task;
};

// Encodes a (possibly single-segment) example for the model's max length.
text::TokenSequence encode_example(const LabeledExample& ex, const text::Vocabulary& vocab, std::size_t max_len);

// Head logits over the final-layer [CLS] state, [1 x C].
Tensor<float> classify(Tape<float>& tape, const TunedModel& model, const text::TokenSequence& seq, bool train_mode,
                       Rng* dropout_rng = nullptr);

// Softmax class probabilities for one example (eval mode).
std::vector<double> class_probabilities(const TunedModel& model, const text::Vocabulary& vocab,
                                        const LabeledExample& ex);

// Index of the largest score; the lowest index wins ties. Throws
// ContractError on an empty list.
std::size_t argmax_first(std::span<const double> scores);

struct MrcPrediction {
  std::size_t choice = 0;
  std::vector<double> scores;  // entailment probability per choice
};

// Throws ContractError when there are no choices.
MrcPrediction mrc_predict(const TunedModel& model, const text::Vocabulary& vocab, std::string_view context,
                          std::string_view question, std::span<const std::string> choices);

// Classification predictions carry label names; multiple choice carries
// choice indices.
struct Prediction {
  std::string id;
  io::Json gold;
  io::Json pred;
  std::vector<double> scores;

  io::Json to_json() const;
};

struct Evaluation {
  metrics::MetricsReport report;
  std::vector<Prediction> predictions;
};

// Classification tasks predict one label per example. Multiple choice
// predicts one choice index per question; the report also carries the
// statement-level entailment/contradiction metrics.
Evaluation evaluate(const TunedModel& model, const text::Vocabulary& vocab, const TaskData& data);

struct EpochSummary {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
  double dev_macro_f1 = 0.0;
};

struct FinetuneResult {
  TunedModel model;  // weights from the selected epoch
  Evaluation dev;
  std::size_t best_epoch = 0;
  std::vector<EpochSummary> history;
};

// Trains encoder and head jointly with cross-entropy on the [CLS] state and
// keeps the epoch with the best dev accuracy (dev macro-F1, then the earlier
// epoch, break ties). Throws ConfigError if the vocabulary does not match the
// checkpoint.
FinetuneResult finetune_classifier(const Checkpoint& base, const text::Vocabulary& vocab, const TaskSpec& task,
                                   const TaskData& train, const TaskData& dev, const FinetuneConfig& config);

// The tuned model stored as a checkpoint carrying the classifier head.
Checkpoint to_checkpoint(const TunedModel& model, const Checkpoint& base, const FinetuneConfig& config);
TunedModel from_checkpoint(const Checkpoint& ckpt);  // FormatError without a head

}  // namespace supcon::finetune
