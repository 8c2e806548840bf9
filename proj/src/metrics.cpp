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

#include "supcon/metrics.hpp"

#include "supcon/errors.hpp"

namespace supcon::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw ContractError("confusion matrix needs at least one class");
}

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const std::size_t> gold,
                                                  std::span<const std::size_t> predicted, std::size_t classes) {
  if (gold.size() != predicted.size()) {
    throw ContractError("gold and predicted label counts differ: " + std::to_string(gold.size()) + " vs " +
                        std::to_string(predicted.size()));
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < gold.size(); ++i) cm.add(gold[i], predicted[i]);
  return cm;
}

void ConfusionMatrix::add(std::size_t gold, std::size_t predicted, std::size_t count) {
  if (gold >= classes_ || predicted >= classes_) {
    throw ContractError("class index out of range for a " + std::to_string(classes_) + "-class matrix");
  }
  counts_[gold * classes_ + predicted] += count;
  total_ += count;
}

std::size_t ConfusionMatrix::at(std::size_t gold, std::size_t predicted) const {
  if (gold >= classes_ || predicted >= classes_) throw ContractError("class index out of range");
  return counts_[gold * classes_ + predicted];
}

std::size_t ConfusionMatrix::trace() const noexcept {
  std::size_t t = 0;
  for (std::size_t c = 0; c < classes_; ++c) t += counts_[c * classes_ + c];
  return t;
}

io::Json ConfusionMatrix::to_json() const {
  io::Json rows = io::Json::array();
  for (std::size_t g = 0; g < classes_; ++g) {
    io::Json row = io::Json::array();
    for (std::size_t p = 0; p < classes_; ++p) row.push_back(counts_[g * classes_ + p]);
    rows.push_back(std::move(row));
  }
  return rows;
}

double accuracy(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw UndefinedMetricError("accuracy of an empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

MacroF1 macro_f1(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw UndefinedMetricError("macro-F1 of an empty confusion matrix");
  const std::size_t n = cm.classes();
  MacroF1 out;
  double sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t tp = cm.at(c, c), gold = 0, pred = 0;
    for (std::size_t k = 0; k < n; ++k) {
      gold += cm.at(c, k);
      pred += cm.at(k, c);
    }
    ClassScores s;
    s.support = gold;
    s.precision = pred ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0;
    s.recall = gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    sum += s.f1;
    out.per_class.push_back(s);
  }
  out.macro = sum / static_cast<double>(n);
  return out;
}

double mrc_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold) {
  if (predicted.size() != gold.size()) {
    throw ContractError("mrc_accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(gold.size()) + " questions");
  }
  if (gold.empty()) throw UndefinedMetricError("mrc_accuracy over zero questions");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += predicted[i] == gold[i];
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

MetricsReport make_report(std::string task, std::vector<std::string> labels, const ConfusionMatrix& cm) {
  if (labels.size() != cm.classes()) throw ContractError("label names do not match the matrix size");
  MetricsReport r;
  r.task = std::move(task);
  r.labels = std::move(labels);
  r.examples = cm.total();
  r.accuracy = accuracy(cm);
  auto f1 = macro_f1(cm);
  r.macro_f1 = f1.macro;
  r.per_class = std::move(f1.per_class);
  r.confusion.assign(cm.classes(), std::vector<std::size_t>(cm.classes()));
  for (std::size_t g = 0; g < cm.classes(); ++g)
    for (std::size_t p = 0; p < cm.classes(); ++p) r.confusion[g][p] = cm.at(g, p);
  return r;
}

io::Json MetricsReport::to_json() const {
  io::Json j;
  j["task"] = task;
  j["examples"] = examples;
  j["accuracy"] = accuracy;
  j["macro_f1"] = macro_f1;
  io::Json classes = io::Json::array();
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    classes.push_back({{"label", labels[c]},
                       {"precision", per_class[c].precision},
                       {"recall", per_class[c].recall},
                       {"f1", per_class[c].f1},
                       {"support", per_class[c].support}});
  }
  j["per_class"] = std::move(classes);
  j["confusion_matrix"] = confusion;
  if (has_mrc) {
    j["questions"] = questions;
    j["mrc_accuracy"] = mrc_accuracy;
  }
  return j;
}

}  // namespace supcon::metrics
