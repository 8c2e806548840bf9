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
#include <span>
#include <string>
#include <vector>

#include "supcon/io.hpp"

namespace supcon::metrics {

// Square count matrix; rows are gold classes, columns predicted classes.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  static ConfusionMatrix from_predictions(std::span<const std::size_t> gold,
                                          std::span<const std::size_t> predicted, std::size_t classes);

  void add(std::size_t gold, std::size_t predicted, std::size_t count = 1);
  std::size_t at(std::size_t gold, std::size_t predicted) const;
  std::size_t classes() const noexcept { return classes_; }
  std::size_t total() const noexcept { return total_; }
  std::size_t trace() const noexcept;

  io::Json to_json() const;  // array of rows

 private:
  std::size_t classes_;
  std::size_t total_ = 0;
  std::vector<std::size_t> counts_;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;  // gold count
};

struct MacroF1 {
  double macro = 0.0;
  std::vector<ClassScores> per_class;
};

// Both throw UndefinedMetricError on an empty matrix.
double accuracy(const ConfusionMatrix& cm);
MacroF1 macro_f1(const ConfusionMatrix& cm);

// Fraction of questions whose chosen index equals the gold index.
double mrc_accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> gold);

struct MetricsReport {
  std::string task;
  std::vector<std::string> labels;
  std::size_t examples = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassScores> per_class;
  std::vector<std::vector<std::size_t>> confusion;
  bool has_mrc = false;
  std::size_t questions = 0;
  double mrc_accuracy = 0.0;

  // The headline accuracy: question-level for multiple choice, otherwise
  // example-level.
  double primary_accuracy() const noexcept { return has_mrc ? mrc_accuracy : accuracy; }

  io::Json to_json() const;
};

MetricsReport make_report(std::string task, std::vector<std::string> labels, const ConfusionMatrix& cm);

}  // namespace supcon::metrics
