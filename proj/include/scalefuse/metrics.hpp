// Copyright 2026 The scalefuse Authors. All Rights Reserved.
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
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace scalefuse::metrics {

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;  // classes * classes, row-major

  std::size_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * classes + pred];
  }
  std::size_t total() const;
  std::size_t trace() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truths,
                                 std::span<const std::size_t> preds, std::size_t classes);

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
};

// Accuracy plus unweighted one-vs-rest means. A ratio with a zero
// denominator counts as 0 and adds a line to warnings.
struct MacroScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  std::vector<ClassScores> per_class;
  std::vector<std::string> warnings;
};

MacroScores macro_scores(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

struct RocResult {
  double macro_auc = 0.0;
  // Per class; empty optional when the class lacked positives or negatives.
  std::vector<std::optional<double>> class_auc;
  std::vector<std::vector<RocPoint>> curves;  // empty for skipped classes
  std::vector<std::string> warnings;
};

// One-vs-rest ROC per class from a threshold sweep over distinct scores
// (equal scores form one step), trapezoidal area, macro mean over the
// classes that have both positives and negatives.
RocResult roc_auc_macro(std::span<const std::size_t> truths,
                        std::span<const std::vector<double>> scores);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
};

// Paired two-sided t-test on a - b. Zero spread gives (0, 1) for zero mean
// difference and (+-inf, 0) otherwise.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
// P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

// Everything reported for one evaluated fold.
struct EvalReport {
  int fold = 0;
  double acc = 0.0, auc = 0.0, pre = 0.0, rec = 0.0, spe = 0.0, f1 = 0.0;
  std::vector<ClassScores> per_class;
  std::vector<std::optional<double>> class_auc;
  std::vector<std::vector<RocPoint>> roc;
  ConfusionMatrix confusion;
  std::vector<std::string> warnings;
};

// Predicted class = argmax (lowest index on ties).
EvalReport evaluate_predictions(std::span<const std::size_t> truths,
                                std::span<const std::vector<double>> probabilities,
                                std::size_t classes, int fold = 0);
// Same, with predictions decided elsewhere (e.g. by voting).
EvalReport evaluate_predictions(std::span<const std::size_t> truths,
                                std::span<const std::size_t> predictions,
                                std::span<const std::vector<double>> probabilities,
                                std::size_t classes, int fold = 0);

}  // namespace scalefuse::metrics
