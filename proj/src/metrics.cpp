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

#include "scalefuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scalefuse/errors.hpp"

namespace scalefuse::metrics {

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t i = 0; i < classes; ++i) t += at(i, i);
  return t;
}

ConfusionMatrix confusion_matrix(std::span<const std::size_t> truths,
                                 std::span<const std::size_t> preds, std::size_t classes) {
  if (truths.size() != preds.size()) {
    throw ContractError("confusion_matrix: truths and predictions differ in length");
  }
  if (classes == 0) throw ContractError("confusion_matrix: zero classes");
  ConfusionMatrix cm{classes, std::vector<std::size_t>(classes * classes, 0)};
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] >= classes || preds[i] >= classes) {
      throw ContractError("confusion_matrix: label out of range at record " + std::to_string(i));
    }
    cm.counts[truths[i] * classes + preds[i]] += 1;
  }
  return cm;
}

namespace {

double ratio(std::size_t num, std::size_t den, const std::string& what,
             std::vector<std::string>& warnings) {
  if (den == 0) {
    warnings.push_back(what + " undefined (zero denominator), counted as 0");
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MacroScores macro_scores(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (cm.classes == 0 || total == 0) throw ContractError("macro_scores: empty confusion matrix");
  MacroScores s;
  s.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  const std::size_t c = cm.classes;
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t tp = cm.at(k, k), fp = 0, fn = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j == k) continue;
      fp += cm.at(j, k);
      fn += cm.at(k, j);
    }
    const std::size_t tn = total - tp - fp - fn;
    const std::string tag = "class " + std::to_string(k) + " ";
    ClassScores cs;
    cs.precision = ratio(tp, tp + fp, tag + "precision", s.warnings);
    cs.recall = ratio(tp, tp + fn, tag + "recall", s.warnings);
    cs.specificity = ratio(tn, tn + fp, tag + "specificity", s.warnings);
    if (cs.precision + cs.recall > 0.0) {
      cs.f1 = 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall);
    } else {
      s.warnings.push_back(tag + "f1 undefined (precision and recall are 0), counted as 0");
    }
    s.per_class.push_back(cs);
  }
  const double inv = 1.0 / static_cast<double>(c);
  for (const auto& cs : s.per_class) {
    s.precision += cs.precision * inv;
    s.recall += cs.recall * inv;
    s.specificity += cs.specificity * inv;
    s.f1 += cs.f1 * inv;
  }
  return s;
}

RocResult roc_auc_macro(std::span<const std::size_t> truths,
                        std::span<const std::vector<double>> scores) {
  if (truths.size() != scores.size() || truths.empty()) {
    throw ContractError("roc_auc_macro: need one score row per record");
  }
  const std::size_t c = scores[0].size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != c) throw ContractError("roc_auc_macro: ragged score rows");
    if (truths[i] >= c) throw ContractError("roc_auc_macro: label out of range");
    const double row_sum = std::accumulate(scores[i].begin(), scores[i].end(), 0.0);
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw ContractError("roc_auc_macro: score row " + std::to_string(i) + " sums to " +
                          std::to_string(row_sum));
    }
  }

  RocResult out;
  out.class_auc.resize(c);
  out.curves.resize(c);
  double auc_sum = 0.0;
  std::size_t used = 0;
  std::vector<std::size_t> order(truths.size());
  for (std::size_t k = 0; k < c; ++k) {
    std::size_t pos = 0;
    for (auto t : truths) pos += (t == k);
    const std::size_t neg = truths.size() - pos;
    if (pos == 0 || neg == 0) {
      out.warnings.push_back("class " + std::to_string(k) +
                             " has no " + (pos == 0 ? "positives" : "negatives") +
                             "; excluded from macro AUC");
      continue;
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores[a][k] > scores[b][k];
    });
    std::vector<RocPoint> curve{{0.0, 0.0}};
    std::size_t tp = 0, fp = 0;
    double area = 0.0;
    for (std::size_t i = 0; i < order.size();) {
      const double threshold = scores[order[i]][k];
      while (i < order.size() && scores[order[i]][k] == threshold) {
        if (truths[order[i]] == k) {
          ++tp;
        } else {
          ++fp;
        }
        ++i;
      }
      const RocPoint p{static_cast<double>(fp) / static_cast<double>(neg),
                       static_cast<double>(tp) / static_cast<double>(pos)};
      area += (p.fpr - curve.back().fpr) * (p.tpr + curve.back().tpr) * 0.5;
      curve.push_back(p);
    }
    out.class_auc[k] = area;
    out.curves[k] = std::move(curve);
    auc_sum += area;
    ++used;
  }
  if (used == 0) throw ContractError("roc_auc_macro: every class lacks positives or negatives");
  out.macro_auc = auc_sum / static_cast<double>(used);
  return out;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw ContractError("incomplete beta: a and b must be positive");
  if (x < 0.0 || x > 1.0) throw ContractError("incomplete beta: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  // The continued fraction converges fast for x < (a + 1) / (a + b + 2);
  // otherwise use the symmetry I_x(a, b) = 1 - I_{1-x}(b, a).
  const bool flip = x >= (a + 1.0) / (a + b + 2.0);
  const double aa = flip ? b : a, bb = flip ? a : b, xx = flip ? 1.0 - x : x;

  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  double c = 1.0;
  double d = 1.0 - (aa + bb) * xx / (aa + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 1000; ++m) {
    const double m2 = 2.0 * m;
    double num = m * (bb - m) * xx / ((aa + m2 - 1.0) * (aa + m2));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    num = -(aa + m) * (aa + bb + m) * xx / ((aa + m2) * (aa + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < eps) break;
  }
  const double front = std::exp(log_front) / aa;
  return flip ? 1.0 - front * h : front * h;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw ContractError("student t: df must be positive");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(regularized_incomplete_beta(0.5 * df, 0.5, x), 0.0, 1.0);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("paired_t_test: samples differ in length");
  const std::size_t n = a.size();
  if (n < 2) throw ContractError("paired_t_test: need at least 2 pairs");
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
  const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : diff) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  TTestResult r;
  r.df = n - 1;
  if (sd == 0.0) {
    if (mean == 0.0) return {0.0, 1.0, r.df};
    return {mean > 0.0 ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity(),
            0.0, r.df};
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p = student_t_two_sided_p(r.t, static_cast<double>(r.df));
  return r;
}

EvalReport evaluate_predictions(std::span<const std::size_t> truths,
                                std::span<const std::vector<double>> probabilities,
                                std::size_t classes, int fold) {
  std::vector<std::size_t> preds;
  preds.reserve(probabilities.size());
  for (const auto& row : probabilities) {
    if (row.size() != classes) throw ContractError("evaluate_predictions: wrong row width");
    preds.push_back(static_cast<std::size_t>(
        std::distance(row.begin(), std::max_element(row.begin(), row.end()))));
  }
  return evaluate_predictions(truths, preds, probabilities, classes, fold);
}

EvalReport evaluate_predictions(std::span<const std::size_t> truths,
                                std::span<const std::size_t> predictions,
                                std::span<const std::vector<double>> probabilities,
                                std::size_t classes, int fold) {
  if (truths.size() != probabilities.size() || truths.size() != predictions.size() ||
      truths.empty()) {
    throw ContractError("evaluate_predictions: need one prediction and probability row per record");
  }
  for (const auto& row : probabilities) {
    if (row.size() != classes) throw ContractError("evaluate_predictions: wrong row width");
  }
  EvalReport r;
  r.fold = fold;
  r.confusion = confusion_matrix(truths, predictions, classes);
  auto scores = macro_scores(r.confusion);
  r.acc = scores.accuracy;
  r.pre = scores.precision;
  r.rec = scores.recall;
  r.spe = scores.specificity;
  r.f1 = scores.f1;
  r.per_class = std::move(scores.per_class);
  r.warnings = std::move(scores.warnings);
  auto roc = roc_auc_macro(truths, probabilities);
  r.auc = roc.macro_auc;
  r.class_auc = std::move(roc.class_auc);
  r.roc = std::move(roc.curves);
  r.warnings.insert(r.warnings.end(), roc.warnings.begin(), roc.warnings.end());
  return r;
}

}  // namespace scalefuse::metrics
