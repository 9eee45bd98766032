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
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scalefuse/config.hpp"
#include "scalefuse/metrics.hpp"
#include "scalefuse/record.hpp"

namespace scalefuse::harness {

struct FoldSplit {
  std::vector<std::size_t> train;  // record indices
  std::vector<std::size_t> test;
};

// Per class, shuffles that class's records with the seed and deals them
// round-robin onto folds, so every fold holds floor or ceil of
// class_count / folds records of each class. Throws StratificationError when
// a class has fewer records than folds.
std::vector<FoldSplit> stratified_folds(const Dataset& dataset, std::size_t folds,
                                        std::uint64_t seed);

struct MetricStat {
  double mean = 0.0;
  double sd = 0.0;  // n - 1 denominator; 0 for a single fold
  bool operator==(const MetricStat&) const = default;
};

inline constexpr std::array<std::string_view, 6> kMetricNames = {"acc", "auc", "pre",
                                                                 "rec", "spe", "f1"};
double metric_value(const metrics::EvalReport& report, std::string_view name);

struct CvSummary {
  std::string name;
  std::vector<std::string> class_names;
  std::vector<metrics::EvalReport> folds;
  std::vector<MetricStat> stats;  // aligned with kMetricNames
  bool reference = false;
  // Paired t-test of per-fold AUC against the reference row, when one exists.
  std::optional<double> p_value;

  const MetricStat& stat(std::string_view metric) const;
};

CvSummary summarize(std::string name, std::vector<std::string> class_names,
                    std::vector<metrics::EvalReport> folds);

// Synthetic generation or manifest loading, per config.
Dataset load_dataset(const ExperimentConfig& config);
// config.model with classes and raw widths filled in from the data.
ModelConfig model_config_for(const ExperimentConfig& config, const Dataset& dataset);

// Runs fn(0) .. fn(count - 1) on up to jobs threads. Each index is
// independent; the lowest-index exception is rethrown after all finish.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

// Trains a fresh model on the fold's training records (seed = train.seed +
// fold) and evaluates it on the held-out ones.
metrics::EvalReport run_fold(const ExperimentConfig& config, const Dataset& dataset,
                             const FoldSplit& split, std::size_t fold);

// Stratified k-fold: split seeded by the dataset seed, so every experiment
// on the same data sees identical folds.
CvSummary run_cross_validation(const ExperimentConfig& config, const Dataset& dataset,
                               std::size_t jobs = 1);

// Majority vote over per-modality argmaxes; a tie goes to the tied class
// with the largest summed probability, then to the lowest index.
std::size_t majority_vote(std::span<const std::vector<double>> model_probabilities);

metrics::EvalReport run_late_fusion_fold(const ExperimentConfig& config, const Dataset& dataset,
                                         const FoldSplit& split, std::size_t fold);
// Three unimodal models per fold, combined by majority_vote; AUC from the
// mean of their probability vectors.
CvSummary majority_vote_late_fusion(const ExperimentConfig& config, const Dataset& dataset,
                                    std::size_t jobs = 1);

enum class Suite { ModalityCombos, AttentionVariants, LossWeights, LateFusion, ModuleToggles };
std::string_view suite_name(Suite s);
Suite parse_suite(std::string_view name);

struct AblationRow {
  std::string name;
  ExperimentConfig config;
  bool late_fusion = false;
  bool reference = false;
};

// The rows a suite runs, before running them.
std::vector<AblationRow> ablation_rows(Suite suite, const ExperimentConfig& base);

struct AblationTable {
  std::string suite;
  std::vector<CvSummary> rows;
};

AblationTable run_ablation_suite(Suite suite, const ExperimentConfig& base,
                                 const Dataset& dataset, std::size_t jobs = 1);

}  // namespace scalefuse::harness
