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

#include "scalefuse/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "scalefuse/errors.hpp"
#include "scalefuse/model.hpp"
#include "scalefuse/rng.hpp"

namespace scalefuse::harness {

std::vector<FoldSplit> stratified_folds(const Dataset& dataset, std::size_t folds,
                                        std::uint64_t seed) {
  if (folds < 2) throw ConfigError("need at least 2 folds");
  const std::size_t classes = dataset.class_count();
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto label = dataset.records[i].label;
    if (label >= classes) throw DataError("record " + dataset.records[i].id + " has an invalid label");
    by_class[label].push_back(i);
  }
  std::vector<std::size_t> fold_of(dataset.records.size(), 0);
  Rng rng(derive_seed(seed, 0x5eed));
  std::size_t offset = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < folds) {
      throw StratificationError("class " + dataset.class_names[c] + " has " +
                                std::to_string(members.size()) + " records, fewer than " +
                                std::to_string(folds) + " folds");
    }
    rng.shuffle(members);
    // Rotating the starting fold per class keeps fold sizes balanced when
    // class counts are not multiples of the fold count.
    for (std::size_t j = 0; j < members.size(); ++j) fold_of[members[j]] = (offset + j) % folds;
    offset = (offset + members.size()) % folds;
  }
  std::vector<FoldSplit> splits(folds);
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    for (std::size_t f = 0; f < folds; ++f) {
      (fold_of[i] == f ? splits[f].test : splits[f].train).push_back(i);
    }
  }
  return splits;
}

double metric_value(const metrics::EvalReport& r, std::string_view name) {
  if (name == "acc") return r.acc;
  if (name == "auc") return r.auc;
  if (name == "pre") return r.pre;
  if (name == "rec") return r.rec;
  if (name == "spe") return r.spe;
  if (name == "f1") return r.f1;
  throw ContractError("unknown metric " + std::string(name));
}

const MetricStat& CvSummary::stat(std::string_view metric) const {
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
    if (kMetricNames[i] == metric) return stats.at(i);
  }
  throw ContractError("unknown metric " + std::string(metric));
}

CvSummary summarize(std::string name, std::vector<std::string> class_names,
                    std::vector<metrics::EvalReport> folds) {
  if (folds.empty()) throw ContractError("summary needs at least one fold");
  CvSummary s;
  s.name = std::move(name);
  s.class_names = std::move(class_names);
  s.folds = std::move(folds);
  const double n = static_cast<double>(s.folds.size());
  for (auto metric : kMetricNames) {
    double mean = 0.0;
    for (const auto& f : s.folds) mean += metric_value(f, metric);
    mean /= n;
    double ss = 0.0;
    for (const auto& f : s.folds) {
      const double d = metric_value(f, metric) - mean;
      ss += d * d;
    }
    s.stats.push_back({mean, s.folds.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0});
  }
  return s;
}

Dataset load_dataset(const ExperimentConfig& config) {
  if (config.source == ExperimentConfig::Source::Manifest) {
    return datagen::read_manifest(config.manifest_path);
  }
  return datagen::generate_dataset(config.task);
}

ModelConfig model_config_for(const ExperimentConfig& config, const Dataset& dataset) {
  if (dataset.records.empty()) throw DataError("dataset has no records");
  ModelConfig mc = config.model;
  mc.classes = dataset.class_count();
  const auto& first = dataset.records.front();
  for (auto m : kAllModalities) {
    mc.raw_dims[static_cast<std::size_t>(m)] = first.features(m).cols;
  }
  return mc;
}

void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

void assert_disjoint(const Dataset& ds, const FoldSplit& split) {
  std::set<std::string> train_ids;
  for (auto i : split.train) train_ids.insert(ds.records[i].id);
  for (auto i : split.test) {
    if (train_ids.contains(ds.records[i].id)) {
      throw DataError("patient " + ds.records[i].id + " appears in both train and test sets");
    }
  }
}

std::vector<PatientRecord> gather(const Dataset& ds, std::span<const std::size_t> idx) {
  std::vector<PatientRecord> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ds.records[i]);
  return out;
}

CmusModel train_fold_model(const ModelConfig& mc, const ExperimentConfig& config,
                           std::span<const PatientRecord> train, std::size_t fold,
                           std::uint64_t stream) {
  const std::uint64_t fold_seed = config.train.seed + fold;
  CmusModel model(mc, derive_seed(fold_seed, 2 * stream));
  TrainOptions options = config.train;
  options.seed = derive_seed(fold_seed, 2 * stream + 1);
  train_model(model, train, options);
  return model;
}

}  // namespace

metrics::EvalReport run_fold(const ExperimentConfig& config, const Dataset& dataset,
                             const FoldSplit& split, std::size_t fold) {
  assert_disjoint(dataset, split);
  const ModelConfig mc = model_config_for(config, dataset);
  const auto train = gather(dataset, split.train);
  const CmusModel model = train_fold_model(mc, config, train, fold, 0);
  std::vector<std::size_t> truths;
  std::vector<std::vector<double>> probs;
  for (auto i : split.test) {
    truths.push_back(dataset.records[i].label);
    probs.push_back(model.predict_proba(dataset.records[i]));
  }
  return metrics::evaluate_predictions(truths, probs, mc.classes, static_cast<int>(fold));
}

namespace {

std::uint64_t split_seed(const ExperimentConfig& config) { return config.task.seed; }

}  // namespace

CvSummary run_cross_validation(const ExperimentConfig& config, const Dataset& dataset,
                               std::size_t jobs) {
  config.validate();
  const auto splits = stratified_folds(dataset, config.folds, split_seed(config));
  std::vector<metrics::EvalReport> reports(splits.size());
  parallel_for(splits.size(), jobs,
               [&](std::size_t f) { reports[f] = run_fold(config, dataset, splits[f], f); });
  return summarize("cmus", dataset.class_names, std::move(reports));
}

std::size_t majority_vote(std::span<const std::vector<double>> model_probabilities) {
  if (model_probabilities.empty()) throw ContractError("majority_vote: no models");
  const std::size_t c = model_probabilities[0].size();
  std::vector<std::size_t> votes(c, 0);
  std::vector<double> mass(c, 0.0);
  for (const auto& p : model_probabilities) {
    if (p.size() != c) throw ContractError("majority_vote: models disagree on class count");
    const auto best = static_cast<std::size_t>(
        std::distance(p.begin(), std::max_element(p.begin(), p.end())));
    votes[best] += 1;
    for (std::size_t k = 0; k < c; ++k) mass[k] += p[k];
  }
  const std::size_t top = *std::max_element(votes.begin(), votes.end());
  std::size_t winner = c;
  for (std::size_t k = 0; k < c; ++k) {
    if (votes[k] != top) continue;
    if (winner == c || mass[k] > mass[winner]) winner = k;
  }
  return winner;
}

metrics::EvalReport run_late_fusion_fold(const ExperimentConfig& config, const Dataset& dataset,
                                         const FoldSplit& split, std::size_t fold) {
  assert_disjoint(dataset, split);
  const auto train = gather(dataset, split.train);
  std::vector<CmusModel> models;
  for (auto m : kAllModalities) {
    ModelConfig mc = model_config_for(config, dataset);
    mc.modalities = ModalityMask::only(m);
    models.push_back(
        train_fold_model(mc, config, train, fold, 1 + static_cast<std::uint64_t>(m)));
  }
  const std::size_t classes = dataset.class_count();
  std::vector<std::size_t> truths, preds;
  std::vector<std::vector<double>> mean_probs;
  for (auto i : split.test) {
    const auto& rec = dataset.records[i];
    std::vector<std::vector<double>> per_model;
    for (const auto& model : models) per_model.push_back(model.predict_proba(rec));
    std::vector<double> mean(classes, 0.0);
    for (const auto& p : per_model) {
      for (std::size_t k = 0; k < classes; ++k) mean[k] += p[k] / 3.0;
    }
    truths.push_back(rec.label);
    preds.push_back(majority_vote(per_model));
    mean_probs.push_back(std::move(mean));
  }
  return metrics::evaluate_predictions(truths, preds, mean_probs, classes,
                                       static_cast<int>(fold));
}

CvSummary majority_vote_late_fusion(const ExperimentConfig& config, const Dataset& dataset,
                                    std::size_t jobs) {
  config.validate();
  const auto splits = stratified_folds(dataset, config.folds, split_seed(config));
  std::vector<metrics::EvalReport> reports(splits.size());
  parallel_for(splits.size(), jobs, [&](std::size_t f) {
    reports[f] = run_late_fusion_fold(config, dataset, splits[f], f);
  });
  return summarize("majority_vote", dataset.class_names, std::move(reports));
}

std::string_view suite_name(Suite s) {
  switch (s) {
    case Suite::ModalityCombos:
      return "modality_combos";
    case Suite::AttentionVariants:
      return "attention_variants";
    case Suite::LossWeights:
      return "loss_weights";
    case Suite::LateFusion:
      return "late_fusion";
    case Suite::ModuleToggles:
      return "module_toggles";
  }
  return "?";
}

Suite parse_suite(std::string_view name) {
  for (auto s : {Suite::ModalityCombos, Suite::AttentionVariants, Suite::LossWeights,
                 Suite::LateFusion, Suite::ModuleToggles}) {
    if (suite_name(s) == name) return s;
  }
  throw ConfigError("unknown ablation suite '" + std::string(name) + "'");
}

std::vector<AblationRow> ablation_rows(Suite suite, const ExperimentConfig& base) {
  std::vector<AblationRow> rows;
  switch (suite) {
    case Suite::ModalityCombos:
      for (const char* mask : {"om", "im", "tem", "om,im", "om,tem", "im,tem", "om,im,tem"}) {
        AblationRow r{mask, base};
        r.config.model.modalities = ModalityMask::parse(mask);
        rows.push_back(std::move(r));
      }
      break;
    case Suite::AttentionVariants:
      for (auto v : cmsa::kAllVariants) {
        AblationRow r{std::string(cmsa::variant_name(v)), base};
        r.config.model.fusion = v;
        r.config.model.modalities = ModalityMask::all();
        // The baselines replace both SMIL and CMSA.
        r.config.model.use_smil = v == cmsa::FusionVariant::Cmsa;
        rows.push_back(std::move(r));
      }
      break;
    case Suite::LossWeights:
      // Simplex grid in steps of 0.1 with every weight at least 0.1.
      for (int a = 1; a <= 8; ++a) {
        for (int b = 1; a + b <= 9; ++b) {
          const int g = 10 - a - b;
          AblationRow r{"a=0." + std::to_string(a) + " b=0." + std::to_string(b) + " g=0." +
                            std::to_string(g),
                        base};
          r.config.model.weighted_loss = true;
          r.config.model.loss_weights = {a / 10.0, b / 10.0, g / 10.0};
          rows.push_back(std::move(r));
        }
      }
      break;
    case Suite::LateFusion: {
      AblationRow early{"early_fusion", base};
      AblationRow vote{"majority_vote", base};
      vote.late_fusion = true;
      rows.push_back(std::move(early));
      rows.push_back(std::move(vote));
      break;
    }
    case Suite::ModuleToggles: {
      // Same row order as the usual SMIL / CMSA / WL ablation table.
      const int grid[8][3] = {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {1, 0, 0},
                              {0, 1, 1}, {1, 0, 1}, {1, 1, 0}, {1, 1, 1}};
      for (const auto& g : grid) {
        AblationRow r{std::string("smil=") + (g[0] ? "on" : "off") + " cmsa=" +
                          (g[1] ? "on" : "off") + " wl=" + (g[2] ? "on" : "off"),
                      base};
        r.config.model.modalities = ModalityMask::all();
        r.config.model.use_smil = g[0] != 0;
        r.config.model.fusion = g[1] ? cmsa::FusionVariant::Cmsa : cmsa::FusionVariant::None;
        r.config.model.weighted_loss = g[2] != 0;
        rows.push_back(std::move(r));
      }
      break;
    }
  }
  // The reference row is the full configuration: the last row, except for
  // the loss-weight sweep (default weights) and late fusion (early fusion).
  std::size_t ref = rows.size() - 1;
  if (suite == Suite::LateFusion) ref = 0;
  if (suite == Suite::LossWeights) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].name == "a=0.3 b=0.5 g=0.2") ref = i;
    }
  }
  rows[ref].reference = true;
  return rows;
}

AblationTable run_ablation_suite(Suite suite, const ExperimentConfig& base,
                                 const Dataset& dataset, std::size_t jobs) {
  base.validate();
  const auto rows = ablation_rows(suite, base);
  for (const auto& r : rows) r.config.validate();
  const auto splits = stratified_folds(dataset, base.folds, split_seed(base));
  const std::size_t k = splits.size();

  // Every (row, fold) cell is independent.
  std::vector<metrics::EvalReport> cells(rows.size() * k);
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    const auto& row = rows[i / k];
    const std::size_t fold = i % k;
    cells[i] = row.late_fusion ? run_late_fusion_fold(row.config, dataset, splits[fold], fold)
                               : run_fold(row.config, dataset, splits[fold], fold);
  });

  AblationTable table;
  table.suite = std::string(suite_name(suite));
  std::size_t ref = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<metrics::EvalReport> reports(cells.begin() + static_cast<std::ptrdiff_t>(r * k),
                                             cells.begin() + static_cast<std::ptrdiff_t>((r + 1) * k));
    auto summary = summarize(rows[r].name, dataset.class_names, std::move(reports));
    summary.reference = rows[r].reference;
    if (summary.reference) ref = r;
    table.rows.push_back(std::move(summary));
  }
  std::vector<double> ref_auc;
  for (const auto& f : table.rows[ref].folds) ref_auc.push_back(f.auc);
  for (auto& row : table.rows) {
    if (row.reference) continue;
    std::vector<double> auc;
    for (const auto& f : row.folds) auc.push_back(f.auc);
    row.p_value = metrics::paired_t_test(auc, ref_auc).p;
  }
  return table;
}

}  // namespace scalefuse::harness
