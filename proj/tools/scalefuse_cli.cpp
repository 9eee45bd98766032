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

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "scalefuse/config.hpp"
#include "scalefuse/datagen.hpp"
#include "scalefuse/errors.hpp"
#include "scalefuse/harness.hpp"
#include "scalefuse/model.hpp"
#include "scalefuse/report.hpp"

namespace {

using namespace scalefuse;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value experiment config");
  cmd->add_option("--seed", args.seed, "overrides task.seed and train.seed");
  cmd->add_option("--out", args.out, "output directory (default: output.dir)");
  cmd->add_option("--jobs", args.jobs, "worker threads")->check(CLI::PositiveNumber);
}

ExperimentConfig resolve(const CommonArgs& args) {
  ExperimentConfig c = args.config_path.empty() ? ExperimentConfig{} : load_config(args.config_path);
  if (args.seed) {
    c.task.seed = *args.seed;
    c.train.seed = *args.seed;
  }
  if (!args.out.empty()) c.output_dir = args.out;
  c.validate();
  return c;
}

int run_generate(const CommonArgs& args) {
  const auto config = resolve(args);
  const auto dataset = datagen::generate_dataset(config.task);
  datagen::write_manifest(dataset, config.output_dir);
  std::printf("wrote %zu records to %s\n", dataset.records.size(), config.output_dir.c_str());
  return kExitOk;
}

int run_train(const CommonArgs& args) {
  const auto config = resolve(args);
  const auto dataset = harness::load_dataset(config);
  const auto summary = harness::run_cross_validation(config, dataset, args.jobs);
  const auto doc = report::from_cv(summary);
  report::emit(doc, config.output_dir);

  // Final model on every record, for later evaluation.
  CmusModel model(harness::model_config_for(config, dataset), derive_seed(config.train.seed, 0));
  TrainOptions options = config.train;
  options.seed = derive_seed(config.train.seed, 1);
  train_model(model, dataset.records, options);
  save_checkpoint(model, std::filesystem::path(config.output_dir) / "model.json");
  std::cout << report::render_table(doc);
  return kExitOk;
}

int run_evaluate(const CommonArgs& args, const std::string& checkpoint, const std::string& manifest) {
  auto config = resolve(args);
  if (!manifest.empty()) {
    config.source = ExperimentConfig::Source::Manifest;
    config.manifest_path = manifest;
  }
  const auto model = load_checkpoint(checkpoint);
  const auto dataset = harness::load_dataset(config);
  if (dataset.class_count() != model.config().classes) {
    throw DataError("dataset has " + std::to_string(dataset.class_count()) +
                    " classes but the checkpoint expects " +
                    std::to_string(model.config().classes));
  }
  std::vector<std::size_t> truths;
  std::vector<std::vector<double>> probs;
  for (const auto& rec : dataset.records) {
    truths.push_back(rec.label);
    probs.push_back(model.predict_proba(rec));
  }
  auto summary = harness::summarize(
      "evaluate", dataset.class_names,
      {metrics::evaluate_predictions(truths, probs, model.config().classes, 0)});
  const auto doc = report::from_cv(summary);
  report::emit(doc, config.output_dir);
  std::cout << report::render_table(doc);
  return kExitOk;
}

int run_ablate(const CommonArgs& args, const std::string& suite) {
  const auto s = harness::parse_suite(suite);
  const auto config = resolve(args);
  const auto dataset = harness::load_dataset(config);
  const auto table = harness::run_ablation_suite(s, config, dataset, args.jobs);
  const auto doc = report::from_ablation(table);
  report::emit(doc, config.output_dir);
  std::cout << report::render_table(doc);
  return kExitOk;
}

int run_report(const std::string& summary, const std::string& out) {
  const auto doc = report::read_summary(summary);
  if (!out.empty()) report::emit(doc, out);
  std::cout << report::render_table(doc);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scalefuse: multimodal fusion experiments"};
  app.require_subcommand(1);

  CommonArgs gen_args, train_args, eval_args, ablate_args;
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset as a manifest");
  add_common(gen, gen_args);
  auto* train = app.add_subcommand("train", "cross-validate and fit a final model");
  add_common(train, train_args);
  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  add_common(eval, eval_args);
  std::string checkpoint, manifest;
  eval->add_option("--checkpoint", checkpoint, "model.json from train")->required();
  eval->add_option("--manifest", manifest, "dataset directory (default: from config)");
  auto* ablate = app.add_subcommand("ablate", "run an ablation suite");
  add_common(ablate, ablate_args);
  std::string suite;
  ablate->add_option("--suite", suite,
                     "modality_combos | attention_variants | loss_weights | late_fusion | "
                     "module_toggles")
      ->required();
  auto* rep = app.add_subcommand("report", "re-render a summary.json");
  std::string summary, report_out;
  rep->add_option("--summary", summary, "summary.json path")->required();
  rep->add_option("--out", report_out, "write tables and CSVs here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen) return run_generate(gen_args);
    if (*train) return run_train(train_args);
    if (*eval) return run_evaluate(eval_args, checkpoint, manifest);
    if (*ablate) return run_ablate(ablate_args, suite);
    if (*rep) return run_report(summary, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
