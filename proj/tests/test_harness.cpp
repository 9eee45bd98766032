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

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "scalefuse/config.hpp"
#include "scalefuse/errors.hpp"
#include "scalefuse/harness.hpp"
#include "scalefuse/report.hpp"

namespace scalefuse::harness {
namespace {

namespace fs = std::filesystem;

ExperimentConfig tiny_experiment() {
  ExperimentConfig c;
  c.task.patients_per_class = 6;
  for (auto& m : c.task.modalities) {
    m.raw_dim = 6;
    m.tokens = 2;
  }
  c.task.bag_min = 3;
  c.task.bag_max = 4;
  c.model.dim = 8;
  c.model.heads = 2;
  c.train.epochs = 2;
  c.train.lr0 = 1e-3;
  c.folds = 3;
  return c;
}

Dataset labelled(const std::vector<std::size_t>& labels, std::size_t classes) {
  Dataset ds;
  for (std::size_t c = 0; c < classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    PatientRecord r;
    r.id = "R" + std::to_string(i);
    r.label = labels[i];
    ds.records.push_back(r);
  }
  return ds;
}

TEST(Folds, PartitionAndBalance) {
  // Class sizes 7, 5, 10 over 5 folds.
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < 3; ++c) labels.insert(labels.end(), std::vector<std::size_t>{7, 5, 10}[c], c);
  const auto ds = labelled(labels, 3);
  const auto folds = stratified_folds(ds, 5, 9);
  ASSERT_EQ(folds.size(), 5u);
  std::vector<int> tested(labels.size(), 0);
  for (const auto& f : folds) {
    EXPECT_EQ(f.train.size() + f.test.size(), labels.size());
    std::set<std::size_t> train(f.train.begin(), f.train.end());
    std::vector<std::size_t> per_class(3, 0);
    for (auto i : f.test) {
      EXPECT_FALSE(train.count(i));
      tested[i]++;
      per_class[labels[i]]++;
    }
    EXPECT_TRUE(per_class[0] == 1 || per_class[0] == 2);
    EXPECT_EQ(per_class[1], 1u);
    EXPECT_EQ(per_class[2], 2u);
  }
  for (int t : tested) EXPECT_EQ(t, 1);
}

TEST(Folds, SeedControlsAssignment) {
  const auto ds = labelled(std::vector<std::size_t>(20, 0), 1);
  const auto a = stratified_folds(ds, 4, 1);
  EXPECT_EQ(a[0].test, stratified_folds(ds, 4, 1)[0].test);
  bool differs = false;
  for (std::uint64_t s = 2; s < 6; ++s) differs |= stratified_folds(ds, 4, s)[0].test != a[0].test;
  EXPECT_TRUE(differs);
}

TEST(Folds, TooFewRecordsOrFolds) {
  const auto ds = labelled({0, 0, 0, 1, 1}, 2);
  EXPECT_THROW(stratified_folds(ds, 3, 1), StratificationError);
  EXPECT_THROW(stratified_folds(ds, 1, 1), ConfigError);
  EXPECT_NO_THROW(stratified_folds(ds, 2, 1));
}

TEST(Summary, MeanAndSampleSd) {
  std::vector<metrics::EvalReport> folds(3);
  folds[0].acc = 0.5;
  folds[1].acc = 0.7;
  folds[2].acc = 0.9;
  const auto s = summarize("x", {"a"}, folds);
  EXPECT_NEAR(s.stat("acc").mean, 0.7, 1e-15);
  EXPECT_NEAR(s.stat("acc").sd, 0.2, 1e-15);
  EXPECT_EQ(summarize("y", {"a"}, {folds[0]}).stat("acc").sd, 0.0);
}

TEST(Vote, MajorityThenProbabilityThenIndex) {
  using P = std::vector<std::vector<double>>;
  EXPECT_EQ(majority_vote(P{{.6, .3, .1}, {.1, .2, .7}, {.5, .4, .1}}), 0u);
  // Three-way split: class 2 has the largest summed probability.
  EXPECT_EQ(majority_vote(P{{.5, .2, .3}, {.2, .4, .4 - 1e-9}, {.1, .2, .7}}), 2u);
  // Exact tie everywhere falls to the lowest index.
  EXPECT_EQ(majority_vote(P{{.5, .5, 0}, {0, .5, .5}, {.5, 0, .5}}), 0u);
  EXPECT_EQ(majority_vote(P{{0, .5, .5}, {0, .5, .5}}), 1u);
}

TEST(Parallel, RunsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(50);
  parallel_for(50, 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Parallel, RethrowsLowestIndexFailure) {
  try {
    parallel_for(20, 4, [](std::size_t i) {
      if (i == 7 || i == 13) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "fail 7");
  }
}

TEST(Suites, RowCountsAndReferences) {
  const ExperimentConfig base;
  const std::pair<Suite, std::size_t> want[] = {{Suite::ModuleToggles, 8},
                                                {Suite::ModalityCombos, 7},
                                                {Suite::AttentionVariants, 5},
                                                {Suite::LossWeights, 36},
                                                {Suite::LateFusion, 2}};
  for (const auto& [suite, n] : want) {
    const auto rows = ablation_rows(suite, base);
    EXPECT_EQ(rows.size(), n) << suite_name(suite);
    std::size_t refs = 0;
    std::set<std::string> names;
    for (const auto& r : rows) {
      refs += r.reference;
      EXPECT_TRUE(names.insert(r.name).second) << r.name;
      EXPECT_NO_THROW(r.config.validate()) << r.name;
    }
    EXPECT_EQ(refs, 1u) << suite_name(suite);
    EXPECT_EQ(parse_suite(suite_name(suite)), suite);
  }
  EXPECT_THROW(parse_suite("everything"), ConfigError);
}

TEST(Suites, LossGridSumsToOne) {
  for (const auto& r : ablation_rows(Suite::LossWeights, {})) {
    const auto& w = r.config.model.loss_weights;
    EXPECT_NEAR(w.alpha + w.beta + w.gamma, 1.0, 1e-12) << r.name;
    EXPECT_GT(w.alpha, 0.0);
    EXPECT_GT(w.beta, 0.0);
    EXPECT_GT(w.gamma, 0.0);
  }
}

TEST(Suites, ModuleTogglesCoverEveryCombination) {
  std::set<std::tuple<bool, bool, bool>> seen;
  for (const auto& r : ablation_rows(Suite::ModuleToggles, {})) {
    const auto& m = r.config.model;
    seen.insert({m.use_smil, m.fusion == cmsa::FusionVariant::Cmsa, m.weighted_loss});
  }
  EXPECT_EQ(seen.size(), 8u);
}

TEST(CrossValidation, JobsDoNotChangeResults) {
  const auto c = tiny_experiment();
  const auto ds = load_dataset(c);
  const auto one = report::to_json(report::from_cv(run_cross_validation(c, ds, 1)));
  const auto four = report::to_json(report::from_cv(run_cross_validation(c, ds, 4)));
  EXPECT_EQ(one, four);
  EXPECT_EQ(one, report::to_json(report::from_cv(run_cross_validation(c, ds, 1))));
}

TEST(CrossValidation, AblationJobsDoNotChangeResults) {
  const auto c = tiny_experiment();
  const auto ds = load_dataset(c);
  const auto one = report::to_json(report::from_ablation(run_ablation_suite(Suite::LateFusion, c, ds, 1)));
  const auto four = report::to_json(report::from_ablation(run_ablation_suite(Suite::LateFusion, c, ds, 3)));
  EXPECT_EQ(one, four);
}

TEST(CrossValidation, ReportsEveryFold) {
  const auto c = tiny_experiment();
  const auto s = run_cross_validation(c, load_dataset(c), 2);
  ASSERT_EQ(s.folds.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(s.folds[k].fold, static_cast<int>(k));
    EXPECT_EQ(s.folds[k].confusion.total(), 6u);
  }
}

TEST(CrossValidation, DivergenceSurfaces) {
  auto c = tiny_experiment();
  c.train.lr0 = 1e300;
  EXPECT_THROW(run_cross_validation(c, load_dataset(c), 2), DivergenceError);
}

TEST(Report, JsonRoundTripIsByteStable) {
  const auto c = tiny_experiment();
  const auto table = run_ablation_suite(Suite::LateFusion, c, load_dataset(c), 2);
  const auto doc = report::from_ablation(table);
  const auto text = report::to_json(doc);
  const auto back = report::parse_json(text);
  EXPECT_EQ(report::to_json(back), text);
  EXPECT_EQ(back.kind, "ablation");
  EXPECT_EQ(back.suite, "late_fusion");
  EXPECT_EQ(report::render_table(back), report::render_table(doc));
  EXPECT_THROW(report::parse_json("{"), DataError);
  EXPECT_THROW(report::parse_json(R"({"kind": "cv"})"), DataError);
}

TEST(Report, TableMarksReference) {
  harness::CvSummary ref = summarize("early", {"a", "b"}, std::vector<metrics::EvalReport>(2));
  ref.reference = true;
  harness::CvSummary other = summarize("late", {"a", "b"}, std::vector<metrics::EvalReport>(2));
  other.p_value = 0.0312;
  const auto text = report::render_table({"ablation", "late_fusion", {ref, other}});
  EXPECT_NE(text.find("Ref."), std::string::npos);
  EXPECT_NE(text.find("0.031"), std::string::npos);
  EXPECT_NE(text.find("0.00±0.00"), std::string::npos);
}

TEST(Report, EmitWritesPerFoldFiles) {
  const auto c = tiny_experiment();
  const auto doc = report::from_cv(run_cross_validation(c, load_dataset(c), 2));
  const auto dir = fs::temp_directory_path() / "scalefuse_emit_test";
  fs::remove_all(dir);
  report::emit(doc, dir);
  for (const char* f : {"summary.json", "table.txt", "confusion_fold0.csv", "roc_fold2.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "confusion_fold0.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "true\\pred,0,1,2");
  EXPECT_EQ(report::to_json(report::read_summary(dir / "summary.json")), report::to_json(doc));
  fs::remove_all(dir);
}

TEST(Config, SerializeParseRoundTrip) {
  auto c = tiny_experiment();
  c.preset = "complementary";
  c.task = preset_task("complementary");
  c.model.fusion = cmsa::FusionVariant::BidirectionalCross;
  c.model.modalities = ModalityMask::parse("om,tem");
  c.train.lr0 = 1.0 / 3.0;
  EXPECT_EQ(parse_config(serialize_config(c)), c);
}

TEST(Config, ErrorsNameTheLine) {
  try {
    parse_config("model.dim=64\nmodel.colour=blue\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("model.colour"), std::string::npos);
  }
  EXPECT_THROW(parse_config("model.dim=abc"), ConfigError);
  EXPECT_THROW(parse_config("model.heads=3"), ConfigError);
  EXPECT_THROW(parse_config("no equals sign"), ConfigError);
  EXPECT_THROW(parse_config("model.fusion=magic"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/scalefuse.cfg"), ConfigError);
  EXPECT_NO_THROW(parse_config("# comment\n\nmodel.dim=32\n"));
}

}  // namespace
}  // namespace scalefuse::harness
