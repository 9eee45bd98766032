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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here and nowhere else.

#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "model_fixture.hpp"
#include "primitive_cases.hpp"
#include "scalefuse/cmsa.hpp"
#include "scalefuse/config.hpp"
#include "scalefuse/harness.hpp"
#include "scalefuse/metrics.hpp"
#include "scalefuse/report.hpp"
#include "scalefuse/smil.hpp"
#include "smil_oracle.hpp"

namespace scalefuse {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr double kGradientTol = 1e-4;
constexpr double kGradientSeconds = 120.0;
constexpr double kGridSeconds = 60.0;
constexpr double kWorkedExampleTol = 1e-4;
constexpr double kAttentionTol = 1e-12;
constexpr double kMacroTol = 5e-5;
constexpr double kAucTol = 1e-9;
constexpr double kTTestTol = 1e-3;
constexpr double kConvergenceAcc = 0.95;
constexpr double kConvergenceSeconds = 600.0;
constexpr double kSignTestAlpha = 0.05;
constexpr std::uint64_t kSeeds = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Finite differences over every primitive and the tiny full model.
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : testing::primitive_cases()) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(derive_seed(seed, 11));
      const double e = testing::check_op(c.op, c.make_inputs(rng), rng);
      if (e > worst) {
        worst = e;
        worst_name = c.name;
      }
    }
  }
  const double model = testing::tiny_model_fd_worst(100);
  if (model > worst) {
    worst = model;
    worst_name = "full model";
  }
  const double secs = seconds_since(t0);
  return {worst < kGradientTol && secs < kGradientSeconds,
          fmt("worst relative error %.2e (%s) < %.0e, %.1f s < %.0f s", worst, worst_name.c_str(),
              kGradientTol, secs, kGradientSeconds)};
}

bool smil_matches_oracle(const std::vector<std::vector<double>>& bag, double t) {
  std::vector<double> flat;
  for (const auto& r : bag) flat.insert(flat.end(), r.begin(), r.end());
  const auto got = smil::aggregate_bag(Tensor::matrix(bag.size(), 2, flat), {t});
  const auto want = testing::oracle_smil(bag, t);
  const auto& d = got.diagnostics;
  return d.central_index == want.central && d.mean_distance == want.mean_distance &&
         d.retained == want.retained && d.weights == want.weights &&
         got.feature.to_vector() == want.feature;
}

// 2. Bit-exact agreement with the loop oracle on integer bags in [-3, 3]^2.
Outcome smil_grid() {
  const auto t0 = Clock::now();
  std::vector<std::vector<double>> points;
  for (int x = -3; x <= 3; ++x) {
    for (int y = -3; y <= 3; ++y) points.push_back({double(x), double(y)});
  }
  const std::size_t P = points.size();
  std::size_t bags = 0, mismatches = 0;
  auto check = [&](const std::vector<std::vector<double>>& bag) {
    ++bags;
    mismatches += !smil_matches_oracle(bag, 1.5);
  };
  // Every ordered bag up to three instances.
  for (std::size_t a = 0; a < P; ++a) {
    check({points[a]});
    for (std::size_t b = 0; b < P; ++b) {
      check({points[a], points[b]});
      for (std::size_t c = 0; c < P; ++c) check({points[a], points[b], points[c]});
    }
  }
  // Every multiset of four, rows in a seeded random order.
  Rng order(4);
  for (std::size_t a = 0; a < P; ++a) {
    for (std::size_t b = a; b < P; ++b) {
      for (std::size_t c = b; c < P; ++c) {
        for (std::size_t d = c; d < P; ++d) {
          std::vector<std::vector<double>> bag = {points[a], points[b], points[c], points[d]};
          order.shuffle(bag);
          check(bag);
        }
      }
    }
  }
  // Seeded samples for five and six instances.
  Rng rng(56);
  for (std::size_t n : {5, 6}) {
    for (int i = 0; i < 300000; ++i) {
      std::vector<std::vector<double>> bag;
      for (std::size_t k = 0; k < n; ++k) {
        bag.push_back(points[static_cast<std::size_t>(rng.uniform_int(0, P - 1))]);
      }
      check(bag);
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kGridSeconds,
          fmt("%zu bags, %zu mismatches, %.1f s < %.0f s", bags, mismatches, secs, kGridSeconds)};
}

// 3. The four-point bag with one far instance.
Outcome smil_worked_example() {
  const std::vector<std::vector<double>> bag = {{0, 0}, {1, 0}, {0, 1}, {100, 100}};
  const auto got = smil::aggregate_bag(Tensor::matrix(4, 2, {0, 0, 1, 0, 0, 1, 100, 100}), {1.5});
  const auto want = testing::oracle_smil(bag, 1.5);
  const auto& d = got.diagnostics;
  const double w_near = 2.0 - std::sqrt(2.0), w_far = std::sqrt(2.0) - 1.0;
  const auto f = got.feature.to_vector();
  bool ok = d.central_index == 1 && want.central == 1;
  ok = ok && !d.retained[3] && !want.retained[3] && d.retained[0] && d.retained[2];
  ok = ok && std::abs(d.weights[0] - w_near) < kWorkedExampleTol &&
       std::abs(d.weights[2] - w_far) < kWorkedExampleTol;
  ok = ok && std::abs(want.weights[0] - w_near) < kWorkedExampleTol &&
       std::abs(want.weights[2] - w_far) < kWorkedExampleTol;
  ok = ok && std::abs(f[0] - 1.0) < kWorkedExampleTol && std::abs(f[1] - w_far) < kWorkedExampleTol;
  ok = ok && std::abs(want.feature[0] - f[0]) < kWorkedExampleTol &&
       std::abs(want.feature[1] - f[1]) < kWorkedExampleTol;
  return {ok, fmt("central %zu (1-based), 4th excluded %s, weights (%.5f, %.5f), f' (%.5f, %.5f)",
                  d.central_index + 1, d.retained[3] ? "no" : "yes", d.weights[0], d.weights[2],
                  f[0], f[1])};
}

// 4. Attention weight normalization, zero-parameter passthrough and
// permutation invariance.
Outcome attention_invariants() {
  Rng rng(40);
  double sum_err = 0.0, perm_err = 0.0;
  bool passthrough = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t heads = trial % 2 ? 4 : 2, d = 8;
    const auto p = cmsa::make_attention_params(d, heads, trial % 3 == 0, rng);
    const auto L = static_cast<std::size_t>(rng.uniform_int(1, 9));
    const Tensor q = testing::random_tensor({d}, rng, -3, 3, false);
    const Tensor kv = testing::random_tensor({L, d}, rng, -3, 3, false);
    const auto out = cmsa::cross_attention_heads(q, kv, p);
    for (const auto& w : out.weights) {
      sum_err = std::max(sum_err, std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0));
    }
    std::vector<std::size_t> perm(L);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<double> shuffled;
    for (auto i : perm) {
      for (std::size_t j = 0; j < d; ++j) shuffled.push_back(kv.at(i, j));
    }
    const auto again = cmsa::cross_attention_heads(q, Tensor::matrix(L, d, shuffled), p);
    for (std::size_t j = 0; j < d; ++j) {
      perm_err = std::max(perm_err, std::abs(out.output.at(j) - again.output.at(j)));
    }

    const cmsa::CmsaParams zero{cmsa::zero_attention_params(d, heads, trial % 3 == 0),
                                cmsa::zero_attention_params(d, heads, trial % 3 == 0)};
    const cmsa::ModalityFeature om{Modality::OM, testing::random_tensor({L, d}, rng, -1, 1, false)};
    const cmsa::ModalityFeature im{Modality::IM, testing::random_tensor({3, d}, rng, -1, 1, false)};
    const auto fused = cmsa::cmsa_fuse(q, om, im, zero);
    passthrough = passthrough && fused.om.to_vector() == om.pooled().to_vector() &&
                  fused.im.to_vector() == im.pooled().to_vector();
  }
  return {sum_err <= kAttentionTol && perm_err < kAttentionTol && passthrough,
          fmt("max |sum w - 1| %.1e, permutation diff %.1e, passthrough %s", sum_err, perm_err,
              passthrough ? "exact" : "broken")};
}

double concordant_pair_auc(const std::vector<std::size_t>& truth, const std::vector<double>& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (truth[i] != 1 || truth[j] != 0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

// 5. Macro scores, AUC and paired t-test against independent references.
Outcome metric_oracles() {
  const metrics::ConfusionMatrix cm{3, {2, 0, 0, 0, 1, 1, 0, 0, 2}};
  const auto m = metrics::macro_scores(cm);
  const double want[] = {5.0 / 6.0, 8.0 / 9.0, 5.0 / 6.0, 11.0 / 12.0, (1.0 + 2.0 / 3.0 + 0.8) / 3.0};
  const double got[] = {m.accuracy, m.precision, m.recall, m.specificity, m.f1};
  double macro_err = 0.0;
  for (int i = 0; i < 5; ++i) macro_err = std::max(macro_err, std::abs(got[i] - want[i]));

  double auc_err = 0.0;
  std::size_t instances = 0;
  Rng rng(5);
  for (std::size_t n = 2; n <= 20; ++n) {
    for (int trial = 0; trial < 300; ++trial) {
      std::vector<std::size_t> truth(n);
      for (auto& t : truth) t = static_cast<std::size_t>(rng.uniform_int(0, 1));
      const auto pos = std::accumulate(truth.begin(), truth.end(), std::size_t{0});
      if (pos == 0 || pos == n) continue;
      std::vector<double> s(n);
      std::vector<std::vector<double>> probs(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng.uniform_int(0, 8)) / 8.0;
        probs[i] = {1.0 - s[i], s[i]};
      }
      auc_err = std::max(auc_err,
                         std::abs(metrics::roc_auc_macro(truth, probs).macro_auc -
                                  concordant_pair_auc(truth, s)));
      ++instances;
    }
  }

  const std::vector<double> a = {1, 2, 3}, b = {0, 0, 0};
  const auto tt = metrics::paired_t_test(a, b);
  const boost::math::students_t dist(2.0);
  const double p_ref = 2.0 * boost::math::cdf(boost::math::complement(dist, tt.t));
  const bool t_ok = std::abs(tt.t - 3.4641) < kTTestTol && std::abs(tt.p - 0.0742) < kTTestTol &&
                    std::abs(tt.p - p_ref) < 1e-12;
  return {macro_err < kMacroTol && auc_err < kAucTol && t_ok,
          fmt("macro err %.1e, AUC err %.1e over %zu instances, t %.4f p %.4f (ref %.4f)",
              macro_err, auc_err, instances, tt.t, tt.p, p_ref)};
}

// 6. Default task, full configuration, one thread.
Outcome convergence() {
  const auto t0 = Clock::now();
  const ExperimentConfig c;
  const auto s = harness::run_cross_validation(c, harness::load_dataset(c), 1);
  const double secs = seconds_since(t0);
  const double acc = s.stat("acc").mean;
  return {acc >= kConvergenceAcc && secs < kConvergenceSeconds,
          fmt("mean fold accuracy %.4f >= %.2f, %.1f s < %.0f s", acc, kConvergenceAcc, secs,
              kConvergenceSeconds)};
}

double cv_accuracy(ExperimentConfig c, std::uint64_t seed, const std::function<void(ExperimentConfig&)>& edit) {
  c.task.seed = seed;
  c.train.seed = seed;
  edit(c);
  return harness::run_cross_validation(c, harness::load_dataset(c), 1).stat("acc").mean;
}

// One-sided sign test: P(at least wins heads in trials fair coin flips).
double sign_test_p(std::size_t wins, std::size_t trials) {
  double p = 0.0;
  for (std::size_t k = wins; k <= trials; ++k) {
    double comb = 1.0;
    for (std::size_t i = 0; i < k; ++i) comb = comb * double(trials - i) / double(i + 1);
    p += comb * std::pow(0.5, double(trials));
  }
  return p;
}

// 7. Complementary preset: all three modalities beat the best pair.
Outcome ablation_ordering() {
  ExperimentConfig base;
  base.preset = "complementary";
  base.task = preset_task("complementary");
  std::size_t wins = 0, trials = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    double best_pair = 0.0;
    for (const char* mask : {"om,im", "om,tem", "im,tem"}) {
      best_pair = std::max(best_pair, cv_accuracy(base, seed, [&](ExperimentConfig& c) {
                             c.model.modalities = ModalityMask::parse(mask);
                           }));
    }
    const double tri = cv_accuracy(base, seed, [](ExperimentConfig&) {});
    if (tri != best_pair) ++trials;
    if (tri > best_pair) ++wins;
    per_seed += fmt(" %.3f/%.3f", tri, best_pair);
  }
  const double p = trials ? sign_test_p(wins, trials) : 1.0;
  return {wins == kSeeds && p < kSignTestAlpha,
          fmt("tri/best pair per seed:%s; %zu of %zu wins, sign test p %.4f < %.2f", per_seed.c_str(),
              wins, kSeeds, p, kSignTestAlpha)};
}

// 8. Outlier preset: bag aggregation on versus mean pooling.
Outcome outlier_ordering() {
  ExperimentConfig base;
  base.preset = "outlier";
  base.task = preset_task("outlier");
  double on = 0.0, off = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    const double a = cv_accuracy(base, seed, [](ExperimentConfig& c) { c.model.use_smil = true; });
    const double b = cv_accuracy(base, seed, [](ExperimentConfig& c) { c.model.use_smil = false; });
    on += a / double(kSeeds);
    off += b / double(kSeeds);
    per_seed += fmt(" %.3f/%.3f", a, b);
  }
  return {on >= off, fmt("on/off per seed:%s; mean %.4f >= %.4f", per_seed.c_str(), on, off)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(SCALEFUSE_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// A reduced experiment so the CLI checks stay quick; determinism does not
// depend on size.
fs::path write_small_config(const fs::path& dir) {
  fs::create_directories(dir);
  const auto path = dir / "small.cfg";
  std::ofstream(path) << "task.patients_per_class=8\n"
                         "task.om.raw_dim=8\ntask.im.raw_dim=8\ntask.tem.raw_dim=8\n"
                         "task.om.tokens=3\ntask.im.tokens=3\n"
                         "task.bag_min=3\ntask.bag_max=5\ntask.outlier_rate=0.3\n"
                         "model.dim=16\nmodel.heads=2\n"
                         "train.epochs=3\ntrain.lr=0.001\ncv.folds=4\n";
  return path;
}

// 9. Same command and seed twice gives identical bytes; jobs do not matter.
Outcome reproducibility() {
  const auto root = fs::temp_directory_path() / "scalefuse_acceptance_cli";
  fs::remove_all(root);
  const auto cfg = write_small_config(root).string();
  const std::string base = "--config " + cfg + " --seed 7 ";
  std::vector<std::string> failures;
  auto same = [&](const std::string& what, const std::string& a, const std::string& b) {
    if (a.empty() || a != b) failures.push_back(what);
  };
  auto out = [&](const std::string& name) { return (root / name).string(); };

  cli("generate " + base + "--out " + out("gen1"));
  cli("generate " + base + "--out " + out("gen2"));
  same("generate", slurp(root / "gen1" / "manifest.json"), slurp(root / "gen2" / "manifest.json"));
  same("generate data", slurp(root / "gen1" / "P0003_tem_1.f32"), slurp(root / "gen2" / "P0003_tem_1.f32"));

  cli("train " + base + "--jobs 1 --out " + out("train1"));
  cli("train " + base + "--jobs 1 --out " + out("train2"));
  cli("train " + base + "--jobs 4 --out " + out("train4"));
  const auto t1 = slurp(root / "train1" / "summary.json");
  same("train", t1, slurp(root / "train2" / "summary.json"));
  same("train --jobs 4", t1, slurp(root / "train4" / "summary.json"));
  same("train checkpoint", slurp(root / "train1" / "model.json"), slurp(root / "train4" / "model.json"));

  for (const char* o : {"eval1", "eval2"}) {
    cli("evaluate " + base + "--checkpoint " + out("train1/model.json") + " --manifest " +
        out("gen1") + " --out " + out(o));
  }
  same("evaluate", slurp(root / "eval1" / "summary.json"), slurp(root / "eval2" / "summary.json"));

  cli("ablate --suite module_toggles " + base + "--jobs 1 --out " + out("abl1"));
  cli("ablate --suite module_toggles " + base + "--jobs 1 --out " + out("abl2"));
  cli("ablate --suite module_toggles " + base + "--jobs 4 --out " + out("abl4"));
  const auto a1 = slurp(root / "abl1" / "summary.json");
  same("ablate", a1, slurp(root / "abl2" / "summary.json"));
  same("ablate --jobs 4", a1, slurp(root / "abl4" / "summary.json"));

  cli("report --summary " + out("abl1/summary.json") + " --out " + out("rep1"));
  cli("report --summary " + out("abl1/summary.json") + " --out " + out("rep2"));
  same("report", slurp(root / "rep1" / "summary.json"), slurp(root / "rep2" / "summary.json"));
  same("report table", slurp(root / "rep1" / "table.txt"), slurp(root / "rep2" / "table.txt"));

  std::string failed;
  for (const auto& f : failures) failed += " " + f;
  return {failures.empty(), failures.empty()
                                ? "generate, train, evaluate, ablate, report byte-identical; jobs 4 == jobs 1"
                                : "differs or missing:" + failed};
}

// 10. Row counts of the three suites, through the CLI.
Outcome grid_shape() {
  const auto root = fs::temp_directory_path() / "scalefuse_acceptance_grid";
  fs::remove_all(root);
  const auto cfg = write_small_config(root).string();
  const std::pair<const char*, std::size_t> want[] = {
      {"module_toggles", 8}, {"modality_combos", 7}, {"attention_variants", 5}};
  bool ok = true;
  std::string detail;
  for (const auto& [suite, n] : want) {
    const auto dir = root / suite;
    const int rc = cli(std::string("ablate --suite ") + suite + " --config " + cfg + " --out " + dir.string());
    std::size_t rows = 0;
    if (rc == 0) rows = report::read_summary(dir / "summary.json").rows.size();
    ok = ok && rows == n;
    detail += fmt("%s%s %zu rows (want %zu)", detail.empty() ? "" : ", ", suite, rows, n);
  }
  return {ok, detail};
}

}  // namespace
}  // namespace scalefuse

int main() {
  using namespace scalefuse;
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"gradient suite", gradient_suite},
      {"bag aggregation matches oracle on integer grid", smil_grid},
      {"bag aggregation worked example", smil_worked_example},
      {"attention invariants", attention_invariants},
      {"metric oracles", metric_oracles},
      {"default task convergence", convergence},
      {"tri-modal beats best bimodal on complementary preset", ablation_ordering},
      {"bag aggregation at least matches mean pooling with outliers", outlier_ordering},
      {"reproducibility", reproducibility},
      {"ablation grid shape", grid_shape},
  };
  int failed = 0, index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s A%d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
