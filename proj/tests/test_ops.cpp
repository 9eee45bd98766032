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

#include <cmath>
#include <limits>
#include <string>

#include "scalefuse/errors.hpp"
#include "scalefuse/ops.hpp"
#include "primitive_cases.hpp"
#include "test_util.hpp"

namespace scalefuse {
namespace {

using testing::check_op;
using testing::kGradTol;
using testing::random_tensor;
using testing::Inputs;
using testing::primitive_cases;

constexpr int kTrials = 100;

TEST(Primitives, FiniteDifferenceAgreementOverRandomPoints) {
  for (const auto& c : primitive_cases()) {
    double worst = 0.0;
    for (int seed = 0; seed < kTrials; ++seed) {
      Rng rng(derive_seed(static_cast<std::uint64_t>(seed), 11));
      worst = std::max(worst, check_op(c.op, c.make_inputs(rng), rng));
    }
    EXPECT_LT(worst, kGradTol) << c.name;
  }
}

TEST(Primitives, SoftmaxGradientIsProbabilitiesMinusOneHot) {
  Tensor logits = Tensor::vector({0.2, -1.0, 0.7}, true);
  cross_entropy(logits, 2).backward();
  const auto p = softmax_values(logits.data());
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(logits.grad()[i], p[i] - (i == 2 ? 1.0 : 0.0), 1e-12);
  }
}

TEST(Primitives, SoftmaxIsShiftInvariantAndStable) {
  const auto a = softmax_values(std::vector<double>{1.0, 2.0, 3.0});
  const auto b = softmax_values(std::vector<double>{1001.0, 1002.0, 1003.0});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
  EXPECT_THROW(softmax(Tensor::vector({1.0, std::nan("")})), InvalidValueError);
  EXPECT_THROW(softmax(Tensor::vector({1.0, std::numeric_limits<double>::infinity()})),
               InvalidValueError);
}

TEST(Primitives, LinearMatchesHandComputation) {
  const Tensor x = Tensor::vector({1.0, 2.0});
  const Tensor w = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  const Tensor b = Tensor::vector({0.5, 0.0, -0.5});
  const auto y = linear(x, w, b).to_vector();
  EXPECT_EQ(y, (std::vector<double>{9.5, 12.0, 14.5}));
}

TEST(Primitives, ShapeMismatchesAreRejected) {
  EXPECT_THROW(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0}), DimensionError);
  EXPECT_THROW(Tensor::zeros({0}), DimensionError);
}

TEST(Graph, RepeatedBackwardAccumulatesExactly) {
  Rng rng(3);
  Tensor x = random_tensor({4}, rng);
  Tensor w = random_tensor({4, 2}, rng);
  const Tensor loss = sum(relu(matmul(x, w)));
  loss.backward();
  const auto once = w.to_vector();
  std::vector<double> g1(w.grad().begin(), w.grad().end());
  loss.backward();
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(w.grad()[i], 2.0 * g1[i]);
  EXPECT_EQ(w.to_vector(), once);
}

TEST(Graph, UnusedLeafKeepsZeroGrad) {
  Tensor used = Tensor::vector({1.0, 2.0}, true);
  Tensor unused = Tensor::vector({3.0, 4.0}, true);
  (void)add(unused, unused);  // built but not part of the loss
  sum(mul(used, used)).backward();
  for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Graph, SharedSubexpressionGetsBothContributions) {
  Tensor x = Tensor::vector({1.5}, true);
  const Tensor y = mul(x, x);          // x^2
  sum(add(y, mul(y, x))).backward();   // x^2 + x^3
  EXPECT_NEAR(x.grad()[0], 2 * 1.5 + 3 * 1.5 * 1.5, 1e-12);
}

TEST(Graph, BackwardNeedsScalar) {
  Tensor x = Tensor::vector({1.0, 2.0}, true);
  EXPECT_THROW(mul(x, x).backward(), ContractError);
}

TEST(Graph, DetachStopsGradient) {
  Tensor x = Tensor::vector({2.0}, true);
  sum(mul(x, x.detach())).backward();
  EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(Graph, DistanceSubgradientAtZeroIsZero) {
  Tensor a = Tensor::vector({1.0, 1.0}, true);
  Tensor b = Tensor::vector({1.0, 1.0}, true);
  distance(a, b).backward();
  for (double g : a.grad()) EXPECT_EQ(g, 0.0);
}

TEST(KinkMonitorTest, RecordsClosestReluInput) {
  testing::away_from_kinks([] { return relu(Tensor::vector({0.5})); });
  KinkMonitor m;
  relu(Tensor::vector({0.5, -0.02, 3.0}));
  EXPECT_DOUBLE_EQ(m.margin(), 0.02);
  m.reset();
  clamp_min(Tensor::vector({1.25}), 1.0);
  EXPECT_DOUBLE_EQ(m.margin(), 0.25);
}

}  // namespace
}  // namespace scalefuse
