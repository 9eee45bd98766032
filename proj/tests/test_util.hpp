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

#include <cstdint>
#include <functional>
#include <vector>

#include "scalefuse/gradcheck.hpp"
#include "scalefuse/ops.hpp"
#include "scalefuse/rng.hpp"
#include "scalefuse/tensor.hpp"

namespace scalefuse::testing {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kGradTol = 1e-4;
// Points where some relu/clamp input sits closer than this to its kink are
// redrawn; central differences with kFdStep stay on one side of it.
inline constexpr double kKinkMargin = 1e-3;

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Contracts an op's output with fixed random weights so every output entry
// contributes to the scalar being differentiated.
inline Tensor contract(const Tensor& out, Rng& rng) {
  const Tensor w = random_tensor(out.shape(), rng, -1.0, 1.0, false);
  return sum(mul(out, w));
}

// Max finite-difference error over every input of op, with the loss being a
// random contraction of op's output.
inline double check_op(const std::function<Tensor(const std::vector<Tensor>&)>& op,
                       std::vector<Tensor> inputs, Rng& rng) {
  const Tensor w = random_tensor(op(inputs).shape(), rng, -1.0, 1.0, false);
  auto loss = [&] { return sum(mul(op(inputs), w)); };
  double worst = 0.0;
  for (auto& x : inputs) {
    if (!x.requires_grad()) continue;
    worst = std::max(worst, grad_check_finite_diff(loss, x, kFdStep));
  }
  return worst;
}

// Whether evaluating f keeps every kink at least kKinkMargin away.
inline bool away_from_kinks(const std::function<Tensor()>& f) {
  KinkMonitor monitor;
  f();
  return monitor.margin() >= kKinkMargin;
}

}  // namespace scalefuse::testing
