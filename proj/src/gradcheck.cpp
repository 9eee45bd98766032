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

#include "scalefuse/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "scalefuse/errors.hpp"

namespace scalefuse {

namespace {

// Entries whose true gradient is zero (a key bias under softmax, say) are
// judged by absolute error; central differences leave ~1e-11 of roundoff.
constexpr double kDenominatorFloor = 1e-6;

}  // namespace

double grad_check_finite_diff(const std::function<Tensor()>& f, Tensor& x,
                              double step) {
  if (!(step > 0.0)) throw ContractError("grad_check_finite_diff: step must be positive");
  if (!x.is_leaf() || !x.requires_grad()) {
    throw ContractError("grad_check_finite_diff: x must be a leaf requiring grad");
  }
  x.zero_grad();
  f().backward();
  const auto g = x.grad();
  const std::vector<double> analytic(g.begin(), g.end());

  auto values = x.data();
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double up = f().item();
    values[i] = saved - step;
    const double down = f().item();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - numeric) /
                       std::max(kDenominatorFloor, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace scalefuse
