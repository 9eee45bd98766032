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

#include "scalefuse/optim.hpp"

#include <cmath>
#include <numbers>

#include "scalefuse/errors.hpp"

namespace scalefuse {

OptimizerState::OptimizerState(std::span<const Parameter> params, AdamOptions opts)
    : options(opts) {
  for (const auto& p : params) {
    first_moment.emplace_back(p.value.numel(), 0.0);
    second_moment.emplace_back(p.value.numel(), 0.0);
  }
}

void adam_step(std::span<Parameter> params, OptimizerState& state, double lr) {
  if (!(lr >= 0.0)) throw ContractError("adam_step: learning rate must be >= 0");
  if (state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ContractError("adam_step: optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (!p.value.requires_grad()) {
      throw ContractError("adam_step: parameter " + p.name + " does not require grad");
    }
    if (state.first_moment[i].size() != p.value.numel()) {
      throw DimensionError("adam_step: moment shape mismatch for " + p.name);
    }
    for (double g : p.value.grad()) {
      if (!std::isfinite(g)) {
        throw DivergenceError("non-finite gradient in parameter " + p.name);
      }
    }
  }

  const auto& o = state.options;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(o.beta1, t);
  const double bc2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].value.data();
    const auto g = params[i].value.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] -= lr * o.weight_decay * w[k];
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      w[k] -= lr * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

void zero_grads(std::span<Parameter> params) {
  for (auto& p : params) p.value.zero_grad();
}

double cosine_lr(std::uint32_t epoch, const LrSchedule& sched) {
  if (sched.total_epochs == 0) throw ContractError("cosine_lr: total_epochs must be positive");
  if (epoch > sched.total_epochs) {
    throw ContractError("cosine_lr: epoch " + std::to_string(epoch) + " beyond " +
                        std::to_string(sched.total_epochs));
  }
  const double frac = static_cast<double>(epoch) / static_cast<double>(sched.total_epochs);
  return sched.eta_min +
         0.5 * (sched.lr0 - sched.eta_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace scalefuse
