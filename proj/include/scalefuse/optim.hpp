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
#include <span>
#include <string>
#include <vector>

#include "scalefuse/tensor.hpp"

namespace scalefuse {

// A learnable tensor registered under a stable name.
struct Parameter {
  std::string name;
  Tensor value;
};

struct AdamOptions {
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Per-parameter moments plus the shared step counter. Moments are laid out
// in the same order as the parameter list passed to adam_step.
struct OptimizerState {
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  AdamOptions options;

  OptimizerState() = default;
  OptimizerState(std::span<const Parameter> params, AdamOptions opts);
};

// One bias-corrected Adam update using the grads held by each parameter.
// Weight decay is decoupled: p <- p - lr * wd * p, then the moment update.
// Throws DivergenceError naming the first parameter with a non-finite grad;
// nothing is modified in that case.
void adam_step(std::span<Parameter> params, OptimizerState& state, double lr);

void zero_grads(std::span<Parameter> params);

struct LrSchedule {
  double lr0 = 5e-5;
  std::uint32_t total_epochs = 60;
  double eta_min = 0.0;
};

// eta_min + (lr0 - eta_min) * (1 + cos(pi * epoch / total_epochs)) / 2,
// for 0 <= epoch <= total_epochs.
double cosine_lr(std::uint32_t epoch, const LrSchedule& sched);

}  // namespace scalefuse
