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

#include <functional>

#include "scalefuse/tensor.hpp"

namespace scalefuse {

// Compares reverse-mode gradients of a scalar function against central
// differences with respect to every coordinate of x, which must be a leaf
// requiring grad. f must rebuild its graph from the current values of x on
// every call. Returns
//   max_i |analytic_i - numeric_i| / max(1e-8, |analytic_i| + |numeric_i|).
// x's grad is left holding the analytic gradient; its values are restored.
// Central differences of f with respect to every entry of x (a leaf that
// requires grad), compared with the analytic gradient from f().backward().
// Returns max_i |a_i - n_i| / max(1e-6, |a_i| + |n_i|).
double grad_check_finite_diff(const std::function<Tensor()>& f, Tensor& x,
                              double step);

}  // namespace scalefuse
