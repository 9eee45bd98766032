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

#include <cstddef>
#include <span>
#include <vector>

#include "scalefuse/tensor.hpp"

// Differentiable primitives. Every op builds a graph node when any input
// requires grad. Vectors are 1-D tensors, matrices 2-D row-major; scalars
// are shape {1}.
namespace scalefuse {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
// a * s where s has one element.
Tensor mul_scalar(const Tensor& a, const Tensor& s);
// a / s where s has one element.
Tensor div_scalar(const Tensor& a, const Tensor& s);

Tensor relu(const Tensor& a);
Tensor reciprocal(const Tensor& a);
// max(a, floor) elementwise; gradient is zero where the floor is active.
Tensor clamp_min(const Tensor& a, double floor);

// Sum of all entries as a scalar.
Tensor sum(const Tensor& a);
// Sequential sum of same-shaped tensors (non-empty).
Tensor add_n(std::span<const Tensor> terms);
// Column means of an L x d matrix; a 1-D input is returned unchanged.
Tensor mean_rows(const Tensor& a);

// Numpy-style for 1-D/2-D operands: (n)@(n,m)->(m), (l,k)@(k)->(l),
// (l,k)@(k,m)->(l,m), (n)@(n)->(1).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// x W + b for x of shape (n) or (L, n), W (n, m), b (m); bias is broadcast
// over rows.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Softmax over the last axis, max-subtracted. Throws InvalidValueError on
// non-finite input.
Tensor softmax(const Tensor& x);
// -log softmax(logits)[label] for a 1-D logit vector.
Tensor cross_entropy(const Tensor& logits, std::size_t label);

// Joins 1-D tensors end to end.
Tensor concat(std::span<const Tensor> parts);
// Contiguous range of a 1-D tensor.
Tensor slice(const Tensor& v, std::size_t offset, std::size_t length);
// Column range of a 2-D tensor.
Tensor slice_cols(const Tensor& m, std::size_t offset, std::size_t length);
// Row i of a 2-D tensor as a vector.
Tensor row(const Tensor& m, std::size_t i);
// Stacks equal-length vectors into a matrix.
Tensor stack_rows(std::span<const Tensor> rows);

// Euclidean distance between two equal-length vectors, as a scalar. The
// subgradient at zero distance is taken as zero.
Tensor distance(const Tensor& a, const Tensor& b);

// Non-differentiable helpers on plain values.
std::vector<double> softmax_values(std::span<const double> x);

// Scoped recorder of how close any relu/clamp_min input came to its kink on
// the current thread. Gradient checks use it to reject evaluation points
// where finite differences would straddle a non-smooth point.
class KinkMonitor {
 public:
  KinkMonitor();
  ~KinkMonitor();
  KinkMonitor(const KinkMonitor&) = delete;
  KinkMonitor& operator=(const KinkMonitor&) = delete;

  // Smallest |input - kink| observed since construction or reset().
  double margin() const;
  void reset();
};

}  // namespace scalefuse
