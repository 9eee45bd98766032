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
#include <vector>

#include "scalefuse/tensor.hpp"

// Sparse multi-instance aggregation of a bag of instance features into one
// feature vector: pick the central instance, drop instances farther than
// threshold * mean pairwise distance from it, and add the survivors to the
// central instance with normalized inverse-distance weights.
//
// A bag is an n x d matrix, one instance per row. Indices are zero-based.
namespace scalefuse::smil {

struct SmilOptions {
  double threshold = 1.5;
  // Floor applied to distances before inversion.
  double epsilon = 1e-8;
  // Treat weights as constants in the backward pass.
  bool detach_weights = false;
};

struct CentralAndMean {
  std::size_t central_index = 0;
  double mean_distance = 0.0;
};

struct SmilDiagnostics {
  std::size_t central_index = 0;
  double mean_distance = 0.0;
  std::vector<bool> retained;   // per instance; the central one is always kept
  std::vector<double> weights;  // per instance; zero for central and excluded
  // min over non-central i of |D(c, i) - threshold * mean_distance|.
  double threshold_margin = 0.0;
  // Second smallest row sum minus the smallest (infinity when n == 1).
  double central_gap = 0.0;
  bool uniform_fallback = false;
};

struct SmilResult {
  Tensor feature;  // d-vector, part of the caller's graph
  SmilDiagnostics diagnostics;
};

// n x n symmetric Euclidean distance matrix of the bag's values.
Tensor pairwise_distances(const Tensor& bag);

// Central instance (minimum row sum, lowest index on ties) and the mean of
// the n(n-1)/2 off-diagonal distances (zero for n == 1).
CentralAndMean central_and_mean(const Tensor& distances);

// Differentiable aggregation. The central index and the retained set are
// decided on the forward values and held fixed for the backward pass.
SmilResult aggregate_bag(const Tensor& bag, const SmilOptions& options = {});

// Plain mean over instances, the aggregation used when SMIL is switched off.
Tensor mean_pool(const Tensor& bag);

}  // namespace scalefuse::smil
