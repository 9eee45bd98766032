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

#include "scalefuse/smil.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "scalefuse/errors.hpp"
#include "scalefuse/ops.hpp"

namespace scalefuse::smil {

namespace {

void require_bag(const Tensor& bag) {
  if (!bag.defined() || bag.dim() != 2) {
    throw ContractError("smil: bag must be an n x d matrix");
  }
}

}  // namespace

Tensor pairwise_distances(const Tensor& bag) {
  require_bag(bag);
  const std::size_t n = bag.size(0), d = bag.size(1);
  const auto v = bag.data();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = v[i * d + k] - v[j * d + k];
        acc += diff * diff;
      }
      out[i * n + j] = out[j * n + i] = std::sqrt(acc);
    }
  }
  return Tensor::matrix(n, n, std::move(out));
}

CentralAndMean central_and_mean(const Tensor& distances) {
  if (distances.dim() != 2 || distances.size(0) != distances.size(1)) {
    throw ContractError("central_and_mean: expected a square matrix");
  }
  const std::size_t n = distances.size(0);
  const auto dist = distances.data();
  CentralAndMean out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) row_sum += dist[i * n + j];
    if (row_sum < best) {
      best = row_sum;
      out.central_index = i;
    }
  }
  if (n >= 2) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) total += dist[i * n + j];
    }
    out.mean_distance = (2.0 / static_cast<double>(n * (n - 1))) * total;
  }
  return out;
}

SmilResult aggregate_bag(const Tensor& bag, const SmilOptions& options) {
  require_bag(bag);
  if (!(options.threshold > 0.0)) throw ContractError("smil: threshold must be positive");
  const std::size_t n = bag.size(0);

  const Tensor dist = pairwise_distances(bag);
  const auto dv = dist.data();
  const auto cm = central_and_mean(dist);
  const std::size_t c = cm.central_index;
  const double cutoff = options.threshold * cm.mean_distance;

  SmilDiagnostics diag;
  diag.central_index = c;
  diag.mean_distance = cm.mean_distance;
  diag.retained.assign(n, false);
  diag.weights.assign(n, 0.0);
  diag.retained[c] = true;
  diag.threshold_margin = std::numeric_limits<double>::infinity();

  std::vector<double> row_sums(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) row_sums[i] += dv[i * n + j];
  }
  double second = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (i != c) second = std::min(second, row_sums[i]);
  }
  diag.central_gap = second - row_sums[c];

  std::vector<std::size_t> kept;
  bool all_below_floor = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == c) continue;
    const double dci = dv[c * n + i];
    diag.threshold_margin = std::min(diag.threshold_margin, std::abs(dci - cutoff));
    if (dci <= cutoff) {
      diag.retained[i] = true;
      kept.push_back(i);
      if (dci >= options.epsilon) all_below_floor = false;
    }
  }

  const Tensor central = row(bag, c);
  if (kept.empty()) return {central, std::move(diag)};

  // Weight tensors, one scalar per kept instance.
  std::vector<Tensor> weights;
  weights.reserve(kept.size());
  if (all_below_floor) {
    diag.uniform_fallback = true;
    const double w = 1.0 / static_cast<double>(kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) weights.push_back(Tensor::scalar(w));
  } else {
    std::vector<Tensor> inverse;
    inverse.reserve(kept.size());
    for (auto i : kept) {
      inverse.push_back(reciprocal(clamp_min(distance(row(bag, i), central), options.epsilon)));
    }
    const Tensor total = add_n(inverse);
    for (const auto& inv : inverse) {
      Tensor w = div_scalar(inv, total);
      weights.push_back(options.detach_weights ? w.detach() : w);
    }
  }

  std::vector<Tensor> terms{central};
  terms.reserve(kept.size() + 1);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    diag.weights[kept[k]] = weights[k].item();
    terms.push_back(mul_scalar(row(bag, kept[k]), weights[k]));
  }
  return {add_n(terms), std::move(diag)};
}

Tensor mean_pool(const Tensor& bag) {
  require_bag(bag);
  return mean_rows(bag);
}

}  // namespace scalefuse::smil
