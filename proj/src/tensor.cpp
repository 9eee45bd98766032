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

#include "scalefuse/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "scalefuse/errors.hpp"

namespace scalefuse {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (auto e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
  }
}

const detail::Node& require(const std::shared_ptr<detail::Node>& n) {
  if (!n) throw ContractError("operation on an undefined tensor");
  return *n;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  set_requires_grad(requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  check_shape(shape);
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return Tensor({n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values, bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return require(node_).shape; }

std::size_t Tensor::size(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw DimensionError("axis out of range");
  return s[axis];
}

std::size_t Tensor::numel() const { return require(node_).value.size(); }

std::span<double> Tensor::data() {
  require(node_);
  return node_->value;
}

std::span<const double> Tensor::data() const { return require(node_).value; }

std::span<double> Tensor::grad() {
  require(node_);
  return node_->grad;
}

std::span<const double> Tensor::grad() const { return require(node_).grad; }

double Tensor::item() const {
  const auto& n = require(node_);
  if (n.value.size() != 1) {
    throw ContractError("item() on tensor of shape " + shape_to_string(n.shape));
  }
  return n.value[0];
}

double Tensor::at(std::size_t i) const {
  const auto& n = require(node_);
  if (i >= n.value.size()) throw DimensionError("index out of range");
  return n.value[i];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  const auto& n = require(node_);
  if (n.shape.size() != 2 || r >= n.shape[0] || c >= n.shape[1]) {
    throw DimensionError("matrix index out of range");
  }
  return n.value[r * n.shape[1] + c];
}

std::vector<double> Tensor::to_vector() const { return require(node_).value; }

bool Tensor::requires_grad() const { return require(node_).requires_grad; }

void Tensor::set_requires_grad(bool on) {
  require(node_);
  if (!node_->is_leaf()) {
    throw ContractError("requires_grad can only be changed on leaf tensors");
  }
  node_->requires_grad = on;
  if (on) {
    node_->grad.assign(node_->value.size(), 0.0);
  } else {
    node_->grad.clear();
  }
}

bool Tensor::is_leaf() const { return require(node_).is_leaf(); }

void Tensor::zero_grad() {
  require(node_);
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
  const auto& root = require(node_);
  if (root.value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_to_string(root.shape));
  }
  if (!root.requires_grad) return;

  // Iterative post-order DFS; reversed it gives a valid reverse topological
  // order for propagation.
  std::vector<detail::Node*> order;
  std::unordered_set<const detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && !visited.contains(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (auto* n : order) {
    if (!n->is_leaf()) std::fill(n->grad.begin(), n->grad.end(), 0.0);
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

Tensor Tensor::detach() const {
  const auto& n = require(node_);
  return Tensor(n.shape, n.value, false);
}

Tensor Tensor::clone() const {
  const auto& n = require(node_);
  return Tensor(n.shape, n.value, n.requires_grad);
}

Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool any = std::any_of(parents.begin(), parents.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->grad.assign(node->value.size(), 0.0);
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

}  // namespace scalefuse
