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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace scalefuse {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

// One vertex of the differentiation graph. Owned through shared_ptr so that
// results keep their inputs alive until the graph is dropped.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated iff requires_grad
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return parents.empty(); }
};

}  // namespace detail

// Dense row-major double tensor with value semantics for metadata and shared
// storage for the underlying node. Copying a Tensor aliases the same node,
// which is what graph construction needs; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  // Empty when the tensor does not require grad.
  std::span<double> grad();
  std::span<const double> grad() const;

  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t r, std::size_t c) const;
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  // Only valid on leaves; allocates a zero grad when switched on.
  void set_requires_grad(bool on);
  bool is_leaf() const;
  void zero_grad();

  // Reverse-mode accumulation of d(this)/d(leaf) into every requires-grad
  // ancestor. Leaf grads accumulate across calls; interior grads are reset
  // at the start of each call so repeated calls add exactly one more copy.
  void backward() const;

  // Same values, no graph history, requires_grad off.
  Tensor detach() const;
  // Deep copy of values and requires_grad flag, fresh zero grad.
  Tensor clone() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Creates a graph node whose requires_grad is inherited from its parents.
// backward_fn is dropped when no parent requires grad.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward_fn);

}  // namespace scalefuse
