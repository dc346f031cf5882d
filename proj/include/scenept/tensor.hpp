// Copyright 2026 The scenept Authors
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
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenept::ad
{

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape & shape);
std::string to_string(const Shape & shape);

/// Raised when operand shapes are incompatible. The message names every shape involved.
class ShapeError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

namespace detail
{

template <class Scalar>
struct Node
{
  Shape shape;
  std::vector<Scalar> value;
  std::vector<Scalar> grad;  // empty until first accumulation
  bool requires_grad = false;
  const char * op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node &)> backward;

  std::vector<Scalar> & ensure_grad()
  {
    if (grad.empty()) {
      grad.assign(value.size(), Scalar(0));
    }
    return grad;
  }
};

bool grad_recording_disabled();

}  // namespace detail

/// Handle to a node of the computation graph; copies share the node. Training runs on
/// `Tensor` (float); the double instantiation serves numerical verification.
template <class Scalar>
class BasicTensor
{
public:
  using scalar_type = Scalar;
  using Node = detail::Node<Scalar>;

  BasicTensor() = default;

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, Scalar value, bool requires_grad = false);
  static BasicTensor from(Shape shape, std::vector<Scalar> values, bool requires_grad = false);
  static BasicTensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape & shape() const { return node_->shape; }
  std::int64_t ndim() const { return static_cast<std::int64_t>(node_->shape.size()); }
  /// Extent of axis `axis`; negative values count from the back.
  std::int64_t dim(std::int64_t axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->value.size()); }

  std::span<const Scalar> values() const { return node_->value; }
  std::span<Scalar> mutable_values() { return node_->value; }
  Scalar item() const;
  Scalar at(std::initializer_list<std::int64_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; zero-filled when nothing has been accumulated yet.
  std::span<const Scalar> grad() const { return node_->ensure_grad(); }
  std::span<Scalar> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad() { node_->grad.clear(); }

  const char * op() const { return node_->op; }

  /// Reverse-mode sweep from a scalar root. Gradients accumulate (+=) into every
  /// reachable node that requires a gradient.
  void backward() const;

  /// Same values, cut from the graph.
  BasicTensor detach() const;

  Node * node() const { return node_.get(); }

  /// Records an op result. Parents and the backward closure are kept only when graph
  /// recording is on and some parent requires a gradient.
  static BasicTensor make(
    Shape shape, std::vector<Scalar> value, const char * op, std::vector<BasicTensor> parents,
    std::function<void(Node &)> backward);

private:
  explicit BasicTensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  std::shared_ptr<Node> node_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

/// Disables graph recording on the current thread while alive.
class NoGradGuard
{
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard & operator=(const NoGradGuard &) = delete;

private:
  bool previous_;
};

}  // namespace scenept::ad
