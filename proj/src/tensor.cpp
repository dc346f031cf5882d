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

#include "scenept/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace scenept::ad
{

namespace
{
thread_local bool g_no_grad = false;
}

bool detail::grad_recording_disabled() { return g_no_grad; }

std::int64_t numel(const Shape & shape)
{
  std::int64_t n = 1;
  for (auto e : shape) {
    if (e < 0) {
      throw ShapeError("negative extent in shape " + to_string(shape));
    }
    n *= e;
  }
  return n;
}

std::string to_string(const Shape & shape)
{
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <class S>
BasicTensor<S> BasicTensor<S>::zeros(Shape shape, bool requires_grad)
{
  return full(std::move(shape), S(0), requires_grad);
}

template <class S>
BasicTensor<S> BasicTensor<S>::full(Shape shape, S value, bool requires_grad)
{
  const auto n = ad::numel(shape);
  return from(std::move(shape), std::vector<S>(static_cast<std::size_t>(n), value), requires_grad);
}

template <class S>
BasicTensor<S> BasicTensor<S>::from(Shape shape, std::vector<S> values, bool requires_grad)
{
  if (ad::numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError(
      "value count " + std::to_string(values.size()) + " does not match shape " + to_string(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return BasicTensor(std::move(node));
}

template <class S>
BasicTensor<S> BasicTensor<S>::scalar(S value, bool requires_grad)
{
  return from({}, {value}, requires_grad);
}

template <class S>
std::int64_t BasicTensor<S>::dim(std::int64_t axis) const
{
  const auto n = ndim();
  const auto a = axis < 0 ? axis + n : axis;
  if (a < 0 || a >= n) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape()));
  }
  return node_->shape[static_cast<std::size_t>(a)];
}

template <class S>
S BasicTensor<S>::item() const
{
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + to_string(shape()));
  }
  return node_->value[0];
}

template <class S>
S BasicTensor<S>::at(std::initializer_list<std::int64_t> index) const
{
  if (static_cast<std::int64_t>(index.size()) != ndim()) {
    throw ShapeError("index rank mismatch for shape " + to_string(shape()));
  }
  std::int64_t offset = 0;
  std::size_t i = 0;
  for (auto v : index) {
    offset = offset * node_->shape[i++] + v;
  }
  return node_->value[static_cast<std::size_t>(offset)];
}

template <class S>
BasicTensor<S> BasicTensor<S>::detach() const
{
  return from(node_->shape, node_->value, false);
}

template <class S>
BasicTensor<S> BasicTensor<S>::make(
  Shape shape, std::vector<S> value, const char * op, std::vector<BasicTensor> parents,
  std::function<void(Node &)> backward)
{
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  if (!g_no_grad) {
    bool any = false;
    for (const auto & p : parents) {
      any = any || p.requires_grad();
    }
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(parents.size());
      for (auto & p : parents) {
        node->parents.push_back(p.node_);
      }
      node->backward = std::move(backward);
    }
  }
  return BasicTensor(std::move(node));
}

template <class S>
void BasicTensor<S>::backward() const
{
  if (numel() != 1) {
    throw ShapeError("backward() requires a scalar root, got shape " + to_string(shape()));
  }
  if (!node_->requires_grad) {
    return;
  }

  // Iterative post-order DFS yields a topological order of the reachable subgraph.
  std::vector<Node *> order;
  std::unordered_set<Node *> seen;
  std::vector<std::pair<Node *, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto & [n, next] = stack.back();
    if (next < n->parents.size()) {
      auto * p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) {
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    auto * n = *it;
    if (n->backward && !n->grad.empty()) {
      n->backward(*n);
    }
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }

}  // namespace scenept::ad
