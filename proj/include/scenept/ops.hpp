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
#include <initializer_list>
#include <span>
#include <type_traits>
#include <vector>

#include "scenept/tensor.hpp"

namespace scenept::ad
{

template <class S>
using Scalar = std::type_identity_t<S>;

// Elementwise arithmetic with numpy-style broadcasting (shapes right-aligned).
template <class S>
BasicTensor<S> add(const BasicTensor<S> & a, const BasicTensor<S> & b);
template <class S>
BasicTensor<S> sub(const BasicTensor<S> & a, const BasicTensor<S> & b);
template <class S>
BasicTensor<S> mul(const BasicTensor<S> & a, const BasicTensor<S> & b);
template <class S>
BasicTensor<S> add_scalar(const BasicTensor<S> & a, Scalar<S> s);
template <class S>
BasicTensor<S> mul_scalar(const BasicTensor<S> & a, Scalar<S> s);

template <class S>
BasicTensor<S> operator+(const BasicTensor<S> & a, const BasicTensor<S> & b) { return add(a, b); }
template <class S>
BasicTensor<S> operator-(const BasicTensor<S> & a, const BasicTensor<S> & b) { return sub(a, b); }
template <class S>
BasicTensor<S> operator*(const BasicTensor<S> & a, const BasicTensor<S> & b) { return mul(a, b); }
template <class S>
BasicTensor<S> operator+(const BasicTensor<S> & a, Scalar<S> s) { return add_scalar(a, s); }
template <class S>
BasicTensor<S> operator-(const BasicTensor<S> & a, Scalar<S> s) { return add_scalar(a, -s); }
template <class S>
BasicTensor<S> operator*(const BasicTensor<S> & a, Scalar<S> s) { return mul_scalar(a, s); }
template <class S>
BasicTensor<S> operator*(Scalar<S> s, const BasicTensor<S> & a) { return mul_scalar(a, s); }
template <class S>
BasicTensor<S> operator-(const BasicTensor<S> & a) { return mul_scalar(a, S(-1)); }

template <class S>
BasicTensor<S> relu(const BasicTensor<S> & a);
template <class S>
BasicTensor<S> exp(const BasicTensor<S> & a);
template <class S>
BasicTensor<S> log(const BasicTensor<S> & a);

/// [..., M, K] x [..., K, N]. A rank-2 right operand is shared across all leading axes
/// of the left one; otherwise the leading axes broadcast.
template <class S>
BasicTensor<S> matmul(const BasicTensor<S> & a, const BasicTensor<S> & b);

template <class S>
BasicTensor<S> reshape(const BasicTensor<S> & a, Shape shape);
template <class S>
BasicTensor<S> permute(const BasicTensor<S> & a, const std::vector<int> & axes);
template <class S>
BasicTensor<S> transpose(const BasicTensor<S> & a, int axis0, int axis1);
template <class S>
BasicTensor<S> concat(std::span<const BasicTensor<S>> parts, int axis);
template <class S>
BasicTensor<S> concat(std::initializer_list<BasicTensor<S>> parts, int axis)
{
  return concat(std::span<const BasicTensor<S>>(parts.begin(), parts.size()), axis);
}
/// Half-open range [begin, end) along `axis`.
template <class S>
BasicTensor<S> slice(const BasicTensor<S> & a, int axis, std::int64_t begin, std::int64_t end);
/// Gathers entries along `axis`; repeated indices accumulate their gradients.
template <class S>
BasicTensor<S> index_select(const BasicTensor<S> & a, int axis, std::span<const std::int64_t> indices);

/// Softmax along `axis`. `mask` (optional, 0/1, broadcastable to `a`) removes entries
/// before normalization, equivalent to a -inf logit. A row with no surviving entry
/// yields zeros and a zero gradient.
template <class S>
BasicTensor<S> softmax(const BasicTensor<S> & a, int axis, const BasicTensor<S> & mask = {});

/// Normalizes over the last axis then applies `gamma` and `beta` of that extent.
template <class S>
BasicTensor<S> layer_norm(
  const BasicTensor<S> & x, const BasicTensor<S> & gamma, const BasicTensor<S> & beta,
  double eps = 1e-5);

/// Max over `axis` restricted to entries where `mask` (broadcastable to `a`) is nonzero.
/// The gradient routes to the argmax; a slice with no valid entry yields 0.
template <class S>
BasicTensor<S> max_pool(const BasicTensor<S> & a, int axis, const BasicTensor<S> & mask = {});

template <class S>
BasicTensor<S> sum(const BasicTensor<S> & a);
template <class S>
BasicTensor<S> mean(const BasicTensor<S> & a);

enum class Reduction { kMean, kSum };

/// Mean absolute error.
template <class S>
BasicTensor<S> l1_loss(const BasicTensor<S> & pred, const BasicTensor<S> & target);
/// Squared error averaged over entries where `mask` (broadcastable to `pred`) is nonzero.
/// A mask that selects nothing gives a constant zero.
template <class S>
BasicTensor<S> masked_mse(
  const BasicTensor<S> & pred, const BasicTensor<S> & target, const BasicTensor<S> & mask);
/// Binary cross-entropy on probabilities clamped to [eps, 1 - eps].
template <class S>
BasicTensor<S> binary_cross_entropy(
  const BasicTensor<S> & prob, const BasicTensor<S> & target, Reduction reduction = Reduction::kMean,
  double eps = 1e-7);

Shape broadcast_shape(const Shape & a, const Shape & b);

}  // namespace scenept::ad
