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
#include <stdexcept>
#include <string>
#include <vector>

#include "scenept/tensor.hpp"

namespace scenept::ad
{

template <class S>
struct BasicNamedTensor
{
  std::string name;
  BasicTensor<S> tensor;
};

/// Ordered registry of trainable tensors. Names are unique; order is registration order.
template <class S>
class BasicParamStore
{
public:
  using Named = BasicNamedTensor<S>;

  BasicTensor<S> create(const std::string & name, Shape shape, const std::function<S()> & init)
  {
    if (find(name) != nullptr) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
    std::vector<S> values(static_cast<std::size_t>(numel(shape)));
    for (auto & v : values) v = init();
    auto t = BasicTensor<S>::from(std::move(shape), std::move(values), true);
    params_.push_back({name, t});
    return t;
  }

  BasicTensor<S> create_constant(const std::string & name, Shape shape, S value)
  {
    return create(name, std::move(shape), [value] { return value; });
  }

  const std::vector<Named> & params() const { return params_; }

  const BasicTensor<S> * find(const std::string & name) const
  {
    for (const auto & p : params_) {
      if (p.name == name) return &p.tensor;
    }
    return nullptr;
  }

  std::int64_t scalar_count() const
  {
    std::int64_t n = 0;
    for (const auto & p : params_) n += p.tensor.numel();
    return n;
  }

  /// Parameters whose name starts with `prefix`.
  std::vector<Named> with_prefix(const std::string & prefix) const
  {
    std::vector<Named> out;
    for (const auto & p : params_) {
      if (p.name.rfind(prefix, 0) == 0) out.push_back(p);
    }
    return out;
  }

  void zero_grad()
  {
    for (auto & p : params_) p.tensor.zero_grad();
  }

private:
  std::vector<Named> params_;
};

using NamedTensor = BasicNamedTensor<float>;
using ParamStore = BasicParamStore<float>;

/// Rescales all gradients so their global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
double clip_grad_norm(const std::vector<NamedTensor> & params, double max_norm);

struct AdamConfig
{
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

class Adam
{
public:
  explicit Adam(std::vector<NamedTensor> params, AdamConfig cfg = {});

  /// One update from the currently accumulated gradients. Parameters without a
  /// gradient are treated as having a zero gradient.
  void step(float lr);

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t step) { step_ = step; }
  const std::vector<NamedTensor> & params() const { return params_; }
  std::vector<float> & first_moment(std::size_t i) { return m_[i]; }
  std::vector<float> & second_moment(std::size_t i) { return v_[i]; }
  const std::vector<float> & first_moment(std::size_t i) const { return m_[i]; }
  const std::vector<float> & second_moment(std::size_t i) const { return v_[i]; }
  const AdamConfig & config() const { return cfg_; }

private:
  std::vector<NamedTensor> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  AdamConfig cfg_;
  std::int64_t step_ = 0;
};

struct LrSchedule
{
  enum class Kind { kConstant, kLinearDecay };

  Kind kind = Kind::kConstant;
  double base = 2e-4;
  std::int64_t total_steps = 1;

  /// Linear decay reaches 0 at `total_steps`.
  double at(std::int64_t step) const;
};

}  // namespace scenept::ad
