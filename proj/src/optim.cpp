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

#include "scenept/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scenept::ad
{

double clip_grad_norm(const std::vector<NamedTensor> & params, double max_norm)
{
  double sq = 0.0;
  for (const auto & p : params) {
    if (!p.tensor.has_grad()) continue;
    for (auto g : p.tensor.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const auto scale = static_cast<float>(max_norm / norm);
    for (const auto & p : params) {
      auto t = p.tensor;
      if (!t.has_grad()) continue;
      for (auto & g : t.mutable_grad()) g *= scale;
    }
  }
  return norm;
}

Adam::Adam(std::vector<NamedTensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg)
{
  for (const auto & p : params_) {
    m_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0f);
    v_.emplace_back(static_cast<std::size_t>(p.tensor.numel()), 0.0f);
  }
}

void Adam::step(float lr)
{
  ++step_;
  const double bc1 = 1.0 - std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(step_));
  const auto step_size = static_cast<float>(lr / bc1);
  const auto inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto t = params_[i].tensor;
    auto & m = m_[i];
    auto & v = v_[i];
    auto w = t.mutable_values();
    const bool has = t.has_grad();
    const auto g = has ? t.grad() : std::span<const float>{};
    for (std::size_t k = 0; k < m.size(); ++k) {
      const float gk = has ? g[k] : 0.0f;
      m[k] = cfg_.beta1 * m[k] + (1.0f - cfg_.beta1) * gk;
      v[k] = cfg_.beta2 * v[k] + (1.0f - cfg_.beta2) * gk * gk;
      if (lr != 0.0f) {
        w[k] -= step_size * m[k] / (std::sqrt(v[k]) * inv_sqrt_bc2 + cfg_.eps);
      }
    }
  }
}

double LrSchedule::at(std::int64_t step) const
{
  if (kind == Kind::kConstant) {
    return base;
  }
  const double frac = static_cast<double>(step) / static_cast<double>(std::max<std::int64_t>(total_steps, 1));
  return base * std::max(0.0, 1.0 - frac);
}

}  // namespace scenept::ad
