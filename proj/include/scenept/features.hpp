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

#include <Eigen/Core>
#include <optional>

#include "scenept/roadproc.hpp"
#include "scenept/scene.hpp"

namespace scenept
{

// Agent frame features: x, y, ts - ts_now, one-hot type (3), valid.
inline constexpr int kDh = 8;
// Road vector features: sx, sy, ex, ey, length, one-hot turn (3), is_intersection.
inline constexpr int kDr = 9;
// Continuous road fields, the first kRoadContinuous columns.
inline constexpr int kRoadContinuous = 5;
// Continuous agent fields reconstructed by masked trajectory modeling: x, y, ts.
inline constexpr int kAgentContinuous = 3;

/// Positions enter the network divided by this many meters.
inline constexpr double kCoordScale = 10.0;

using MatrixRf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SceneFeatures
{
  int A = 0;
  int T = 0;
  int S = 0;
  MatrixRf agents;      // [A * T, kDh], row a * T + t
  MatrixRf agent_mask;  // [A, T], 1 where valid
  MatrixRf roads;       // [S, kDr]
  std::optional<MatrixRf> future;  // [F, 2], meters in the target frame
};

struct PrepareOptions
{
  int T = 20;
  int F = 30;
  bool prune = true;
};

/// normalize -> pad -> prune, the input contract of the model.
Scene prepare_scene(const Scene & raw, const PrepareOptions & options);

/// Features of a prepared scene.
SceneFeatures build_features(const Scene & prepared, int T);

}  // namespace scenept
