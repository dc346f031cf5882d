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

#include "scenept/features.hpp"

namespace scenept
{

Scene prepare_scene(const Scene & raw, const PrepareOptions & options)
{
  Scene s = normalize_to_target_frame(raw);
  s.agents = pad_and_mask(s.agents, options.T).agents;
  if (options.prune) {
    s = prune_roads(s, {default_horizon_budget(s, options.F), kRadiusKeep});
  }
  return s;
}

SceneFeatures build_features(const Scene & prepared, int T)
{
  SceneFeatures f;
  f.A = static_cast<int>(prepared.agents.size());
  f.T = T;
  f.S = static_cast<int>(prepared.roads.size());
  f.agents = MatrixRf::Zero(f.A * T, kDh);
  f.agent_mask = MatrixRf::Zero(f.A, T);
  const double ts_now = prepared.agents.at(prepared.target_index).states.at(T - 1).ts;
  for (int a = 0; a < f.A; ++a) {
    const auto & h = prepared.agents[a];
    if (static_cast<int>(h.states.size()) != T) {
      throw HistoryTooLong("build_features: agent " + h.agent_id + " is not padded to T");
    }
    for (int t = 0; t < T; ++t) {
      const auto & s = h.states[t];
      if (!s.valid) continue;
      auto row = f.agents.row(a * T + t);
      row(0) = static_cast<float>(s.x / kCoordScale);
      row(1) = static_cast<float>(s.y / kCoordScale);
      row(2) = static_cast<float>(s.ts - ts_now);
      row(3 + static_cast<int>(h.type)) = 1.0f;
      row(7) = 1.0f;
      f.agent_mask(a, t) = 1.0f;
    }
  }
  f.roads = MatrixRf::Zero(f.S, kDr);
  for (int i = 0; i < f.S; ++i) {
    const auto & r = prepared.roads[i];
    auto row = f.roads.row(i);
    row(0) = static_cast<float>(r.start.x() / kCoordScale);
    row(1) = static_cast<float>(r.start.y() / kCoordScale);
    row(2) = static_cast<float>(r.end.x() / kCoordScale);
    row(3) = static_cast<float>(r.end.y() / kCoordScale);
    row(4) = static_cast<float>(r.length / kCoordScale);
    row(5 + static_cast<int>(r.turn)) = 1.0f;
    row(8) = r.is_intersection ? 1.0f : 0.0f;
  }
  if (prepared.future) {
    MatrixRf fut(static_cast<Eigen::Index>(prepared.future->size()), 2);
    for (std::size_t k = 0; k < prepared.future->size(); ++k) {
      fut(static_cast<Eigen::Index>(k), 0) = static_cast<float>((*prepared.future)[k].x());
      fut(static_cast<Eigen::Index>(k), 1) = static_cast<float>((*prepared.future)[k].y());
    }
    f.future = std::move(fut);
  }
  return f;
}

}  // namespace scenept
