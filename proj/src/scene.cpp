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

#include "scenept/scene.hpp"

#include <Eigen/Geometry>
#include <cmath>

namespace scenept
{

namespace
{

Eigen::Vector2d apply(const Eigen::Rotation2Dd & r, const Eigen::Vector2d & t, const Eigen::Vector2d & p)
{
  return r * p + t;
}

template <class Fn>
Scene map_positions(const Scene & scene, Fn fn)
{
  Scene out = scene;
  for (auto & a : out.agents) {
    for (auto & s : a.states) {
      if (!s.valid) continue;
      const Eigen::Vector2d p = fn(Eigen::Vector2d(s.x, s.y));
      s.x = p.x();
      s.y = p.y();
    }
  }
  for (auto & r : out.roads) {
    r.start = fn(r.start);
    r.end = fn(r.end);
  }
  if (out.future) {
    for (auto & p : *out.future) p = fn(p);
  }
  return out;
}

}  // namespace

int valid_count(const AgentHistory & agent)
{
  int n = 0;
  for (const auto & s : agent.states) n += s.valid ? 1 : 0;
  return n;
}

Pose2 target_pose(const Scene & scene)
{
  if (scene.target_index < 0 || scene.target_index >= static_cast<int>(scene.agents.size())) {
    throw DegenerateTargetHistory("scene " + scene.scene_id + ": target index out of range");
  }
  const auto & states = scene.agents[scene.target_index].states;
  std::vector<Eigen::Vector2d> pts;
  for (const auto & s : states) {
    if (s.valid) pts.emplace_back(s.x, s.y);
  }
  if (pts.empty()) {
    throw DegenerateTargetHistory("scene " + scene.scene_id + ": target has no valid frame");
  }
  Pose2 pose;
  pose.origin = pts.back();
  for (auto i = static_cast<std::ptrdiff_t>(pts.size()) - 1; i > 0; --i) {
    const Eigen::Vector2d d = pts[i] - pts[i - 1];
    if (d.norm() > 1e-9) {
      pose.heading = std::atan2(d.y(), d.x());
      return pose;
    }
  }
  throw DegenerateTargetHistory("scene " + scene.scene_id + ": target never moves, heading undefined");
}

Scene to_local_frame(const Scene & scene, const Pose2 & pose)
{
  const Eigen::Rotation2Dd r(-pose.heading);
  const Eigen::Vector2d t = -(r * pose.origin);
  return map_positions(scene, [&](const Eigen::Vector2d & p) { return apply(r, t, p); });
}

Scene normalize_to_target_frame(const Scene & scene)
{
  auto out = to_local_frame(scene, target_pose(scene));
  // pin the target's "now" to exact zeros
  auto & states = out.agents[out.target_index].states;
  for (auto it = states.rbegin(); it != states.rend(); ++it) {
    if (it->valid) {
      it->x = 0.0;
      it->y = 0.0;
      break;
    }
  }
  return out;
}

Scene rigid_transform(const Scene & scene, double theta, const Eigen::Vector2d & t)
{
  const Eigen::Rotation2Dd r(theta);
  return map_positions(scene, [&](const Eigen::Vector2d & p) { return apply(r, t, p); });
}

PaddedAgents pad_and_mask(const std::vector<AgentHistory> & agents, int T)
{
  PaddedAgents out;
  out.mask = BoolMatrix::Constant(static_cast<Eigen::Index>(agents.size()), T, false);
  out.agents.reserve(agents.size());
  for (std::size_t a = 0; a < agents.size(); ++a) {
    std::vector<AgentState> valid;
    for (const auto & s : agents[a].states) {
      if (s.valid) valid.push_back(s);
    }
    if (static_cast<int>(valid.size()) > T) {
      throw HistoryTooLong(
        "agent " + agents[a].agent_id + " has " + std::to_string(valid.size()) +
        " valid frames, more than T = " + std::to_string(T));
    }
    AgentHistory h;
    h.agent_id = agents[a].agent_id;
    h.type = agents[a].type;
    h.states.assign(static_cast<std::size_t>(T) - valid.size(), AgentState{});
    const auto first = static_cast<Eigen::Index>(h.states.size());
    for (Eigen::Index t = first; t < T; ++t) out.mask(static_cast<Eigen::Index>(a), t) = true;
    h.states.insert(h.states.end(), valid.begin(), valid.end());
    out.agents.push_back(std::move(h));
  }
  return out;
}

}  // namespace scenept
