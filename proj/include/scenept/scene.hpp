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
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace scenept
{

inline constexpr double kFrameDt = 0.1;  // 10 Hz

enum class AgentType : std::uint8_t { kVehicle = 0, kPedestrian = 1, kCyclist = 2 };
enum class TurnDirection : std::uint8_t { kNone = 0, kLeft = 1, kRight = 2 };

inline constexpr int kAgentTypeCount = 3;
inline constexpr int kTurnCount = 3;

struct AgentState
{
  double x = 0.0;
  double y = 0.0;
  double ts = 0.0;  // seconds
  bool valid = false;

  bool operator==(const AgentState &) const = default;
};

struct AgentHistory
{
  std::string agent_id;
  AgentType type = AgentType::kVehicle;
  std::vector<AgentState> states;

  bool operator==(const AgentHistory &) const = default;
};

/// Directed centerline piece. `lane_id` identifies this vector; `succ_ids` name the vectors
/// that continue it. Vectors cut from one lane share the lane's id as a prefix ("lane/k").
struct RoadVector
{
  Eigen::Vector2d start = Eigen::Vector2d::Zero();
  Eigen::Vector2d end = Eigen::Vector2d::Zero();
  double length = 0.0;
  TurnDirection turn = TurnDirection::kNone;
  bool is_intersection = false;
  std::string lane_id;
  std::vector<std::string> succ_ids;

  bool operator==(const RoadVector &) const = default;
};

/// One prediction instance. Agent 0 is the target. `future` holds the target's ground
/// truth, absent in label-stripped corpora.
struct Scene
{
  std::string scene_id;
  std::vector<AgentHistory> agents;
  std::vector<RoadVector> roads;
  int target_index = 0;
  std::optional<std::vector<Eigen::Vector2d>> future;

  bool operator==(const Scene &) const = default;
};

class DegenerateTargetHistory : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class HistoryTooLong : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

struct Pose2
{
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  double heading = 0.0;
};

/// Pose of the target at its last valid frame. Heading comes from the most recent
/// displacement longer than 1e-9 m.
Pose2 target_pose(const Scene & scene);

/// Expresses every position (agents, roads, future) in the frame of `pose`.
Scene to_local_frame(const Scene & scene, const Pose2 & pose);

/// Moves the scene so the target's last pose is the origin with zero heading.
Scene normalize_to_target_frame(const Scene & scene);

/// Applies x -> R(theta) x + t to every position.
Scene rigid_transform(const Scene & scene, double theta, const Eigen::Vector2d & t);

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PaddedAgents
{
  std::vector<AgentHistory> agents;
  BoolMatrix mask;  // [A, T]
};

/// Keeps the valid frames of each history and left-pads to `T` with zeroed invalid
/// entries, so the last column is "now" for every agent.
PaddedAgents pad_and_mask(const std::vector<AgentHistory> & agents, int T);

/// Number of valid frames.
int valid_count(const AgentHistory & agent);

}  // namespace scenept
