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
#include <random>
#include <string>
#include <vector>

#include "scenept/roadproc.hpp"
#include "scenept/scene.hpp"

namespace scenept
{

enum class MapStyle { kStraight, kCurve, kIntersection, kMerge, kMixed };

MapStyle parse_map_style(const std::string & s);
std::string to_string(MapStyle style);

struct GenConfig
{
  std::uint64_t seed = 0;
  int n_scenes = 2000;
  int A_max = 8;
  int T = 20;
  int F = 30;
  MapStyle map_style = MapStyle::kMixed;  // kMixed draws one of the four per scene
  double speed_lo = 2.0;                  // m/s
  double speed_hi = 15.0;
  double noise_std = 0.02;  // m
  double p_short_history = 0.3;  // per non-target agent
};

/// Throws std::invalid_argument on an inconsistent configuration.
void validate(const GenConfig & cfg);

inline constexpr double kMaxLongAccel = 1.5;  // m/s^2
inline constexpr double kMaxLatAccel = 3.5;   // m/s^2, keeps |a| <= 4 combined
inline constexpr double kMaxLateralOffset = 1.0;

/// Constant-curvature piece: a segment when curvature is 0, an arc otherwise.
struct CurvePiece
{
  Eigen::Vector2d start = Eigen::Vector2d::Zero();
  double heading = 0.0;
  double curvature = 0.0;
  double length = 0.0;

  Eigen::Vector2d point(double s) const;
  double heading_at(double s) const { return heading + curvature * s; }
  Eigen::Vector2d end() const { return point(length); }
};

struct Lane
{
  LanePolyline polyline;
  CurvePiece curve;
};

/// Where the target may be at its last observed frame: arc positions [s_lo, s_hi]
/// measured from the start of `lane`.
struct TargetStart
{
  int lane = 0;
  double s_lo = 0.0;
  double s_hi = 0.0;
};

struct RoadGraph
{
  std::vector<Lane> lanes;
  std::vector<TargetStart> target_starts;

  int find(const std::string & lane_id) const;
};

RoadGraph generate_road_graph(const GenConfig & cfg, MapStyle style, std::mt19937_64 & rng);

std::vector<LanePolyline> polylines(const RoadGraph & graph);

struct GeneratedAgents
{
  std::vector<AgentHistory> agents;  // target first; T states each, invalid prefix for late starters
  std::vector<Eigen::Vector2d> target_future;  // F frames
  std::vector<std::vector<int>> routes;  // lane indices followed by each agent
  std::vector<double> offsets;           // lateral offset per agent
};

GeneratedAgents generate_agents(const RoadGraph & graph, const GenConfig & cfg, std::mt19937_64 & rng);

/// Counter-based sub-seed; scene i depends only on (seed, i).
std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t index);

Scene generate_scene(const GenConfig & cfg, std::uint64_t index);

struct Corpus
{
  std::vector<Scene> train;
  std::vector<Scene> val;
  std::vector<Scene> test;
};

/// 80/10/10 split of scenes 0..n-1 in index order.
Corpus build_corpus(const GenConfig & cfg);

enum SplitMask : unsigned { kTrain = 1u, kVal = 2u, kTest = 4u, kAllSplits = 7u };

/// Drops every future; histories untouched.
std::vector<Scene> strip_labels(const std::vector<Scene> & scenes);
/// Concatenation of the selected splits, label-stripped.
std::vector<Scene> strip_labels(const Corpus & corpus, unsigned splits = kAllSplits);

}  // namespace scenept
