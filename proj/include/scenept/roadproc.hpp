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
#include <string>
#include <vector>

#include "scenept/scene.hpp"

namespace scenept
{

inline constexpr double kMaxVectorLength = 5.0;
inline constexpr double kRadiusKeep = 30.0;

/// Lane centerline in travel order.
struct LanePolyline
{
  std::string lane_id;
  std::vector<Eigen::Vector2d> points;
  TurnDirection turn = TurnDirection::kNone;
  bool is_intersection = false;
  std::vector<std::string> succ_ids;  // successor lanes
};

double arc_length(const std::vector<Eigen::Vector2d> & points);

struct Segmentation
{
  std::vector<RoadVector> vectors;
  int skipped_edges = 0;  // zero-length edges dropped
};

/// Cuts each lane of arc length L at ceil(L / 5) equally spaced arc positions. Vectors
/// are the pieces between consecutive vertices and cut points, so lengths add up to L.
/// Vector k of lane "a" is named "a/k"; the last one links to "b/0" for each successor b.
Segmentation segment_centerlines(const std::vector<LanePolyline> & lanes);

/// Distance from `p` to the segment of `v`.
double distance_to_vector(const RoadVector & v, const Eigen::Vector2d & p);

/// Index of the vector closest to `p`, lowest index on ties; -1 when `roads` is empty.
int nearest_vector(const std::vector<RoadVector> & roads, const Eigen::Vector2d & p);

/// Accumulated successor-path length to reach each vector from `seed`: dist(seed) = 0 and
/// dist(v) = dist(u) + length(u) along a link u -> v. Unreachable vectors get +inf.
std::vector<double> successor_distances(const std::vector<RoadVector> & roads, int seed);

struct PruneOptions
{
  double horizon_budget = 0.0;
  double radius_keep = kRadiusKeep;
};

/// Keeps, in input order, the vector nearest the target's last position, every vector
/// within `horizon_budget` of it along successor links, and every vector within
/// `radius_keep` of some agent's last valid position. Expects a normalized scene.
Scene prune_roads(const Scene & scene, const PruneOptions & options);

/// max observed target speed * horizon * 1.5 + 20 m.
double default_horizon_budget(const Scene & scene, int future_frames);

}  // namespace scenept
