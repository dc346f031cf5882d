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

#include "scenept/roadproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>

namespace scenept
{

double arc_length(const std::vector<Eigen::Vector2d> & points)
{
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += (points[i] - points[i - 1]).norm();
  return total;
}

Segmentation segment_centerlines(const std::vector<LanePolyline> & lanes)
{
  constexpr double kSnap = 1e-9;
  Segmentation out;
  for (const auto & lane : lanes) {
    std::vector<Eigen::Vector2d> pts;
    for (const auto & p : lane.points) {
      if (!pts.empty() && (p - pts.back()).norm() <= 0.0) {
        ++out.skipped_edges;
        continue;
      }
      pts.push_back(p);
    }
    if (pts.size() < 2) continue;

    std::vector<double> cum(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
    const double L = cum.back();
    const auto n = std::max<long>(1, static_cast<long>(std::ceil(L / kMaxVectorLength - 1e-12)));

    // breakpoints: every vertex plus the interior cut positions that do not land on one
    std::vector<Eigen::Vector2d> bp;
    bp.push_back(pts.front());
    std::size_t edge = 1;
    for (long k = 1; k <= n; ++k) {
      const double s = k == n ? L : L * static_cast<double>(k) / static_cast<double>(n);
      while (edge < pts.size() && cum[edge] < s - kSnap) {
        bp.push_back(pts[edge]);
        ++edge;
      }
      if (k == n) break;
      if (edge < pts.size() && std::abs(cum[edge] - s) <= kSnap) {
        continue;  // vertex already there
      }
      const double u = (s - cum[edge - 1]) / (cum[edge] - cum[edge - 1]);
      bp.push_back(pts[edge - 1] + u * (pts[edge] - pts[edge - 1]));
    }
    for (; edge < pts.size(); ++edge) bp.push_back(pts[edge]);

    const auto first = out.vectors.size();
    for (std::size_t i = 1; i < bp.size(); ++i) {
      RoadVector v;
      v.start = bp[i - 1];
      v.end = bp[i];
      v.length = (v.end - v.start).norm();
      v.turn = lane.turn;
      v.is_intersection = lane.is_intersection;
      v.lane_id = lane.lane_id + "/" + std::to_string(i - 1);
      out.vectors.push_back(std::move(v));
    }
    for (auto i = first; i + 1 < out.vectors.size(); ++i) {
      out.vectors[i].succ_ids.push_back(out.vectors[i + 1].lane_id);
    }
    for (const auto & s : lane.succ_ids) out.vectors.back().succ_ids.push_back(s + "/0");
  }
  return out;
}

double distance_to_vector(const RoadVector & v, const Eigen::Vector2d & p)
{
  const Eigen::Vector2d d = v.end - v.start;
  const double len2 = d.squaredNorm();
  const double u = len2 > 0.0 ? std::clamp((p - v.start).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (v.start + u * d - p).norm();
}

int nearest_vector(const std::vector<RoadVector> & roads, const Eigen::Vector2d & p)
{
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < roads.size(); ++i) {
    const double d = distance_to_vector(roads[i], p);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<double> successor_distances(const std::vector<RoadVector> & roads, int seed)
{
  std::vector<double> dist(roads.size(), std::numeric_limits<double>::infinity());
  if (seed < 0) return dist;
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < roads.size(); ++i) index.emplace(roads[i].lane_id, static_cast<int>(i));

  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  dist[seed] = 0.0;
  open.emplace(0.0, seed);
  while (!open.empty()) {
    const auto [d, u] = open.top();
    open.pop();
    if (d > dist[u]) continue;
    for (const auto & s : roads[u].succ_ids) {
      const auto it = index.find(s);
      if (it == index.end()) continue;
      const double nd = d + roads[u].length;
      if (nd < dist[it->second]) {
        dist[it->second] = nd;
        open.emplace(nd, it->second);
      }
    }
  }
  return dist;
}

Scene prune_roads(const Scene & scene, const PruneOptions & options)
{
  Scene out = scene;
  out.roads.clear();
  if (scene.roads.empty()) return out;

  std::vector<Eigen::Vector2d> last;
  for (const auto & a : scene.agents) {
    for (auto it = a.states.rbegin(); it != a.states.rend(); ++it) {
      if (it->valid) {
        last.emplace_back(it->x, it->y);
        break;
      }
    }
  }
  const Eigen::Vector2d target_now =
    scene.target_index < static_cast<int>(last.size()) ? last[scene.target_index] : Eigen::Vector2d::Zero();
  const int seed = nearest_vector(scene.roads, target_now);
  const auto dist = successor_distances(scene.roads, seed);
  for (std::size_t i = 0; i < scene.roads.size(); ++i) {
    bool keep = dist[i] <= options.horizon_budget;
    for (std::size_t a = 0; !keep && a < last.size(); ++a) {
      keep = distance_to_vector(scene.roads[i], last[a]) <= options.radius_keep;
    }
    if (keep) out.roads.push_back(scene.roads[i]);
  }
  return out;
}

double default_horizon_budget(const Scene & scene, int future_frames)
{
  double vmax = 0.0;
  const auto & states = scene.agents.at(scene.target_index).states;
  const AgentState * prev = nullptr;
  for (const auto & s : states) {
    if (!s.valid) continue;
    if (prev != nullptr && s.ts > prev->ts) {
      vmax = std::max(vmax, std::hypot(s.x - prev->x, s.y - prev->y) / (s.ts - prev->ts));
    }
    prev = &s;
  }
  return vmax * future_frames * kFrameDt * 1.5 + 20.0;
}

}  // namespace scenept
