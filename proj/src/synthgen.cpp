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

#include "scenept/synthgen.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "scenept/rng.hpp"

namespace scenept
{

namespace
{

constexpr double kPi = std::numbers::pi;
constexpr double kLaneWidth = 3.5;

double uniform(std::mt19937_64 & rng, double lo, double hi)
{
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64 & rng, int lo, int hi)
{
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Lane make_lane(
  std::string id, const CurvePiece & c, std::vector<std::string> succ = {},
  TurnDirection turn = TurnDirection::kNone, bool intersection = false)
{
  Lane lane;
  lane.curve = c;
  lane.polyline.lane_id = std::move(id);
  lane.polyline.turn = turn;
  lane.polyline.is_intersection = intersection;
  lane.polyline.succ_ids = std::move(succ);
  const int n = c.curvature == 0.0 ? 1 : std::max(1, static_cast<int>(std::ceil(c.length / kMaxVectorLength)));
  for (int i = 0; i <= n; ++i) {
    lane.polyline.points.push_back(c.point(c.length * static_cast<double>(i) / n));
  }
  return lane;
}

CurvePiece line_from(const Eigen::Vector2d & p, double heading, double length)
{
  return {p, heading, 0.0, length};
}

// Piece that ends at pose (p, heading).
CurvePiece piece_ending_at(const Eigen::Vector2d & p, double heading, double curvature, double length)
{
  const CurvePiece back{p, heading, curvature, 0.0};
  return {back.point(-length), heading - curvature * length, curvature, length};
}

CurvePiece rotated(const CurvePiece & c, double angle)
{
  CurvePiece out = c;
  out.start = Eigen::Rotation2Dd(angle) * c.start;
  out.heading += angle;
  return out;
}

RoadGraph rotated(RoadGraph g, double angle)
{
  for (auto & lane : g.lanes) {
    lane.curve = rotated(lane.curve, angle);
    for (auto & p : lane.polyline.points) p = Eigen::Rotation2Dd(angle) * p;
  }
  return g;
}

// minimum radius a route may have so that v_hi stays within the lateral limit
double min_radius(const GenConfig & cfg) { return cfg.speed_hi * cfg.speed_hi / kMaxLatAccel; }

RoadGraph straight_graph()
{
  RoadGraph g;
  g.lanes.push_back(make_lane("lane0", line_from({-150.0, 0.0}, 0.0, 300.0)));
  g.target_starts.push_back({0, 140.0, 160.0});
  return g;
}

RoadGraph curve_graph(const GenConfig & cfg, std::mt19937_64 & rng)
{
  const double sign = std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
  const double r_lo = std::max(25.0, min_radius(cfg) + 2.0) + kLaneWidth;
  const double r0 = uniform(rng, r_lo, std::max(150.0, r_lo + 50.0));
  const double angle = uniform(rng, 30.0, 100.0) * kPi / 180.0;
  RoadGraph g;
  for (int k = 0; k < 2; ++k) {
    const std::string s = std::to_string(k);
    const Eigen::Vector2d left(0.0, kLaneWidth * k);
    const double r = sign > 0 ? r0 - kLaneWidth * k : r0 + kLaneWidth * k;
    const auto a = line_from(Eigen::Vector2d(-100.0, 0.0) + left, 0.0, 100.0);
    const CurvePiece b{a.end(), 0.0, sign / r, r * angle};
    const auto c = line_from(b.end(), b.heading_at(b.length), 120.0);
    g.lanes.push_back(make_lane("a" + s, a, {"b" + s}));
    g.lanes.push_back(make_lane("b" + s, b, {"c" + s}, sign > 0 ? TurnDirection::kLeft : TurnDirection::kRight));
    g.lanes.push_back(make_lane("c" + s, c));
  }
  g.target_starts.push_back({0, 60.0, 110.0});
  g.target_starts.push_back({3, 60.0, 110.0});
  return g;
}

RoadGraph intersection_graph()
{
  constexpr double c = 15.0;
  constexpr double w = kLaneWidth / 2.0;
  constexpr double arm = 80.0;
  RoadGraph g;
  // arm a sits at rotation a * 90 degrees from the west arm; straight leads to arm a+2,
  // left to arm a+3, right to arm a+1
  for (int a = 0; a < 4; ++a) {
    const double rot = a * kPi / 2.0;
    const std::string s = std::to_string(a);
    const auto in = rotated(line_from({-c - arm, -w}, 0.0, arm), rot);
    const auto out = rotated(line_from({-c, w}, kPi, arm), rot);
    const auto straight = rotated(line_from({-c, -w}, 0.0, 2.0 * c), rot);
    const auto left = rotated(CurvePiece{{-c, -w}, 0.0, 1.0 / (c + w), (c + w) * kPi / 2.0}, rot);
    const auto right = rotated(CurvePiece{{-c, -w}, 0.0, -1.0 / (c - w), (c - w) * kPi / 2.0}, rot);
    g.lanes.push_back(make_lane("in" + s, in, {"st" + s, "lt" + s, "rt" + s}));
    g.lanes.push_back(make_lane("out" + s, out));
    g.lanes.push_back(
      make_lane("st" + s, straight, {"out" + std::to_string((a + 2) % 4)}, TurnDirection::kNone, true));
    g.lanes.push_back(
      make_lane("lt" + s, left, {"out" + std::to_string((a + 3) % 4)}, TurnDirection::kLeft, true));
    g.lanes.push_back(
      make_lane("rt" + s, right, {"out" + std::to_string((a + 1) % 4)}, TurnDirection::kRight, true));
    g.target_starts.push_back({a * 5, 50.0, 77.0});
  }
  return g;
}

RoadGraph merge_graph(const GenConfig & cfg, std::mt19937_64 & rng)
{
  const double r_lo = std::max(40.0, min_radius(cfg) + 2.0);
  const double r = uniform(rng, r_lo, std::max(200.0, r_lo + 50.0));
  const double angle = uniform(rng, 8.0, 20.0) * kPi / 180.0;
  RoadGraph g;
  for (int k = 0; k < 2; ++k) {
    const std::string s = std::to_string(k);
    const Eigen::Vector2d left(0.0, kLaneWidth * k);
    g.lanes.push_back(make_lane("m" + s, line_from(Eigen::Vector2d(-100.0, 0.0) + left, 0.0, 100.0), {"d" + s}));
    g.lanes.push_back(make_lane("d" + s, line_from(left, 0.0, 150.0)));
  }
  const auto ra = piece_ending_at({0.0, 0.0}, 0.0, -1.0 / r, r * angle);
  const auto rs = piece_ending_at(ra.start, ra.heading, 0.0, 80.0);
  g.lanes.push_back(make_lane("rs", rs, {"ra"}));
  g.lanes.push_back(make_lane("ra", ra, {"d0"}, TurnDirection::kRight));
  g.target_starts.push_back({0, 70.0, 100.0});
  g.target_starts.push_back({4, 60.0, 80.0 + ra.length});
  return g;
}

// Route along consecutive lanes with the agent's lateral offset applied. Arc position
// sigma is measured along the offset curve, so speed is the agent's own speed.
struct Route
{
  std::vector<int> lanes;
  std::vector<double> cum;  // offset-curve length at the start of each lane
  double offset = 0.0;
  double max_curvature = 0.0;  // of the offset curve

  double length() const { return cum.back(); }
};

void push_lane(Route & route, const RoadGraph & g, int lane)
{
  const auto & c = g.lanes[lane].curve;
  const double stretch = 1.0 - c.curvature * route.offset;
  if (route.cum.empty()) route.cum.push_back(0.0);
  route.lanes.push_back(lane);
  route.cum.push_back(route.cum.back() + c.length * stretch);
  route.max_curvature = std::max(route.max_curvature, std::abs(c.curvature / stretch));
}

Eigen::Vector2d route_point(const Route & route, const RoadGraph & g, double sigma)
{
  std::size_t i = 0;
  while (i + 1 < route.lanes.size() && sigma >= route.cum[i + 1]) ++i;
  const auto & c = g.lanes[route.lanes[i]].curve;
  const double s = (sigma - route.cum[i]) / (1.0 - c.curvature * route.offset);
  const double h = c.heading_at(s);
  return c.point(s) + route.offset * Eigen::Vector2d(-std::sin(h), std::cos(h));
}

// Extends a route with random successors whose curvature the slowest allowed speed can take.
bool extend_route(Route & route, const RoadGraph & g, double needed, double v_lo, std::mt19937_64 & rng)
{
  while (route.length() < needed) {
    const auto & succ = g.lanes[route.lanes.back()].polyline.succ_ids;
    std::vector<int> ok;
    for (const auto & id : succ) {
      const int j = g.find(id);
      if (j < 0) continue;
      const auto & c = g.lanes[j].curve;
      const double k = std::abs(c.curvature / (1.0 - c.curvature * route.offset));
      if (v_lo * v_lo * k <= kMaxLatAccel) ok.push_back(j);
    }
    if (ok.empty()) return false;
    push_lane(route, g, ok[std::uniform_int_distribution<std::size_t>(0, ok.size() - 1)(rng)]);
  }
  return true;
}

// Arc positions for frames 0..n-1 with piecewise-constant acceleration redrawn every
// second and speed kept in [v_lo, v_hi].
std::vector<double> speed_profile(int n, double v_lo, double v_hi, std::mt19937_64 & rng)
{
  std::vector<double> sigma(static_cast<std::size_t>(n), 0.0);
  double v = v_lo == v_hi ? v_lo : uniform(rng, v_lo, v_hi);
  double a = 0.0;
  for (int k = 1; k < n; ++k) {
    if ((k - 1) % 10 == 0) a = v_lo == v_hi ? 0.0 : uniform(rng, -kMaxLongAccel, kMaxLongAccel);
    const double v_next = std::clamp(v + a * kFrameDt, v_lo, v_hi);
    sigma[k] = sigma[k - 1] + 0.5 * (v + v_next) * kFrameDt;
    v = v_next;
  }
  return sigma;
}

}  // namespace

MapStyle parse_map_style(const std::string & s)
{
  if (s == "straight") return MapStyle::kStraight;
  if (s == "curve") return MapStyle::kCurve;
  if (s == "intersection") return MapStyle::kIntersection;
  if (s == "merge") return MapStyle::kMerge;
  if (s == "mixed") return MapStyle::kMixed;
  throw std::invalid_argument("unknown map style '" + s + "'");
}

std::string to_string(MapStyle style)
{
  switch (style) {
    case MapStyle::kStraight: return "straight";
    case MapStyle::kCurve: return "curve";
    case MapStyle::kIntersection: return "intersection";
    case MapStyle::kMerge: return "merge";
    case MapStyle::kMixed: return "mixed";
  }
  return "?";
}

void validate(const GenConfig & cfg)
{
  if (cfg.T < 2) throw std::invalid_argument("T must be >= 2");
  if (cfg.F < 1) throw std::invalid_argument("F must be >= 1");
  if (cfg.A_max < 1) throw std::invalid_argument("A_max must be >= 1");
  if (cfg.n_scenes < 0) throw std::invalid_argument("n_scenes must be >= 0");
  if (!(cfg.noise_std >= 0.0)) throw std::invalid_argument("noise_std must be >= 0");
  if (!(cfg.speed_lo > 0.0) || cfg.speed_hi < cfg.speed_lo) {
    throw std::invalid_argument("speed range must satisfy 0 < lo <= hi");
  }
  if (cfg.p_short_history < 0.0 || cfg.p_short_history > 1.0) {
    throw std::invalid_argument("p_short_history must lie in [0, 1]");
  }
}

Eigen::Vector2d CurvePiece::point(double s) const
{
  if (curvature == 0.0) {
    return start + s * Eigen::Vector2d(std::cos(heading), std::sin(heading));
  }
  const double h = heading + curvature * s;
  return start + Eigen::Vector2d(std::sin(h) - std::sin(heading), std::cos(heading) - std::cos(h)) / curvature;
}

int RoadGraph::find(const std::string & lane_id) const
{
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    if (lanes[i].polyline.lane_id == lane_id) return static_cast<int>(i);
  }
  return -1;
}

RoadGraph generate_road_graph(const GenConfig & cfg, MapStyle style, std::mt19937_64 & rng)
{
  validate(cfg);
  if (style == MapStyle::kMixed) {
    style = static_cast<MapStyle>(uniform_int(rng, 0, 3));
  }
  switch (style) {
    case MapStyle::kStraight: return straight_graph();
    case MapStyle::kCurve: return rotated(curve_graph(cfg, rng), uniform(rng, -kPi, kPi));
    case MapStyle::kIntersection: return rotated(intersection_graph(), uniform(rng, -kPi, kPi));
    case MapStyle::kMerge: return rotated(merge_graph(cfg, rng), uniform(rng, -kPi, kPi));
    case MapStyle::kMixed: break;
  }
  throw std::logic_error("unreachable map style");
}

std::vector<LanePolyline> polylines(const RoadGraph & graph)
{
  std::vector<LanePolyline> out;
  out.reserve(graph.lanes.size());
  for (const auto & lane : graph.lanes) out.push_back(lane.polyline);
  return out;
}

GeneratedAgents generate_agents(const RoadGraph & graph, const GenConfig & cfg, std::mt19937_64 & rng)
{
  validate(cfg);
  if (graph.lanes.empty()) throw std::invalid_argument("generate_agents: empty road graph");
  const int T = cfg.T;
  const int n_frames = cfg.T + cfg.F;
  std::normal_distribution<double> noise(0.0, 1.0);
  GeneratedAgents out;

  const auto emit = [&](const Route & route, const std::vector<double> & sigma, double sigma0, int first,
                        AgentType type, const std::string & id) {
    AgentHistory h;
    h.agent_id = id;
    h.type = type;
    h.states.assign(static_cast<std::size_t>(T), AgentState{});
    for (int t = first; t < T; ++t) {
      Eigen::Vector2d p = route_point(route, graph, sigma0 + sigma[t - first]);
      if (cfg.noise_std > 0.0) p += cfg.noise_std * Eigen::Vector2d(noise(rng), noise(rng));
      h.states[t] = {p.x(), p.y(), t * kFrameDt, true};
    }
    out.agents.push_back(std::move(h));
    out.routes.push_back(route.lanes);
    out.offsets.push_back(route.offset);
  };

  // target: full history and future, last observed frame inside a target start window
  const double horizon = cfg.speed_hi * (n_frames - 1) * kFrameDt;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 100) throw std::runtime_error("generate_agents: no feasible target route");
    const auto & ts = graph.target_starts.empty() ? TargetStart{0, 0.0, graph.lanes[0].curve.length}
                                                  : graph.target_starts[std::uniform_int_distribution<std::size_t>(
                                                      0, graph.target_starts.size() - 1)(rng)];
    Route route;
    route.offset = uniform(rng, -0.3, 0.3);
    push_lane(route, graph, ts.lane);
    const double s_now = uniform(rng, ts.s_lo, ts.s_hi);
    if (!extend_route(route, graph, s_now + horizon, cfg.speed_lo, rng)) continue;
    const double v_cap = std::min(cfg.speed_hi, std::sqrt(kMaxLatAccel / std::max(route.max_curvature, 1e-12)));
    if (v_cap < cfg.speed_lo) continue;
    const auto sigma = speed_profile(n_frames, cfg.speed_lo, v_cap, rng);
    const double sigma0 = s_now - sigma[T - 1];
    if (sigma0 < 0.0 || sigma0 + sigma.back() > route.length()) continue;
    emit(route, sigma, sigma0, 0, AgentType::kVehicle, "target");
    for (int t = T; t < n_frames; ++t) {
      Eigen::Vector2d p = route_point(route, graph, sigma0 + sigma[t]);
      if (cfg.noise_std > 0.0) p += cfg.noise_std * Eigen::Vector2d(noise(rng), noise(rng));
      out.target_future.push_back(p);
    }
    break;
  }

  const int n_agents = uniform_int(rng, std::max(1, cfg.A_max - 4), cfg.A_max);
  std::bernoulli_distribution short_history(cfg.p_short_history);
  std::bernoulli_distribution cyclist(0.15);
  for (int a = 1; a < n_agents; ++a) {
    const int first = short_history(rng) ? uniform_int(rng, 1, std::max(1, T - 2)) : 0;
    const int frames = T - first;
    const auto type = cyclist(rng) ? AgentType::kCyclist : AgentType::kVehicle;
    const double v_hi = type == AgentType::kCyclist ? std::min(cfg.speed_hi, std::max(cfg.speed_lo, 7.0)) : cfg.speed_hi;
    for (int attempt = 0; attempt < 20; ++attempt) {
      Route route;
      route.offset = uniform(rng, -kMaxLateralOffset, kMaxLateralOffset);
      const int lane = uniform_int(rng, 0, static_cast<int>(graph.lanes.size()) - 1);
      push_lane(route, graph, lane);
      if (route.max_curvature * cfg.speed_lo * cfg.speed_lo > kMaxLatAccel) continue;
      const double sigma0 = uniform(rng, 0.0, route.length());
      if (!extend_route(route, graph, sigma0 + v_hi * frames * kFrameDt, cfg.speed_lo, rng)) continue;
      const double v_cap = std::min(v_hi, std::sqrt(kMaxLatAccel / std::max(route.max_curvature, 1e-12)));
      if (v_cap < cfg.speed_lo) continue;
      const auto sigma = speed_profile(frames, cfg.speed_lo, v_cap, rng);
      emit(route, sigma, sigma0, first, type, "agent" + std::to_string(a));
      break;
    }
  }
  return out;
}

std::uint64_t scene_seed(std::uint64_t seed, std::uint64_t index)
{
  return derive_seed(seed, {index});
}

Scene generate_scene(const GenConfig & cfg, std::uint64_t index)
{
  std::mt19937_64 rng(scene_seed(cfg.seed, index));
  const auto graph = generate_road_graph(cfg, cfg.map_style, rng);
  auto agents = generate_agents(graph, cfg, rng);
  Scene s;
  char id[32];
  std::snprintf(id, sizeof(id), "scene_%06llu", static_cast<unsigned long long>(index));
  s.scene_id = id;
  s.agents = std::move(agents.agents);
  s.roads = segment_centerlines(polylines(graph)).vectors;
  s.target_index = 0;
  s.future = std::move(agents.target_future);
  return s;
}

Corpus build_corpus(const GenConfig & cfg)
{
  validate(cfg);
  const int n = cfg.n_scenes;
  const int n_train = static_cast<int>(std::lround(n * 0.8));
  const int n_val = static_cast<int>(std::lround(n * 0.1));
  Corpus c;
  for (int i = 0; i < n; ++i) {
    auto s = generate_scene(cfg, static_cast<std::uint64_t>(i));
    if (i < n_train) {
      c.train.push_back(std::move(s));
    } else if (i < n_train + n_val) {
      c.val.push_back(std::move(s));
    } else {
      c.test.push_back(std::move(s));
    }
  }
  return c;
}

std::vector<Scene> strip_labels(const std::vector<Scene> & scenes)
{
  std::vector<Scene> out = scenes;
  for (auto & s : out) s.future.reset();
  return out;
}

std::vector<Scene> strip_labels(const Corpus & corpus, unsigned splits)
{
  std::vector<Scene> all;
  if (splits & kTrain) all.insert(all.end(), corpus.train.begin(), corpus.train.end());
  if (splits & kVal) all.insert(all.end(), corpus.val.begin(), corpus.val.end());
  if (splits & kTest) all.insert(all.end(), corpus.test.begin(), corpus.test.end());
  return strip_labels(all);
}

}  // namespace scenept
