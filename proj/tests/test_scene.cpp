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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "scenept/features.hpp"
#include "scenept/scene.hpp"
#include "scenept/scene_io.hpp"

using namespace scenept;

namespace
{

AgentHistory track(std::vector<Eigen::Vector2d> pts, int T, const std::string & id = "a")
{
  AgentHistory h;
  h.agent_id = id;
  const int first = T - static_cast<int>(pts.size());
  for (int t = 0; t < T; ++t) {
    if (t < first) {
      h.states.push_back({});
    } else {
      const auto & p = pts[t - first];
      h.states.push_back({p.x(), p.y(), t * 0.1, true});
    }
  }
  return h;
}

Scene random_scene(std::mt19937_64 & rng, int T = 6, int n_roads = 5, bool future = true)
{
  std::normal_distribution<double> n(0.0, 20.0);
  std::uniform_int_distribution<int> len(1, T);
  Scene s;
  s.scene_id = "r" + std::to_string(rng() % 100000);
  for (int a = 0; a < 3; ++a) {
    std::vector<Eigen::Vector2d> pts;
    const int m = a == 0 ? T : len(rng);
    for (int k = 0; k < m; ++k) pts.emplace_back(n(rng), n(rng));
    auto h = track(pts, T, "agent" + std::to_string(a));
    h.type = static_cast<AgentType>(a % 3);
    s.agents.push_back(h);
  }
  for (int i = 0; i < n_roads; ++i) {
    RoadVector r;
    r.start = {n(rng), n(rng)};
    r.end = r.start + Eigen::Vector2d(1.5, -2.0);
    r.length = (r.end - r.start).norm();
    r.turn = static_cast<TurnDirection>(i % 3);
    r.is_intersection = i % 2 == 0;
    r.lane_id = "l/" + std::to_string(i);
    if (i + 1 < n_roads) r.succ_ids.push_back("l/" + std::to_string(i + 1));
    s.roads.push_back(r);
  }
  if (future) {
    std::vector<Eigen::Vector2d> f;
    for (int k = 0; k < 4; ++k) f.emplace_back(n(rng), n(rng));
    s.future = f;
  }
  return s;
}

// every position of the scene, flattened in a fixed order
std::vector<double> positions(const Scene & s)
{
  std::vector<double> out;
  for (const auto & a : s.agents)
    for (const auto & st : a.states) {
      out.push_back(st.x);
      out.push_back(st.y);
    }
  for (const auto & r : s.roads) {
    out.insert(out.end(), {r.start.x(), r.start.y(), r.end.x(), r.end.y()});
  }
  if (s.future)
    for (const auto & p : *s.future) out.insert(out.end(), {p.x(), p.y()});
  return out;
}

bool bit_equal(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool bit_equal(const Scene & a, const Scene & b)
{
  if (!(a == b)) return false;
  const auto pa = positions(a);
  const auto pb = positions(b);
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!bit_equal(pa[i], pb[i])) return false;
  for (std::size_t i = 0; i < a.agents.size(); ++i)
    for (std::size_t t = 0; t < a.agents[i].states.size(); ++t)
      if (!bit_equal(a.agents[i].states[t].ts, b.agents[i].states[t].ts)) return false;
  for (std::size_t i = 0; i < a.roads.size(); ++i)
    if (!bit_equal(a.roads[i].length, b.roads[i].length)) return false;
  return true;
}

}  // namespace

TEST_CASE("normalizing a scene already in the target frame is the identity")
{
  Scene s;
  s.agents.push_back(track({{-2.0, 0.0}, {-1.0, 0.0}, {0.0, 0.0}}, 3));
  s.agents.push_back(track({{5.0, 3.0}, {6.0, 4.0}}, 3));
  s.future = std::vector<Eigen::Vector2d>{{1.0, 0.0}, {2.0, 0.1}};
  const auto n = normalize_to_target_frame(s);
  const auto a = positions(s);
  const auto b = positions(n);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9);
}

TEST_CASE("heading follows the last displacement and matches a rotation-matrix oracle")
{
  const auto check = [](Eigen::Vector2d p0, Eigen::Vector2d p1, double expected_heading) {
    Scene s;
    s.agents.push_back(track({p0, p1}, 2));
    s.agents.push_back(track({{7.0, -2.0}}, 2));
    const auto pose = target_pose(s);
    CHECK(pose.heading == doctest::Approx(expected_heading).epsilon(1e-12));
    const auto n = normalize_to_target_frame(s);
    // oracle: explicit 2x2 matrix for -heading
    const double c = std::cos(expected_heading);
    const double sn = std::sin(expected_heading);
    const Eigen::Vector2d d = Eigen::Vector2d(7.0, -2.0) - p1;
    const Eigen::Vector2d expect(c * d.x() + sn * d.y(), -sn * d.x() + c * d.y());
    CHECK(std::abs(n.agents[1].states[1].x - expect.x()) < 1e-9);
    CHECK(std::abs(n.agents[1].states[1].y - expect.y()) < 1e-9);
    CHECK(std::abs(n.agents[0].states[1].x) < 1e-9);
    CHECK(std::abs(n.agents[0].states[1].y) < 1e-9);
  };
  check({4.0, 0.0}, {5.0, 0.0}, 0.0);
  check({0.0, 4.0}, {0.0, 5.0}, std::numbers::pi / 2.0);
}

TEST_CASE("degenerate heading falls back to an older displacement or fails")
{
  Scene s;
  s.agents.push_back(track({{0.0, 0.0}, {0.0, 1.0}, {0.0, 1.0}}, 3));
  CHECK(target_pose(s).heading == doctest::Approx(std::numbers::pi / 2.0));
  Scene still;
  still.agents.push_back(track({{2.0, 2.0}, {2.0, 2.0}}, 2));
  CHECK_THROWS_AS((void)target_pose(still), DegenerateTargetHistory);
}

TEST_CASE("normalization is rigid-motion invariant and idempotent")
{
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const auto s = random_scene(rng);
    const auto base = normalize_to_target_frame(s);
    const auto moved = normalize_to_target_frame(rigid_transform(s, std::numbers::pi / 2.0, {10.0, -3.0}));
    const auto again = normalize_to_target_frame(base);
    const auto a = positions(base);
    const auto b = positions(moved);
    const auto c = positions(again);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(std::abs(a[k] - b[k]) < 1e-6);
      CHECK(std::abs(a[k] - c[k]) < 1e-9);
    }
    const auto & last = base.agents[0].states.back();
    CHECK(last.x == 0.0);
    CHECK(last.y == 0.0);
    CHECK(std::abs(target_pose(base).heading) < 1e-9);
  }
}

TEST_CASE("left padding masks the oldest frames")
{
  AgentHistory h = track({{1, 1}, {2, 2}, {3, 3}}, 3);
  const auto p = pad_and_mask({h}, 5);
  CHECK(p.mask.cols() == 5);
  CHECK(!p.mask(0, 0));
  CHECK(!p.mask(0, 1));
  CHECK(p.mask(0, 2));
  CHECK(p.mask(0, 4));
  CHECK(p.agents[0].states[0] == AgentState{});
  CHECK(p.agents[0].states[4].x == 3.0);

  const auto full = pad_and_mask({track({{1, 0}, {2, 0}}, 2)}, 2);
  CHECK(full.mask.all());
  CHECK(full.agents[0].states[0].x == 1.0);

  CHECK_THROWS_AS((void)pad_and_mask({track({{1, 0}, {2, 0}, {3, 0}}, 3)}, 2), HistoryTooLong);
}

TEST_CASE("mask popcount equals the raw history length")
{
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> len(1, 12);
  std::vector<AgentHistory> raw;
  std::vector<int> lengths;
  for (int i = 0; i < 50; ++i) {
    const int n = len(rng);
    std::vector<Eigen::Vector2d> pts(static_cast<std::size_t>(n), Eigen::Vector2d(1.0, 2.0));
    raw.push_back(track(pts, n));
    lengths.push_back(n);
  }
  const auto p = pad_and_mask(raw, 12);
  for (int i = 0; i < 50; ++i) {
    CHECK(p.mask.row(i).count() == lengths[i]);
    for (int t = 0; t < 12; ++t) {
      if (!p.mask(i, t)) {
        CHECK(p.agents[i].states[t].x == 0.0);
        CHECK(p.agents[i].states[t].ts == 0.0);
      }
    }
  }
}

TEST_CASE("scene files round trip bit-for-bit")
{
  const auto dir = std::filesystem::temp_directory_path() / "scenept_scene_io";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(21);

  auto empty = random_scene(rng, 4, 0, false);
  save_scene(empty, dir / "one.jsonl");
  CHECK(bit_equal(load_scene(dir / "one.jsonl"), empty));

  std::vector<Scene> many;
  for (int i = 0; i < 64; ++i) many.push_back(random_scene(rng, 6, i % 7, i % 2 == 0));
  many[3].agents[0].states[2].x = -0.0;
  many[4].roads[0].start.x() = 1.0 / 3.0;
  save_scenes(dir / "many.jsonl", many);
  const auto back = load_scenes(dir / "many.jsonl");
  REQUIRE(back.size() == many.size());
  for (std::size_t i = 0; i < many.size(); ++i) CHECK(bit_equal(back[i], many[i]));
  std::filesystem::remove_all(dir);
}

TEST_CASE("truncated and malformed records raise a parse error naming the line")
{
  const auto dir = std::filesystem::temp_directory_path() / "scenept_scene_bad";
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(2);
  save_scenes(dir / "s.jsonl", {random_scene(rng), random_scene(rng)});
  std::string text;
  {
    std::ifstream is(dir / "s.jsonl");
    text.assign(std::istreambuf_iterator<char>(is), {});
  }
  {
    std::ofstream os(dir / "s.jsonl", std::ios::trunc);
    os << text.substr(0, text.size() - 40);
  }
  try {
    (void)load_scenes(dir / "s.jsonl");
    FAIL("expected SceneParseError");
  } catch (const SceneParseError & e) {
    CHECK(e.line() == 2);
  }

  auto j = scene_to_json(random_scene(rng));
  j["roads"][0].erase("length");
  {
    std::ofstream os(dir / "m.jsonl", std::ios::trunc);
    os << j.dump() << '\n';
  }
  try {
    (void)load_scenes(dir / "m.jsonl");
    FAIL("expected SceneParseError");
  } catch (const SceneParseError & e) {
    CHECK(e.line() == 1);
    CHECK(e.record() == j["scene_id"].get<std::string>());
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("features follow the agent and road layouts")
{
  Scene s;
  auto h = track({{-2.0, 0.0}, {-1.0, 0.0}, {0.0, 0.0}}, 4);
  h.type = AgentType::kCyclist;
  s.agents.push_back(h);
  RoadVector r;
  r.start = {0.0, -1.0};
  r.end = {3.0, 3.0};
  r.length = 5.0;
  r.turn = TurnDirection::kLeft;
  r.is_intersection = true;
  s.roads.push_back(r);
  const auto f = build_features(s, 4);
  CHECK(f.agents.rows() == 4);
  CHECK(f.agents.row(0).isZero());
  CHECK(f.agent_mask(0, 0) == 0.0f);
  CHECK(f.agents(1, 0) == doctest::Approx(-0.2));
  CHECK(f.agents(1, 2) == doctest::Approx(-0.2));
  CHECK(f.agents(3, 2) == 0.0f);
  CHECK(f.agents(3, 5) == 1.0f);
  CHECK(f.agents(3, 7) == 1.0f);
  CHECK(f.roads(0, 3) == doctest::Approx(0.3));
  CHECK(f.roads(0, 4) == doctest::Approx(0.5));
  CHECK(f.roads(0, 6) == 1.0f);
  CHECK(f.roads(0, 8) == 1.0f);
}
