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

#include "scenept/scene_io.hpp"

#include <array>
#include <fstream>

namespace scenept
{

using nlohmann::json;

namespace
{

const std::array<const char *, kAgentTypeCount> kTypeNames = {"vehicle", "pedestrian", "cyclist"};
const std::array<const char *, kTurnCount> kTurnNames = {"none", "left", "right"};

template <std::size_t N>
std::uint8_t lookup(const std::array<const char *, N> & names, const std::string & s, const char * what)
{
  for (std::size_t i = 0; i < N; ++i) {
    if (s == names[i]) return static_cast<std::uint8_t>(i);
  }
  throw std::invalid_argument(std::string("unknown ") + what + " '" + s + "'");
}

json point(const Eigen::Vector2d & p) { return json::array({p.x(), p.y()}); }

Eigen::Vector2d point_from(const json & j)
{
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("point must be [x, y]");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

}  // namespace

SceneParseError::SceneParseError(std::size_t line, std::string record, const std::string & what)
: std::runtime_error(
    "scene parse error at line " + std::to_string(line) +
    (record.empty() ? std::string() : " (scene " + record + ")") + ": " + what),
  line_(line),
  record_(std::move(record))
{
}

json scene_to_json(const Scene & scene)
{
  json agents = json::array();
  for (const auto & a : scene.agents) {
    json states = json::array();
    for (const auto & s : a.states) states.push_back(json::array({s.x, s.y, s.ts, s.valid}));
    agents.push_back(
      {{"agent_id", a.agent_id}, {"type", kTypeNames[static_cast<int>(a.type)]}, {"states", states}});
  }
  json roads = json::array();
  for (const auto & r : scene.roads) {
    roads.push_back(
      {{"lane_id", r.lane_id},
       {"start", point(r.start)},
       {"end", point(r.end)},
       {"length", r.length},
       {"turn", kTurnNames[static_cast<int>(r.turn)]},
       {"intersection", r.is_intersection},
       {"succ_ids", r.succ_ids}});
  }
  json future = nullptr;
  if (scene.future) {
    future = json::array();
    for (const auto & p : *scene.future) future.push_back(point(p));
  }
  return {
    {"version", kSceneFormatVersion},
    {"scene_id", scene.scene_id},
    {"agents", agents},
    {"roads", roads},
    {"target_index", scene.target_index},
    {"future", future}};
}

Scene scene_from_json(const json & j)
{
  if (j.at("version").get<int>() != kSceneFormatVersion) {
    throw std::invalid_argument("unsupported version " + j.at("version").dump());
  }
  Scene s;
  s.scene_id = j.at("scene_id").get<std::string>();
  for (const auto & ja : j.at("agents")) {
    AgentHistory a;
    a.agent_id = ja.at("agent_id").get<std::string>();
    a.type = static_cast<AgentType>(lookup(kTypeNames, ja.at("type").get<std::string>(), "agent type"));
    for (const auto & js : ja.at("states")) {
      if (!js.is_array() || js.size() != 4) throw std::invalid_argument("state must be [x, y, ts, valid]");
      a.states.push_back({js.at(0).get<double>(), js.at(1).get<double>(), js.at(2).get<double>(), js.at(3).get<bool>()});
    }
    s.agents.push_back(std::move(a));
  }
  for (const auto & jr : j.at("roads")) {
    RoadVector r;
    r.lane_id = jr.at("lane_id").get<std::string>();
    r.start = point_from(jr.at("start"));
    r.end = point_from(jr.at("end"));
    r.length = jr.at("length").get<double>();
    r.turn = static_cast<TurnDirection>(lookup(kTurnNames, jr.at("turn").get<std::string>(), "turn"));
    r.is_intersection = jr.at("intersection").get<bool>();
    r.succ_ids = jr.at("succ_ids").get<std::vector<std::string>>();
    s.roads.push_back(std::move(r));
  }
  s.target_index = j.at("target_index").get<int>();
  const auto & jf = j.at("future");
  if (!jf.is_null()) {
    std::vector<Eigen::Vector2d> f;
    for (const auto & p : jf) f.push_back(point_from(p));
    s.future = std::move(f);
  }
  return s;
}

void save_scenes(const std::filesystem::path & path, const std::vector<Scene> & scenes)
{
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto & s : scenes) os << scene_to_json(s).dump() << '\n';
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

std::vector<Scene> load_scenes(const std::filesystem::path & path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open scene file " + path.string());
  std::vector<Scene> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception & e) {
      throw SceneParseError(n, "", e.what());
    }
    std::string id;
    if (j.is_object() && j.contains("scene_id") && j["scene_id"].is_string()) id = j["scene_id"].get<std::string>();
    try {
      out.push_back(scene_from_json(j));
    } catch (const std::exception & e) {
      throw SceneParseError(n, id, e.what());
    }
  }
  return out;
}

void save_scene(const Scene & scene, const std::filesystem::path & path) { save_scenes(path, {scene}); }

Scene load_scene(const std::filesystem::path & path)
{
  auto v = load_scenes(path);
  if (v.size() != 1) {
    throw SceneParseError(v.size() + 1, "", "expected exactly one scene in " + path.string());
  }
  return std::move(v.front());
}

}  // namespace scenept
