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

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenept/scene.hpp"

namespace scenept
{

inline constexpr int kSceneFormatVersion = 1;

/// Malformed scene record. `line` is 1-based; `record` is the scene id when it could be read.
class SceneParseError : public std::runtime_error
{
public:
  SceneParseError(std::size_t line, std::string record, const std::string & what);

  std::size_t line() const { return line_; }
  const std::string & record() const { return record_; }

private:
  std::size_t line_;
  std::string record_;
};

nlohmann::json scene_to_json(const Scene & scene);
Scene scene_from_json(const nlohmann::json & j);

/// One JSON object per line. Doubles are written with round-trip precision.
void save_scenes(const std::filesystem::path & path, const std::vector<Scene> & scenes);
std::vector<Scene> load_scenes(const std::filesystem::path & path);

void save_scene(const Scene & scene, const std::filesystem::path & path);
Scene load_scene(const std::filesystem::path & path);

}  // namespace scenept
