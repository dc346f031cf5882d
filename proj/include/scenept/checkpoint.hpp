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

#include "scenept/optim.hpp"
#include "scenept/tensor.hpp"

namespace scenept::ad
{

class CheckpointError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct TensorRecord
{
  std::string name;
  Shape shape;
  std::vector<float> data;

  bool operator==(const TensorRecord &) const = default;
};

/// Binary container: magic, format version, JSON manifest, then (name, shape, float32 LE)
/// records in order.
struct Checkpoint
{
  nlohmann::json manifest = nlohmann::json::object();
  std::vector<TensorRecord> records;

  const TensorRecord * find(const std::string & name) const;
};

void write_checkpoint(const std::filesystem::path & path, const Checkpoint & ckpt);
Checkpoint read_checkpoint(const std::filesystem::path & path);

/// Records for every parameter whose name starts with `prefix` (all when empty).
void append_params(Checkpoint & ckpt, const ParamStore & store, const std::string & prefix = "");
/// Records for the optimizer moments, named "adam.m/<param>" and "adam.v/<param>".
void append_optimizer(Checkpoint & ckpt, const Adam & opt);

/// Copies matching records into the store. Every parameter with `prefix` must be present
/// with an identical shape. Returns the number of tensors loaded.
std::size_t load_params(const Checkpoint & ckpt, ParamStore & store, const std::string & prefix = "");
void load_optimizer(const Checkpoint & ckpt, Adam & opt);

}  // namespace scenept::ad
