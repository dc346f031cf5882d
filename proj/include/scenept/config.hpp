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

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "scenept/model.hpp"
#include "scenept/synthgen.hpp"
#include "scenept/tasks.hpp"

namespace scenept
{

/// Raised for malformed config text, unknown keys and out-of-range values.
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a run depends on. Serialized as flat `key = value` lines.
struct RunConfig
{
  // run
  std::uint64_t seed = 0;
  std::string out = "runs/default";
  std::string tasks = "mtm,mrm,tp";
  bool scratch = false;
  bool prune = true;
  std::string corpus;  // directory written by `gen`; empty generates the corpus in memory
  std::string init;    // checkpoint whose encoder initializes finetuning
  std::string resume;  // checkpoint of the same stage to continue from
  std::string device = "cpu";

  // pretraining tasks
  double p_mtm = 0.5;
  double p_mrm = 0.5;
  int t_h = 8;
  int k_tp = 2;
  int min_len_mtm = 5;
  std::string pretrain_splits = "train,val,test";  // label-stripped splits used for pretraining

  // optimization
  int epochs_pre = 30;
  int epochs_ft = 20;
  int batch = 32;
  double lr = 2e-4;
  double clip = 1.0;
  int train_limit = 0;  // use only the first n training scenes (0 = all)
  bool eval_train = false;

  // corpus
  std::uint64_t data_seed = 0;
  int n_scenes = 2000;
  int a_max = 8;
  int t = 20;
  int f = 30;
  std::string map_style = "mixed";

  // model
  int d = 256;
  int k_t = 3;
  int k_s = 2;
  int k_c = 3;
  int heads = 8;
  int dim_head = 64;
  int n_modes = 6;
  int ffn_mult = 4;
  int mlp_hidden = 512;
  bool query_self_attn = false;

  // ablation and sweeps
  int n_seeds = 3;
  std::string arms;  // ablation subsets to run, ';'-separated (e.g. "none;mtm,mrm,tp"); empty runs all eight
  std::string sweep_task = "p_mtm";  // p_mtm, p_mrm or t_h
  std::string sweep_values = "0,0.25,0.5,0.75,1";
  int svg_scenes = 3;

  bool operator==(const RunConfig &) const = default;
};

/// Ordered (key, value) pairs of every field.
std::vector<std::pair<std::string, std::string>> to_pairs(const RunConfig & cfg);
std::string to_text(const RunConfig & cfg);

/// Sets one field from text. Throws ConfigError for unknown keys or unparsable values.
void set_field(RunConfig & cfg, const std::string & key, const std::string & value);

/// Applies `key = value` lines ('#' starts a comment) on top of `cfg`.
void apply_text(RunConfig & cfg, const std::string & text);
void apply_file(RunConfig & cfg, const std::filesystem::path & path);

/// Range checks across fields.
void validate(const RunConfig & cfg);

ModelConfig model_config(const RunConfig & cfg);
PretrainConfig pretrain_config(const RunConfig & cfg);
GenConfig gen_config(const RunConfig & cfg);

/// Keys that fix the encoder's parameter shapes.
const std::vector<std::string> & encoder_keys();

/// Keys in `keys` whose values differ between two serialized configs, formatted as
/// "key: a -> b".
std::vector<std::string> differing(
  const std::map<std::string, std::string> & a, const std::map<std::string, std::string> & b,
  const std::vector<std::string> & keys);

/// 64-bit FNV-1a of the serialized config, as 16 hex digits.
std::string fingerprint(const RunConfig & cfg);

}  // namespace scenept
