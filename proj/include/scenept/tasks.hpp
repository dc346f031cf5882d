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
#include <stdexcept>
#include <string>
#include <vector>

#include "scenept/features.hpp"
#include "scenept/model.hpp"

namespace scenept
{

class NoTasksEnabled : public std::invalid_argument
{
public:
  NoTasksEnabled() : std::invalid_argument("NoTasksEnabled: pretraining needs at least one of mtm, mrm, tp") {}
};

class HeadTooLong : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

struct TaskSet
{
  bool mtm = false;
  bool mrm = false;
  bool tp = false;

  bool empty() const { return !mtm && !mrm && !tp; }
  bool operator==(const TaskSet &) const = default;

  static TaskSet all() { return {true, true, true}; }
  /// "mtm,mrm,tp" in any order; "" or "none" is the empty set.
  static TaskSet parse(const std::string & text);
  /// Canonical "mtm,mrm,tp" order; "none" when empty.
  std::string to_string() const;
};

/// The eight subsets in a fixed order: none, mtm, mrm, tp, mtm+mrm, mtm+tp, mrm+tp, all.
std::vector<TaskSet> all_task_subsets();

struct PretrainConfig
{
  double p_mtm = 0.5;
  double p_mrm = 0.5;
  int T_h = 8;
  int k_tp = 2;
  int min_len_mtm = 5;
};

void validate(const PretrainConfig & cfg);

using Rng = std::mt19937_64;

struct MtmMask
{
  MatrixRf positions;  // [A, T], 1 where the frame embedding is replaced
  MatrixRf targets;    // [A * T, kAgentContinuous], original x, y, ts
  int count = 0;
};

/// Bernoulli(p) per valid frame of each trajectory with at least `min_len` valid frames.
MtmMask mtm_mask(const SceneFeatures & f, double p, int min_len, Rng & rng);

struct MrmMask
{
  MatrixRf roads;      // [S, kDr] with selected rows reduced to their start point
  MatrixRf positions;  // [S, 1]
  MatrixRf targets;    // [S, kRoadContinuous], original continuous fields
  int count = 0;
};

MrmMask mrm_mask(const MatrixRf & roads, double p, Rng & rng);

struct TpSplit
{
  SceneFeatures head;     // T = T_h; each agent's first T_h valid frames, left-padded
  MatrixRf included;      // [A, 1], 1 when the agent's tail enters the loss
  MatrixRf tail;          // [A * (T - T_h), 2], tail (x, y) from index 0
  MatrixRf tail_mask;     // [A * (T - T_h), 1], frames that exist for included agents
  int tail_len = 0;
  int included_count = 0;
};

/// Throws HeadTooLong when T_h >= T.
TpSplit tp_split(const SceneFeatures & f, int T_h, int k_tp);

template <class S>
ad::BasicTensor<S> mtm_loss(const BasicSeptModel<S> & model, const SceneFeatures & f, const MtmMask & mask);
template <class S>
ad::BasicTensor<S> mrm_loss(const BasicSeptModel<S> & model, const SceneFeatures & f, const MrmMask & mask);
template <class S>
ad::BasicTensor<S> tp_loss(const BasicSeptModel<S> & model, const TpSplit & split);

template <class S>
struct BasicPretrainLoss
{
  ad::BasicTensor<S> total;
  double mtm = 0.0;
  double mrm = 0.0;
  double tp = 0.0;
};

/// Sum of the enabled task losses, each in its own forward pass. Every task draws its
/// masks from its own stream derived from `scene_seed`.
template <class S>
BasicPretrainLoss<S> pretrain_loss(
  const BasicSeptModel<S> & model, const SceneFeatures & f, const PretrainConfig & cfg, const TaskSet & tasks,
  std::uint64_t scene_seed);

/// Independent stream of task `which` (0 mtm, 1 mrm) for a scene.
Rng task_stream(std::uint64_t scene_seed, int which);

template <class S>
struct BasicFinetuneLoss
{
  ad::BasicTensor<S> total;
  ad::BasicTensor<S> reg;
  ad::BasicTensor<S> cls;
  int winner = 0;
};

/// winner = argmin ADE (lowest index on ties); reg = mean |tau_j - gt| over F x 2;
/// cls = -[log p_j + sum_{i != j} log(1 - p_i)] on probabilities clamped to [1e-7, 1 - 1e-7].
/// gt is [F, 2] in meters.
template <class S>
BasicFinetuneLoss<S> finetune_loss(const BasicPrediction<S> & pred, const Eigen::MatrixX2d & gt);

/// Plain-value predictions for metric evaluation.
struct PredictionValues
{
  std::vector<Eigen::MatrixX2d> trajectories;  // N of [F, 2]
  Eigen::VectorXd scores;                      // [N]
};

template <class S>
PredictionValues to_values(const BasicPrediction<S> & pred);

inline constexpr double kMissThreshold = 2.0;

struct SceneMetrics
{
  double minADE = 0.0;
  double minFDE = 0.0;
  double MR = 0.0;
  double b_minFDE = 0.0;
  int best = 0;
};

/// Best of the k highest-scoring trajectories (score ties by index), best = closest endpoint.
/// Throws std::invalid_argument when k > N or k < 1.
SceneMetrics metrics(const PredictionValues & pred, const Eigen::MatrixX2d & gt, int k);

/// Dataset means of the k = 6 and k = 1 metrics; b_minFDE only for k = 6.
struct MetricSummary
{
  double b_minFDE6 = 0.0;
  double minADE6 = 0.0;
  double minFDE6 = 0.0;
  double MR6 = 0.0;
  double minADE1 = 0.0;
  double minFDE1 = 0.0;
  double MR1 = 0.0;
  std::int64_t scenes = 0;
};

class MetricAccumulator
{
public:
  /// Adds one scene; k = min(6, N) for the multi-modal block.
  void add(const PredictionValues & pred, const Eigen::MatrixX2d & gt);
  MetricSummary mean() const;

private:
  MetricSummary sum_;
};

}  // namespace scenept
