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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenept/checkpoint.hpp"
#include "scenept/config.hpp"
#include "scenept/features.hpp"
#include "scenept/model.hpp"
#include "scenept/optim.hpp"
#include "scenept/report.hpp"
#include "scenept/tasks.hpp"

namespace scenept
{

class MissingCorpus : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A checkpoint whose encoder hyperparameters differ from the run's. what() lists them.
class CheckpointMismatch : public std::runtime_error
{
public:
  explicit CheckpointMismatch(std::vector<std::string> diffs);
  const std::vector<std::string> & diffs() const { return diffs_; }

private:
  std::vector<std::string> diffs_;
};

/// Progress sink; the CLI points it at stderr.
using LogFn = std::function<void(const std::string &)>;

struct Sample
{
  std::string scene_id;
  Scene prepared;           // normalized, padded, pruned
  SceneFeatures features;
  Eigen::MatrixX2d gt;      // [F, 2] meters; empty when unlabeled
};

struct Dataset
{
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

Sample make_sample(const Scene & raw, const RunConfig & cfg);

/// Writes train/val/test JSON-lines files and the generating config into `dir`.
void write_corpus(const RunConfig & cfg, const std::filesystem::path & dir);

/// From cfg.corpus when set (MissingCorpus if absent), otherwise generated in memory.
/// train_limit truncates the training split.
Dataset load_dataset(const RunConfig & cfg);

/// Label-stripped concatenation of the splits named in `splits` ("train,val,test").
std::vector<Sample> pretraining_split(const Dataset & data, const std::string & splits = "train,val,test");

enum class Stage { kPretrain, kFinetune };
const char * to_string(Stage stage);

struct EpochRecord
{
  int epoch = 0;
  double loss = 0.0;
  double mtm = 0.0;
  double mrm = 0.0;
  double tp = 0.0;
  std::optional<MetricSummary> val;
  std::optional<MetricSummary> train;
  double wallclock_s = 0.0;
};

/// Model, optimizer and schedule of one training stage. Every random draw comes from a
/// counter-based stream keyed by (seed, stage, epoch, scene index).
class Trainer
{
public:
  Trainer(const RunConfig & cfg, Stage stage, std::size_t n_train);

  const RunConfig & config() const { return cfg_; }
  Stage stage() const { return stage_; }
  SeptModel & model() { return model_; }
  const SeptModel & model() const { return model_; }
  const ad::Adam & optimizer() const { return opt_; }
  int epochs_done() const { return epoch_; }
  std::int64_t steps_done() const { return opt_.step_count(); }
  std::int64_t steps_per_epoch() const { return steps_per_epoch_; }

  double lr_at(std::int64_t step) const;

  /// Copies "enc.*" from a checkpoint; throws CheckpointMismatch on differing encoder keys.
  void load_encoder(const ad::Checkpoint & ckpt);

  struct StepLoss
  {
    double total = 0.0;
    double mtm = 0.0;
    double mrm = 0.0;
    double tp = 0.0;
  };

  /// One optimizer step on data[batch]; returns the mean scene losses.
  StepLoss step(std::span<const Sample> data, std::span<const std::size_t> batch);

  /// Shuffled order of the current epoch.
  std::vector<std::size_t> epoch_order(std::size_t n) const;

  /// A full pass; increments the epoch counter.
  EpochRecord train_epoch(std::span<const Sample> data);

  ad::Checkpoint checkpoint() const;
  /// Restores parameters, optimizer state and counters saved by checkpoint(). The
  /// checkpoint's stage and full config (except paths) must match.
  void restore(const ad::Checkpoint & ckpt);

private:
  std::uint64_t scene_stream(std::size_t index) const;

  RunConfig cfg_;
  Stage stage_;
  TaskSet tasks_;
  PretrainConfig pcfg_;
  SeptModel model_;
  ad::Adam opt_;
  ad::LrSchedule schedule_;
  std::int64_t steps_per_epoch_ = 1;
  int epoch_ = 0;
};

MetricSummary evaluate(const SeptModel & model, std::span<const Sample> data);

struct StageResult
{
  std::vector<EpochRecord> epochs;
  std::filesystem::path checkpoint;
  std::vector<MetricRow> rows;
  double final_loss = 0.0;
  std::optional<MetricSummary> final_val;
};

/// Pretrains the enabled tasks for epochs_pre epochs; writes <out>/pretrain.ckpt after
/// every epoch and <out>/pretrain_log.csv. Honors cfg.resume.
StageResult run_pretrain(const RunConfig & cfg, const Dataset & data, const LogFn & log = {});

/// Finetunes from cfg.init (ignored with cfg.scratch) or from scratch; evaluates on val
/// each epoch; writes <out>/finetune.ckpt and <out>/metrics.csv. Honors cfg.resume.
StageResult run_finetune(const RunConfig & cfg, const Dataset & data, const LogFn & log = {});

/// Evaluates a finetuned checkpoint on one split.
MetricSummary run_eval(const RunConfig & cfg, const Dataset & data, const std::string & split, const LogFn & log = {});

struct ArmResult
{
  TaskSet tasks;
  int seed_index = 0;
  std::uint64_t seed = 0;
  MetricSummary final_val;
  std::vector<double> curve;  // val b_minFDE6 per finetuning epoch
  double wallclock_s = 0.0;
};

struct AblationRow
{
  TaskSet tasks;
  MeanStd b_minFDE6, minADE6, minFDE6, MR6;
  int seeds = 0;
};

std::vector<AblationRow> aggregate(std::span<const ArmResult> arms);

struct DirectionalChecks
{
  bool pretrained_le_scratch = false;  // every pretrained arm <= scratch
  bool all_tasks_best = false;
  bool tp_beats_counterpart = false;   // every TP arm < its TP-free counterpart
  std::vector<std::string> notes;
};

DirectionalChecks directional_checks(std::span<const AblationRow> rows);

/// Table shaped like the task-configuration ablation: one row per subset, mean +- std.
std::string ablation_table(std::span<const AblationRow> rows);

/// Seed of arm (subset, seed_index); arms never share a stream.
std::uint64_t arm_seed(std::uint64_t base, std::size_t subset, int seed_index);

struct AblationReport
{
  std::vector<ArmResult> arms;
  std::vector<AblationRow> rows;
  DirectionalChecks checks;
  double wallclock_s = 0.0;
};

/// All eight subsets (or those listed in cfg.arms) x n_seeds. Arms whose result.json
/// matches the current config are reused, so an interrupted run can be restarted and arms
/// can be run by separate processes.
AblationReport run_ablation(const RunConfig & cfg, const Dataset & data, const LogFn & log = {});

struct SweepRecord
{
  std::string task;
  std::string value;  // verbatim from the config
  MetricSummary mean;
  int seeds = 0;
};

/// Parses sweep_values for sweep_task (p_mtm, p_mrm or t_h) and range-checks all of them.
std::vector<std::string> sweep_values(const RunConfig & cfg);

std::vector<SweepRecord> run_sweep(const RunConfig & cfg, const Dataset & data, const LogFn & log = {});

/// CSV and SVG artifacts of a finished run directory.
void run_report(const RunConfig & cfg, const Dataset & data, const LogFn & log = {});

}  // namespace scenept
