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

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "scenept/harness.hpp"
#include "scenept/scene_io.hpp"

using namespace scenept;
using nlohmann::json;

namespace
{

struct Flags
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, tasks, corpus, init, resume, device, values, sweep_task;
  bool scratch = false;
  bool no_prune = false;
  std::optional<double> p_mtm, p_mrm;
  std::optional<int> t_h, epochs, n_seeds;
  std::vector<std::string> set;
  std::string split = "val";
};

void add_common(CLI::App * cmd, Flags & f)
{
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--seed", f.seed, "run seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--tasks", f.tasks, "pretraining tasks, e.g. mtm,mrm,tp");
  cmd->add_flag("--scratch", f.scratch, "finetune without a pretrained encoder");
  cmd->add_flag("--no-prune", f.no_prune, "keep every road vector");
  cmd->add_option("--p-mtm", f.p_mtm, "MTM frame mask probability");
  cmd->add_option("--p-mrm", f.p_mrm, "MRM road mask probability");
  cmd->add_option("--t-h", f.t_h, "TP head length");
  cmd->add_option("--epochs", f.epochs, "epochs of the stage (both stages for ablate and sweep)");
  cmd->add_option("--device", f.device, "compute device (cpu)");
  cmd->add_option("--corpus", f.corpus, "corpus directory written by gen");
  cmd->add_option("--init", f.init, "checkpoint to initialize from");
  cmd->add_option("--resume", f.resume, "checkpoint of the same stage to continue");
  cmd->add_option("--set", f.set, "any config key as key=value (repeatable)");
}

// defaults < --config file < flags
RunConfig resolve(const Flags & f, const std::string & command)
{
  RunConfig c;
  if (!f.config.empty()) apply_file(c, f.config);
  for (const auto & kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_field(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out = *f.out;
  if (f.tasks) c.tasks = *f.tasks;
  if (f.scratch) c.scratch = true;
  if (f.no_prune) c.prune = false;
  if (f.p_mtm) c.p_mtm = *f.p_mtm;
  if (f.p_mrm) c.p_mrm = *f.p_mrm;
  if (f.t_h) c.t_h = *f.t_h;
  if (f.device) c.device = *f.device;
  if (f.corpus) c.corpus = *f.corpus;
  if (f.init) c.init = *f.init;
  if (f.resume) c.resume = *f.resume;
  if (f.n_seeds) c.n_seeds = *f.n_seeds;
  if (f.values) c.sweep_values = *f.values;
  if (f.sweep_task) c.sweep_task = *f.sweep_task;
  if (f.epochs) {
    if (command == "pretrain") {
      c.epochs_pre = *f.epochs;
    } else if (command == "finetune") {
      c.epochs_ft = *f.epochs;
    } else {
      c.epochs_pre = *f.epochs;
      c.epochs_ft = *f.epochs;
    }
  }
  validate(c);
  return c;
}

json metrics_json(const MetricSummary & m)
{
  return {{"b_minFDE6", m.b_minFDE6}, {"minADE6", m.minADE6}, {"minFDE6", m.minFDE6}, {"MR6", m.MR6},
          {"minADE1", m.minADE1},     {"minFDE1", m.minFDE1}, {"MR1", m.MR1},         {"scenes", m.scenes}};
}

std::string error_kind(const std::exception & e)
{
  if (dynamic_cast<const ConfigError *>(&e)) return "ConfigError";
  if (dynamic_cast<const MissingCorpus *>(&e)) return "MissingCorpus";
  if (dynamic_cast<const CheckpointMismatch *>(&e)) return "CheckpointMismatch";
  if (dynamic_cast<const ad::CheckpointError *>(&e)) return "CheckpointError";
  if (dynamic_cast<const NoTasksEnabled *>(&e)) return "NoTasksEnabled";
  if (dynamic_cast<const HeadTooLong *>(&e)) return "HeadTooLong";
  if (dynamic_cast<const SceneParseError *>(&e)) return "SceneParseError";
  if (dynamic_cast<const DegenerateTargetHistory *>(&e)) return "DegenerateTargetHistory";
  if (dynamic_cast<const HistoryTooLong *>(&e)) return "HistoryTooLong";
  if (dynamic_cast<const ad::ShapeError *>(&e)) return "ShapeError";
  return "Error";
}

int fail(const std::string & kind, const std::string & message)
{
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return kind == "UsageError" ? 2 : 1;
}

int run(const std::string & command, const Flags & f)
{
  const RunConfig cfg = resolve(f, command);
  const LogFn log = [](const std::string & s) { std::cerr << s << std::endl; };
  json out = {{"command", command}, {"out", cfg.out}, {"config_fingerprint", fingerprint(cfg)},
              {"param_count", param_count(model_config(cfg))}};

  if (command == "gen") {
    write_corpus(cfg, cfg.out);
    out["corpus"] = cfg.out;
    std::cout << out.dump() << std::endl;
    return 0;
  }
  const Dataset data = load_dataset(cfg);
  out["train_scenes"] = data.train.size();
  if (command == "pretrain") {
    const auto r = run_pretrain(cfg, data, log);
    out["final_loss"] = r.final_loss;
    out["checkpoint"] = r.checkpoint.string();
  } else if (command == "finetune") {
    const auto r = run_finetune(cfg, data, log);
    out["final_loss"] = r.final_loss;
    out["checkpoint"] = r.checkpoint.string();
    out["val"] = metrics_json(*r.final_val);
  } else if (command == "eval") {
    out["split"] = f.split;
    out["metrics"] = metrics_json(run_eval(cfg, data, f.split, log));
  } else if (command == "ablate") {
    const auto r = run_ablation(cfg, data, log);
    out["wallclock_s"] = r.wallclock_s;
    out["checks"] = {{"pretrained_le_scratch", r.checks.pretrained_le_scratch},
                     {"all_tasks_best", r.checks.all_tasks_best},
                     {"tp_beats_counterpart", r.checks.tp_beats_counterpart}};
  } else if (command == "sweep") {
    json recs = json::array();
    for (const auto & r : run_sweep(cfg, data, log)) {
      recs.push_back({{"task", r.task}, {"value", r.value}, {"seeds", r.seeds}, {"mean", metrics_json(r.mean)}});
    }
    out["records"] = recs;
  } else if (command == "report") {
    run_report(cfg, data, log);
  }
  std::cout << out.dump() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"scenept: masked scene pretraining for trajectory prediction"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands = {
    {"gen", "write the synthetic corpus to --out"},
    {"pretrain", "pretrain the encoder on the enabled tasks"},
    {"finetune", "finetune encoder and decoder on labeled scenes"},
    {"ablate", "all eight task subsets x n_seeds"},
    {"sweep", "final metrics over a mask hyperparameter"},
    {"eval", "evaluate a finetuned checkpoint"},
    {"report", "metric csv and svg snapshots of a run directory"},
  };
  for (const auto & [name, help] : commands) {
    auto * cmd = app.add_subcommand(name, help);
    add_common(cmd, flags);
    if (name == "eval") cmd->add_option("--split", flags.split, "train, val or test");
    if (name == "ablate" || name == "sweep") cmd->add_option("--n-seeds", flags.n_seeds, "seeds per arm");
    if (name == "sweep") {
      cmd->add_option("--task", flags.sweep_task, "p_mtm, p_mrm or t_h");
      cmd->add_option("--values", flags.values, "comma-separated values");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    return fail("UsageError", e.what());
  }
  try {
    return run(app.get_subcommands().front()->get_name(), flags);
  } catch (const std::exception & e) {
    return fail(error_kind(e), e.what());
  }
}
