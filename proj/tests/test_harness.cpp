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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "scenept/harness.hpp"

using namespace scenept;
namespace fs = std::filesystem;

namespace
{

fs::path scratch_dir(const std::string & name)
{
  const auto p = fs::temp_directory_path() / ("scenept_harness_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig tiny(const std::string & name)
{
  RunConfig c;
  c.out = scratch_dir(name).string();
  c.n_scenes = 20;
  c.a_max = 4;
  c.t = 10;
  c.f = 10;
  c.t_h = 4;
  c.k_tp = 1;
  c.d = 16;
  c.k_t = 1;
  c.k_s = 1;
  c.k_c = 1;
  c.heads = 2;
  c.dim_head = 8;
  c.ffn_mult = 2;
  c.mlp_hidden = 16;
  c.batch = 4;
  c.epochs_pre = 1;
  c.epochs_ft = 1;
  c.svg_scenes = 2;
  return c;
}

std::vector<std::vector<float>> snapshot(const SeptModel & m)
{
  std::vector<std::vector<float>> out;
  for (const auto & p : m.params().params()) {
    const auto v = p.tensor.values();
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

}  // namespace

TEST_CASE("one pretraining epoch on two scenes writes a loadable checkpoint")
{
  auto c = tiny("smoke");
  c.train_limit = 2;
  c.pretrain_splits = "train";
  const auto data = load_dataset(c);
  REQUIRE(data.train.size() == 2);
  const auto res = run_pretrain(c, data);
  REQUIRE(res.epochs.size() == 1);
  CHECK(std::isfinite(res.final_loss));
  CHECK(res.final_loss > 0.0);
  const auto ckpt = ad::read_checkpoint(res.checkpoint);
  CHECK(ckpt.manifest["stage"] == "pretrain");
  CHECK(ckpt.manifest["epoch"] == 1);
  SeptModel m(model_config(c), 99);
  CHECK(ad::load_params(ckpt, m.params()) == m.params().params().size());
  CHECK(fs::exists(fs::path(c.out) / "pretrain_log.csv"));
}

TEST_CASE("pretraining corpus is the label-stripped concatenation of the chosen splits")
{
  auto c = tiny("strip");
  const auto data = load_dataset(c);
  const auto all = pretraining_split(data);
  CHECK(all.size() == 20);
  CHECK(pretraining_split(data, "train").size() == 16);
  CHECK(pretraining_split(data, "train,val").size() == 18);
  for (const auto & s : all) {
    CHECK(!s.prepared.future);
    CHECK(s.gt.rows() == 0);
  }
  CHECK(all[17].scene_id == data.val[1].scene_id);
  CHECK(all[17].features.agents == data.val[1].features.agents);
  CHECK(data.train[0].gt.rows() == c.f);
  CHECK_THROWS_AS(pretraining_split(data, "train,holdout"), ConfigError);
  c.pretrain_splits = "train,dev";
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("same seed gives bitwise identical losses and metrics")
{
  auto c = tiny("det_a");
  c.train_limit = 6;
  c.epochs_pre = 2;
  c.epochs_ft = 2;
  const auto data = load_dataset(c);
  const auto p1 = run_pretrain(c, data);
  auto c2 = c;
  c2.out = scratch_dir("det_b").string();
  const auto p2 = run_pretrain(c2, data);
  CHECK(p1.final_loss == p2.final_loss);
  CHECK(p1.epochs[0].mtm == p2.epochs[0].mtm);
  CHECK(p1.epochs[0].tp == p2.epochs[0].tp);

  c.init = p1.checkpoint.string();
  c2.init = p2.checkpoint.string();
  const auto f1 = run_finetune(c, data);
  const auto f2 = run_finetune(c2, data);
  CHECK(f1.final_loss == f2.final_loss);
  CHECK(f1.final_val->b_minFDE6 == f2.final_val->b_minFDE6);

  auto c3 = c;
  c3.seed = 1;
  c3.out = scratch_dir("det_c").string();
  CHECK(run_pretrain(c3, data).final_loss != p1.final_loss);
}

TEST_CASE("save, load and resume matches uninterrupted training for the next step")
{
  for (const Stage stage : {Stage::kPretrain, Stage::kFinetune}) {
    CAPTURE(to_string(stage));
    auto c = tiny("resume");
    c.train_limit = 8;
    const auto data = load_dataset(c);
    const auto samples = stage == Stage::kPretrain ? pretraining_split(data) : data.train;
    const std::vector<std::size_t> b1 = {0, 3, 5, 6};
    const std::vector<std::size_t> b2 = {1, 2, 7, 4};

    Trainer a(c, stage, samples.size());
    a.step(samples, b1);
    const auto ckpt_path = fs::path(c.out) / "mid.ckpt";
    fs::create_directories(c.out);
    ad::write_checkpoint(ckpt_path, a.checkpoint());
    const auto la = a.step(samples, b2);

    Trainer b(c, stage, samples.size());
    b.restore(ad::read_checkpoint(ckpt_path));
    CHECK(b.steps_done() == 1);
    const auto lb = b.step(samples, b2);
    CHECK(la.total == lb.total);
    CHECK(snapshot(a.model()) == snapshot(b.model()));
    for (std::size_t i = 0; i < a.optimizer().params().size(); ++i) {
      CHECK(a.optimizer().first_moment(i) == b.optimizer().first_moment(i));
      CHECK(a.optimizer().second_moment(i) == b.optimizer().second_moment(i));
    }
  }
}

TEST_CASE("restore refuses a checkpoint from a different config")
{
  auto c = tiny("restore_mismatch");
  c.train_limit = 4;
  const auto data = load_dataset(c);
  Trainer a(c, Stage::kPretrain, 4);
  auto c2 = c;
  c2.lr = 1e-3;
  Trainer b(c2, Stage::kPretrain, 4);
  CHECK_THROWS_AS(b.restore(a.checkpoint()), CheckpointMismatch);
  Trainer f(c, Stage::kFinetune, 4);
  CHECK_THROWS_AS(f.restore(a.checkpoint()), ad::CheckpointError);
}

TEST_CASE("pretraining loss does not depend on the order of scenes within a batch")
{
  auto c = tiny("order");
  c.train_limit = 4;
  const auto data = load_dataset(c);
  const auto samples = pretraining_split(data);
  Trainer a(c, Stage::kPretrain, 4);
  Trainer b(c, Stage::kPretrain, 4);
  const std::vector<std::size_t> fwd = {0, 1, 2, 3};
  const std::vector<std::size_t> rev = {3, 2, 1, 0};
  const auto la = a.step(samples, fwd);
  const auto lb = b.step(samples, rev);
  CHECK(la.total == doctest::Approx(lb.total).epsilon(1e-12));
  CHECK(la.mtm == doctest::Approx(lb.mtm).epsilon(1e-12));
  CHECK(la.mrm == doctest::Approx(lb.mrm).epsilon(1e-12));
  CHECK(la.tp == doctest::Approx(lb.tp).epsilon(1e-12));
}

TEST_CASE("epoch order is a seeded permutation that changes per epoch")
{
  auto c = tiny("perm");
  Trainer a(c, Stage::kFinetune, 40);
  auto o = a.epoch_order(40);
  auto sorted = o;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 40; ++i) CHECK(sorted[i] == i);
  Trainer b(c, Stage::kFinetune, 40);
  CHECK(b.epoch_order(40) == o);
  Trainer p(c, Stage::kPretrain, 40);
  CHECK(p.epoch_order(40) != o);
}

TEST_CASE("learning rate schedules")
{
  auto c = tiny("lr");
  c.epochs_ft = 20;
  c.batch = 32;
  Trainer ft(c, Stage::kFinetune, 64);
  REQUIRE(ft.steps_per_epoch() == 2);
  const std::int64_t total = 40;
  CHECK(ft.lr_at(0) == doctest::Approx(2e-4).epsilon(1e-9));
  CHECK(ft.lr_at(total / 2) == doctest::Approx(1e-4).epsilon(1e-6));
  CHECK(ft.lr_at(total) == doctest::Approx(0.0));
  Trainer pre(c, Stage::kPretrain, 64);
  CHECK(pre.lr_at(0) == 2e-4);
  CHECK(pre.lr_at(1000) == 2e-4);
}

TEST_CASE("finetuning loads the pretrained encoder and a fresh decoder")
{
  auto c = tiny("init");
  c.train_limit = 4;
  c.epochs_ft = 0;
  const auto data = load_dataset(c);
  Trainer pre(c, Stage::kPretrain, 4);
  pre.train_epoch(pretraining_split(data));
  const auto ckpt = pre.checkpoint();
  Trainer ft(c, Stage::kFinetune, 4);
  ft.load_encoder(ckpt);
  const auto & pp = pre.model().params();
  for (const auto & p : ft.model().params().params()) {
    CAPTURE(p.name);
    if (p.name.rfind("enc.", 0) != 0) continue;
    const auto a = p.tensor.values();
    const auto b = pp.find(p.name)->values();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  // the finetuning optimizer never touches the mask token or the pretraining heads
  for (const auto & p : ft.optimizer().params()) {
    CHECK(p.name != "enc.mask_token");
    CHECK(p.name.rfind("pre.", 0) != 0);
  }
}

TEST_CASE("scratch ignores any provided checkpoint")
{
  auto c = tiny("scratch_a");
  c.train_limit = 4;
  const auto data = load_dataset(c);
  c.scratch = true;
  c.init = "/nonexistent/pretrain.ckpt";
  const auto a = run_finetune(c, data);
  auto c2 = tiny("scratch_b");
  c2.train_limit = 4;
  c2.init = "";
  const auto b = run_finetune(c2, data);
  CHECK(a.final_loss == b.final_loss);
  c2.scratch = false;
  c2.init = "/nonexistent/pretrain.ckpt";
  CHECK_THROWS(run_finetune(c2, data));
}

TEST_CASE("encoder mismatch lists the differing hyperparameters")
{
  auto c = tiny("mismatch");
  c.train_limit = 2;
  const auto data = load_dataset(c);
  const auto pre = run_pretrain(c, data);
  auto ft = c;
  ft.d = 24;
  ft.k_t = 2;
  ft.init = pre.checkpoint.string();
  try {
    run_finetune(ft, data);
    FAIL("expected CheckpointMismatch");
  } catch (const CheckpointMismatch & e) {
    REQUIRE(e.diffs().size() == 2);
    CHECK(e.diffs()[0] == "d: 16 -> 24");
    CHECK(e.diffs()[1] == "k_t: 1 -> 2");
    CHECK(std::string(e.what()).find("d: 16 -> 24") != std::string::npos);
  }
}

TEST_CASE("missing corpus is a structured error")
{
  auto c = tiny("missing");
  c.corpus = "/nonexistent/corpus";
  CHECK_THROWS_AS(load_dataset(c), MissingCorpus);
}

TEST_CASE("written corpus loads back to the in-memory corpus")
{
  auto c = tiny("gen");
  write_corpus(c, c.out);
  auto from_disk = c;
  from_disk.corpus = c.out;
  const auto a = load_dataset(c);
  const auto b = load_dataset(from_disk);
  REQUIRE(a.train.size() == b.train.size());
  REQUIRE(a.val.size() == b.val.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].features.agents == b.train[i].features.agents);
    CHECK(a.train[i].features.roads == b.train[i].features.roads);
  }
}

TEST_CASE("aggregation against a hand computation on three records")
{
  std::vector<ArmResult> arms(3);
  const double b[] = {2.0, 2.6, 2.3};
  for (int i = 0; i < 3; ++i) {
    arms[i].tasks = TaskSet::parse("mtm");
    arms[i].final_val.b_minFDE6 = b[i];
    arms[i].final_val.MR6 = i == 0 ? 1.0 : 0.0;
  }
  const auto rows = aggregate(arms);
  REQUIRE(rows.size() == 1);
  // mean 2.3; deviations -0.3, 0.3, 0; sample var 0.18 / 2 = 0.09
  CHECK(rows[0].b_minFDE6.mean == doctest::Approx(2.3).epsilon(1e-12));
  CHECK(rows[0].b_minFDE6.std == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(rows[0].MR6.mean == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(rows[0].MR6.std == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-12));
  CHECK(rows[0].seeds == 3);
}

TEST_CASE("directional checks on constructed rows")
{
  std::vector<AblationRow> rows;
  for (const auto & t : all_task_subsets()) {
    AblationRow r;
    r.tasks = t;
    // scratch 3.0, more tasks is better, TP adds a bonus
    r.b_minFDE6.mean = 3.0 - 0.1 * (t.mtm + t.mrm) - 0.3 * t.tp;
    rows.push_back(r);
  }
  auto c = directional_checks(rows);
  CHECK(c.pretrained_le_scratch);
  CHECK(c.all_tasks_best);
  CHECK(c.tp_beats_counterpart);
  rows[1].b_minFDE6.mean = 3.1;  // mtm worse than scratch
  c = directional_checks(rows);
  CHECK(!c.pretrained_le_scratch);
  CHECK(c.all_tasks_best);
  rows[4].b_minFDE6.mean = 1.0;  // mtm,mrm beats everything
  c = directional_checks(rows);
  CHECK(!c.all_tasks_best);
  CHECK(!c.tp_beats_counterpart);
  CHECK(!c.notes.empty());
}

TEST_CASE("arm seeds are distinct")
{
  std::set<std::uint64_t> seen;
  for (std::size_t s = 0; s < 8; ++s) {
    for (int k = 0; k < 3; ++k) seen.insert(arm_seed(0, s, k));
  }
  CHECK(seen.size() == 24);
}

TEST_CASE("ablation runs eight arms, skips pretraining for scratch, and isolates arms")
{
  auto c = tiny("ablate");
  c.train_limit = 4;
  c.n_seeds = 1;
  const auto data = load_dataset(c);
  const auto rep = run_ablation(c, data);
  REQUIRE(rep.rows.size() == 8);
  CHECK(rep.arms.size() == 8);
  const fs::path root = c.out;
  CHECK(!fs::exists(root / "arms" / "none" / "seed0" / "pre"));
  CHECK(fs::exists(root / "arms" / "mtm+mrm+tp" / "seed0" / "pre" / "pretrain.ckpt"));
  for (const char * f : {"ablation_table.md", "ablation_summary.json", "ablation_curves.svg", "metrics.csv"}) {
    CHECK(fs::exists(root / f));
  }
  CHECK(read_metric_csv(root / "metrics.csv").size() == 8);

  // a subset of arms run on its own reuses nothing and produces the same numbers
  auto part = c;
  part.out = scratch_dir("ablate_part").string();
  part.arms = "none;mtm,mrm,tp";
  const auto sub = run_ablation(part, data);
  REQUIRE(sub.arms.size() == 2);
  CHECK(sub.arms[0].final_val.b_minFDE6 == rep.arms[0].final_val.b_minFDE6);
  CHECK(sub.arms[1].final_val.b_minFDE6 == rep.arms[7].final_val.b_minFDE6);
  CHECK(!sub.checks.all_tasks_best);

  // deleting one arm and rerunning reproduces every number
  fs::remove_all(root / "arms" / "mrm");
  const auto again = run_ablation(c, data);
  for (std::size_t i = 0; i < 8; ++i) {
    CAPTURE(rep.arms[i].tasks.to_string());
    CHECK(again.arms[i].final_val.b_minFDE6 == rep.arms[i].final_val.b_minFDE6);
    CHECK(again.arms[i].curve == rep.arms[i].curve);
  }
}

TEST_CASE("sweep records one entry per value, verbatim, and validates before training")
{
  auto c = tiny("sweep");
  c.train_limit = 4;
  c.n_seeds = 1;
  c.sweep_task = "p_mrm";
  c.sweep_values = "0, 0.50,1";
  const auto data = load_dataset(c);
  const auto rec = run_sweep(c, data);
  REQUIRE(rec.size() == 3);
  CHECK(rec[0].value == "0");
  CHECK(rec[1].value == "0.50");
  CHECK(rec[2].value == "1");
  CHECK(fs::exists(fs::path(c.out) / "sweep_p_mrm.csv"));

  auto bad = tiny("sweep_bad");
  bad.sweep_task = "p_mtm";
  bad.sweep_values = "0.5,1.5";
  CHECK_THROWS_AS(run_sweep(bad, data), ConfigError);
  CHECK(!fs::exists(bad.out));
  bad.sweep_task = "t_h";
  bad.sweep_values = "2,10";
  CHECK_THROWS_AS(sweep_values(bad), ConfigError);
  bad.sweep_task = "k_tp";
  CHECK_THROWS_AS(sweep_values(bad), ConfigError);
}

TEST_CASE("report of an empty run has a header-only csv; a finished run gets svg snapshots")
{
  auto c = tiny("report_empty");
  const Dataset none;
  run_report(c, none);
  CHECK(read_metric_csv(fs::path(c.out) / "report" / "metrics.csv").empty());

  auto r = tiny("report_run");
  r.train_limit = 4;
  const auto data = load_dataset(r);
  run_finetune(r, data);
  run_report(r, data);
  int svgs = 0;
  for (const auto & e : fs::directory_iterator(fs::path(r.out) / "report")) svgs += e.path().extension() == ".svg";
  CHECK(svgs == 2);
  CHECK(read_metric_csv(fs::path(r.out) / "report" / "metrics.csv").size() == 1);
}

TEST_CASE("eval writes a metric record with the config fingerprint")
{
  auto c = tiny("eval");
  c.train_limit = 4;
  const auto data = load_dataset(c);
  const auto ft = run_finetune(c, data);
  const auto m = run_eval(c, data, "val");
  CHECK(m.b_minFDE6 == ft.final_val->b_minFDE6);
  std::ifstream in(fs::path(c.out) / "eval_val.txt");
  std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(all.find("config_fingerprint = " + fingerprint(c)) != std::string::npos);
  CHECK(all.find("param_count = ") != std::string::npos);
  CHECK_THROWS_AS(run_eval(c, data, "holdout"), ConfigError);
}
