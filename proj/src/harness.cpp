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

#include "scenept/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "scenept/rng.hpp"
#include "scenept/scene_io.hpp"
#include "scenept/synthgen.hpp"

namespace scenept
{

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

// stream tags for derive_seed
constexpr std::uint64_t kInitTag = 1;
constexpr std::uint64_t kOrderTag = 2;
constexpr std::uint64_t kMaskTag = 3;
constexpr std::uint64_t kArmTag = 4;
constexpr std::uint64_t kSweepTag = 5;

constexpr const char * kCkptFormat = "scenept-train/1";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string join(const std::vector<std::string> & parts, const std::string & sep)
{
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? sep : "") + parts[i];
  return s;
}

std::map<std::string, std::string> as_map(const RunConfig & cfg)
{
  std::map<std::string, std::string> m;
  for (auto & [k, v] : to_pairs(cfg)) m[k] = v;
  return m;
}

std::map<std::string, std::string> manifest_config(const ad::Checkpoint & ckpt)
{
  std::map<std::string, std::string> m;
  if (!ckpt.manifest.contains("config")) return m;
  for (auto & [k, v] : ckpt.manifest["config"].items()) m[k] = v.get<std::string>();
  return m;
}

// Keys that may differ between a checkpoint and the run restoring it.
bool restore_exempt(const std::string & key)
{
  static const std::vector<std::string> exempt = {"out", "corpus", "init", "resume", "device", "eval_train",
                                                  "n_seeds", "sweep_task", "sweep_values", "svg_scenes"};
  return std::find(exempt.begin(), exempt.end(), key) != exempt.end();
}

void write_text(const fs::path & path, const std::string & text)
{
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path & path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json to_json(const MetricSummary & m)
{
  return {{"b_minFDE6", m.b_minFDE6}, {"minADE6", m.minADE6}, {"minFDE6", m.minFDE6}, {"MR6", m.MR6},
          {"minADE1", m.minADE1},     {"minFDE1", m.minFDE1}, {"MR1", m.MR1},         {"scenes", m.scenes}};
}

MetricSummary summary_from_json(const json & j)
{
  MetricSummary m;
  m.b_minFDE6 = j.at("b_minFDE6").get<double>();
  m.minADE6 = j.at("minADE6").get<double>();
  m.minFDE6 = j.at("minFDE6").get<double>();
  m.MR6 = j.at("MR6").get<double>();
  m.minADE1 = j.at("minADE1").get<double>();
  m.minFDE1 = j.at("minFDE1").get<double>();
  m.MR1 = j.at("MR1").get<double>();
  m.scenes = j.at("scenes").get<std::int64_t>();
  return m;
}

json to_json(const MeanStd & v) { return {{"mean", v.mean}, {"std", v.std}}; }

std::string arm_dir_name(const TaskSet & t)
{
  std::string s = t.to_string();
  std::replace(s.begin(), s.end(), ',', '+');
  return s;
}

std::string run_id_of(const RunConfig & cfg)
{
  std::string s = fs::path(cfg.out).lexically_normal().generic_string();
  while (!s.empty() && s.back() == '/') s.pop_back();
  std::replace(s.begin(), s.end(), ',', '+');
  return s.empty() ? "run" : s;
}

void log_line(const LogFn & log, const std::string & msg)
{
  if (log) log(msg);
}

std::string fmt(double v, int digits = 4)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<Sample> prepare_all(const std::vector<Scene> & scenes, const RunConfig & cfg)
{
  std::vector<Sample> out;
  out.reserve(scenes.size());
  for (const auto & s : scenes) out.push_back(make_sample(s, cfg));
  return out;
}

MetricRow row_of(const RunConfig & cfg, const std::string & stage, int epoch, const std::string & split,
                 const MetricSummary & m, double wallclock)
{
  return {run_id_of(cfg), stage, epoch, split, m, wallclock};
}

std::string metric_record(const RunConfig & cfg, const std::string & split, const MetricSummary & m)
{
  std::ostringstream s;
  s << "split = " << split << "\n";
  s << "scenes = " << m.scenes << "\n";
  s << "b_minFDE6 = " << fmt(m.b_minFDE6, 6) << "\nminADE6 = " << fmt(m.minADE6, 6) << "\nminFDE6 = " << fmt(m.minFDE6, 6)
    << "\nMR6 = " << fmt(m.MR6, 6) << "\nminADE1 = " << fmt(m.minADE1, 6) << "\nminFDE1 = " << fmt(m.minFDE1, 6)
    << "\nMR1 = " << fmt(m.MR1, 6) << "\n";
  s << "param_count = " << param_count(model_config(cfg)) << "\n";
  s << "config_fingerprint = " << fingerprint(cfg) << "\n";
  return s.str();
}

}  // namespace

CheckpointMismatch::CheckpointMismatch(std::vector<std::string> diffs)
  : std::runtime_error("checkpoint does not match the run config: " + join(diffs, "; ")), diffs_(std::move(diffs))
{
}

// ---------------------------------------------------------------------------- data

Sample make_sample(const Scene & raw, const RunConfig & cfg)
{
  Sample s;
  s.scene_id = raw.scene_id;
  s.prepared = prepare_scene(raw, {cfg.t, cfg.f, cfg.prune});
  s.features = build_features(s.prepared, cfg.t);
  if (s.prepared.future) {
    const auto & fut = *s.prepared.future;
    s.gt.resize(static_cast<Eigen::Index>(fut.size()), 2);
    for (std::size_t i = 0; i < fut.size(); ++i) s.gt.row(static_cast<Eigen::Index>(i)) = fut[i].transpose();
  }
  return s;
}

void write_corpus(const RunConfig & cfg, const fs::path & dir)
{
  validate(cfg);
  const auto corpus = build_corpus(gen_config(cfg));
  fs::create_directories(dir);
  save_scenes(dir / "train.jsonl", corpus.train);
  save_scenes(dir / "val.jsonl", corpus.val);
  save_scenes(dir / "test.jsonl", corpus.test);
  write_text(dir / "gen_config.txt", to_text(cfg));
}

Dataset load_dataset(const RunConfig & cfg)
{
  validate(cfg);
  Corpus corpus;
  if (!cfg.corpus.empty()) {
    const fs::path dir = cfg.corpus;
    for (const char * split : {"train.jsonl", "val.jsonl", "test.jsonl"}) {
      if (!fs::exists(dir / split)) {
        throw MissingCorpus("corpus file " + (dir / split).string() + " does not exist; run `scenept gen` first");
      }
    }
    corpus.train = load_scenes(dir / "train.jsonl");
    corpus.val = load_scenes(dir / "val.jsonl");
    corpus.test = load_scenes(dir / "test.jsonl");
  } else {
    corpus = build_corpus(gen_config(cfg));
  }
  if (cfg.train_limit > 0 && static_cast<std::size_t>(cfg.train_limit) < corpus.train.size()) {
    corpus.train.resize(static_cast<std::size_t>(cfg.train_limit));
  }
  Dataset d;
  d.train = prepare_all(corpus.train, cfg);
  d.val = prepare_all(corpus.val, cfg);
  d.test = prepare_all(corpus.test, cfg);
  return d;
}

std::vector<Sample> pretraining_split(const Dataset & data, const std::string & splits)
{
  std::vector<Sample> out;
  std::stringstream ss(splits);
  std::string split;
  while (std::getline(ss, split, ',')) {
    if (split != "train" && split != "val" && split != "test") throw ConfigError("unknown split '" + split + "'");
    const auto & src = split == "train" ? data.train : split == "val" ? data.val : data.test;
    out.insert(out.end(), src.begin(), src.end());
  }
  for (auto & s : out) {
    s.prepared.future.reset();
    s.features.future.reset();
    s.gt.resize(0, 2);
  }
  return out;
}

const char * to_string(Stage stage)
{
  return stage == Stage::kPretrain ? "pretrain" : "finetune";
}

// ---------------------------------------------------------------------------- trainer

namespace
{

std::vector<ad::NamedTensor> trainable(const SeptModel & model, Stage stage)
{
  std::vector<ad::NamedTensor> out;
  for (const auto & p : model.params().params()) {
    const bool enc = p.name.rfind("enc.", 0) == 0;
    if (stage == Stage::kPretrain) {
      if (enc || p.name.rfind("pre.", 0) == 0) out.push_back(p);
    } else {
      if ((enc && p.name != "enc.mask_token") || p.name.rfind("dec.", 0) == 0) out.push_back(p);
    }
  }
  return out;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

Trainer::Trainer(const RunConfig & cfg, Stage stage, std::size_t n_train)
  : cfg_(cfg),
    stage_(stage),
    tasks_(TaskSet::parse(cfg.tasks)),
    pcfg_(pretrain_config(cfg)),
    model_((validate(cfg), model_config(cfg)), derive_seed(cfg.seed, {kInitTag, static_cast<std::uint64_t>(stage)})),
    opt_(trainable(model_, stage))
{
  steps_per_epoch_ = std::max<std::int64_t>(1, ceil_div(static_cast<std::int64_t>(n_train), cfg.batch));
  schedule_.base = cfg.lr;
  if (stage == Stage::kPretrain) {
    schedule_.kind = ad::LrSchedule::Kind::kConstant;
  } else {
    schedule_.kind = ad::LrSchedule::Kind::kLinearDecay;
    schedule_.total_steps = std::max<std::int64_t>(1, steps_per_epoch_ * cfg.epochs_ft);
  }
}

double Trainer::lr_at(std::int64_t step) const { return schedule_.at(step); }

void Trainer::load_encoder(const ad::Checkpoint & ckpt)
{
  const auto diffs = differing(manifest_config(ckpt), as_map(cfg_), encoder_keys());
  if (!diffs.empty()) throw CheckpointMismatch(diffs);
  ad::load_params(ckpt, model_.params(), "enc.");
}

std::uint64_t Trainer::scene_stream(std::size_t index) const
{
  return derive_seed(cfg_.seed, {kMaskTag, static_cast<std::uint64_t>(stage_), static_cast<std::uint64_t>(epoch_),
                                 static_cast<std::uint64_t>(index)});
}

Trainer::StepLoss Trainer::step(std::span<const Sample> data, std::span<const std::size_t> batch)
{
  if (batch.empty()) throw std::invalid_argument("Trainer::step: empty batch");
  model_.params().zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  StepLoss out;
  for (const std::size_t idx : batch) {
    const Sample & s = data[idx];
    ad::Tensor loss;
    if (stage_ == Stage::kPretrain) {
      auto l = pretrain_loss(model_, s.features, pcfg_, tasks_, scene_stream(idx));
      out.mtm += l.mtm * inv;
      out.mrm += l.mrm * inv;
      out.tp += l.tp * inv;
      loss = l.total;
    } else {
      if (s.gt.rows() == 0) throw std::invalid_argument("finetuning sample " + s.scene_id + " has no label");
      loss = finetune_loss(model_.forward(s.features), s.gt).total;
    }
    out.total += static_cast<double>(loss.item()) * inv;
    ad::mul_scalar(loss, static_cast<float>(inv)).backward();
  }
  ad::clip_grad_norm(opt_.params(), cfg_.clip);
  opt_.step(static_cast<float>(lr_at(opt_.step_count())));
  return out;
}

std::vector<std::size_t> Trainer::epoch_order(std::size_t n) const
{
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg_.seed, {kOrderTag, static_cast<std::uint64_t>(stage_), static_cast<std::uint64_t>(epoch_)}));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

EpochRecord Trainer::train_epoch(std::span<const Sample> data)
{
  const auto t0 = Clock::now();
  const auto order = epoch_order(data.size());
  EpochRecord rec;
  const auto B = static_cast<std::size_t>(cfg_.batch);
  for (std::size_t i = 0; i < order.size(); i += B) {
    const std::span<const std::size_t> batch(order.data() + i, std::min(B, order.size() - i));
    const auto l = step(data, batch);
    const double w = static_cast<double>(batch.size()) / static_cast<double>(order.size());
    rec.loss += l.total * w;
    rec.mtm += l.mtm * w;
    rec.mrm += l.mrm * w;
    rec.tp += l.tp * w;
  }
  ++epoch_;
  rec.epoch = epoch_;
  rec.wallclock_s = seconds_since(t0);
  return rec;
}

ad::Checkpoint Trainer::checkpoint() const
{
  ad::Checkpoint c;
  c.manifest["format"] = kCkptFormat;
  c.manifest["stage"] = to_string(stage_);
  c.manifest["epoch"] = epoch_;
  c.manifest["adam_step"] = opt_.step_count();
  c.manifest["param_count"] = param_count(model_.config());
  json cfgj = json::object();
  for (auto & [k, v] : to_pairs(cfg_)) cfgj[k] = v;
  c.manifest["config"] = cfgj;
  ad::append_params(c, model_.params());
  ad::append_optimizer(c, opt_);
  return c;
}

void Trainer::restore(const ad::Checkpoint & ckpt)
{
  if (ckpt.manifest.value("format", "") != kCkptFormat) {
    throw ad::CheckpointError("not a training checkpoint");
  }
  if (ckpt.manifest.at("stage").get<std::string>() != to_string(stage_)) {
    throw ad::CheckpointError(std::string("checkpoint stage is ") + ckpt.manifest.at("stage").get<std::string>() +
                              ", expected " + to_string(stage_));
  }
  std::vector<std::string> keys;
  for (auto & [k, v] : to_pairs(cfg_)) {
    if (!restore_exempt(k)) keys.push_back(k);
  }
  const auto diffs = differing(manifest_config(ckpt), as_map(cfg_), keys);
  if (!diffs.empty()) throw CheckpointMismatch(diffs);
  ad::load_params(ckpt, model_.params());
  ad::load_optimizer(ckpt, opt_);
  opt_.set_step_count(ckpt.manifest.at("adam_step").get<std::int64_t>());
  epoch_ = ckpt.manifest.at("epoch").get<int>();
}

MetricSummary evaluate(const SeptModel & model, std::span<const Sample> data)
{
  ad::NoGradGuard guard;
  MetricAccumulator acc;
  for (const auto & s : data) {
    if (s.gt.rows() == 0) continue;
    acc.add(to_values(model.forward(s.features)), s.gt);
  }
  return acc.mean();
}

// ---------------------------------------------------------------------------- stages

namespace
{

constexpr const char * kPretrainLogHeader = "run_id,epoch,loss,mtm,mrm,tp,wallclock_s";

std::string num(double v)
{
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

StageResult run_pretrain(const RunConfig & cfg, const Dataset & data, const LogFn & log)
{
  validate(cfg);
  if (TaskSet::parse(cfg.tasks).empty()) throw NoTasksEnabled();
  const auto samples = pretraining_split(data, cfg.pretrain_splits);
  if (samples.empty()) throw MissingCorpus("pretraining corpus is empty");
  const fs::path out = cfg.out;
  fs::create_directories(out);
  write_text(out / "config.txt", to_text(cfg));

  Trainer tr(cfg, Stage::kPretrain, samples.size());
  const fs::path log_path = out / "pretrain_log.csv";
  std::vector<std::string> log_lines;
  if (!cfg.resume.empty()) {
    tr.restore(ad::read_checkpoint(cfg.resume));
    if (fs::exists(log_path)) {
      std::istringstream in(read_text(log_path));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const int epoch = std::stoi(line.substr(c1 + 1, line.find(',', c1 + 1) - c1 - 1));
        if (epoch <= tr.epochs_done()) log_lines.push_back(line);
      }
    }
  }
  const std::string rid = run_id_of(cfg);
  StageResult res;
  res.checkpoint = out / "pretrain.ckpt";
  while (tr.epochs_done() < cfg.epochs_pre) {
    auto rec = tr.train_epoch(samples);
    log_lines.push_back(rid + "," + std::to_string(rec.epoch) + "," + num(rec.loss) + "," + num(rec.mtm) + "," +
                        num(rec.mrm) + "," + num(rec.tp) + "," + num(rec.wallclock_s));
    std::string text = std::string(kPretrainLogHeader) + "\n";
    for (const auto & l : log_lines) text += l + "\n";
    write_text(log_path, text);
    ad::write_checkpoint(res.checkpoint, tr.checkpoint());
    log_line(log, "pretrain " + rid + " epoch " + std::to_string(rec.epoch) + "/" + std::to_string(cfg.epochs_pre) +
                    " loss " + fmt(rec.loss, 5) + " (mtm " + fmt(rec.mtm, 5) + " mrm " + fmt(rec.mrm, 5) + " tp " +
                    fmt(rec.tp, 5) + ") " + fmt(rec.wallclock_s, 1) + "s");
    res.final_loss = rec.loss;
    res.epochs.push_back(rec);
  }
  if (!fs::exists(res.checkpoint)) ad::write_checkpoint(res.checkpoint, tr.checkpoint());
  return res;
}

StageResult run_finetune(const RunConfig & cfg, const Dataset & data, const LogFn & log)
{
  validate(cfg);
  if (data.train.empty()) throw MissingCorpus("finetuning corpus is empty");
  const fs::path out = cfg.out;
  fs::create_directories(out);
  write_text(out / "config.txt", to_text(cfg));

  Trainer tr(cfg, Stage::kFinetune, data.train.size());
  const fs::path csv = out / "metrics.csv";
  StageResult res;
  res.checkpoint = out / "finetune.ckpt";
  if (!cfg.resume.empty()) {
    tr.restore(ad::read_checkpoint(cfg.resume));
    if (fs::exists(csv)) {
      for (auto & r : read_metric_csv(csv)) {
        if (r.stage == "finetune" && r.epoch <= tr.epochs_done()) res.rows.push_back(r);
      }
    }
  } else if (!cfg.scratch && !cfg.init.empty()) {
    tr.load_encoder(ad::read_checkpoint(cfg.init));
  }
  const std::string rid = run_id_of(cfg);
  while (tr.epochs_done() < cfg.epochs_ft) {
    auto rec = tr.train_epoch(data.train);
    rec.val = evaluate(tr.model(), data.val);
    if (cfg.eval_train) rec.train = evaluate(tr.model(), data.train);
    res.rows.push_back(row_of(cfg, "finetune", rec.epoch, "val", *rec.val, rec.wallclock_s));
    if (rec.train) res.rows.push_back(row_of(cfg, "finetune", rec.epoch, "train", *rec.train, rec.wallclock_s));
    write_metric_csv(csv, res.rows);
    ad::write_checkpoint(res.checkpoint, tr.checkpoint());
    std::string msg = "finetune " + rid + " epoch " + std::to_string(rec.epoch) + "/" + std::to_string(cfg.epochs_ft) +
                      " loss " + fmt(rec.loss, 5) + " val b_minFDE6 " + fmt(rec.val->b_minFDE6) + " minADE6 " +
                      fmt(rec.val->minADE6);
    if (rec.train) msg += " train minADE6 " + fmt(rec.train->minADE6);
    log_line(log, msg + " " + fmt(rec.wallclock_s, 1) + "s");
    res.final_loss = rec.loss;
    res.final_val = rec.val;
    res.epochs.push_back(rec);
  }
  if (!fs::exists(res.checkpoint)) ad::write_checkpoint(res.checkpoint, tr.checkpoint());
  if (!res.final_val) {
    res.final_val = evaluate(tr.model(), data.val);
  }
  write_text(out / "eval_val.txt", "param_count = " + std::to_string(param_count(model_config(cfg))) + "\n" +
                                     metric_record(cfg, "val", *res.final_val) + "\n# config\n" + to_text(cfg));
  return res;
}

MetricSummary run_eval(const RunConfig & cfg, const Dataset & data, const std::string & split, const LogFn & log)
{
  validate(cfg);
  const std::vector<Sample> * samples = nullptr;
  if (split == "train") {
    samples = &data.train;
  } else if (split == "val") {
    samples = &data.val;
  } else if (split == "test") {
    samples = &data.test;
  } else {
    throw ConfigError("eval: unknown split '" + split + "' (train, val or test)");
  }
  const fs::path out = cfg.out;
  const fs::path ckpt_path = cfg.init.empty() ? out / "finetune.ckpt" : fs::path(cfg.init);
  if (!fs::exists(ckpt_path)) throw ad::CheckpointError("no checkpoint at " + ckpt_path.string());
  const auto ckpt = ad::read_checkpoint(ckpt_path);
  std::vector<std::string> keys = encoder_keys();
  for (const char * k : {"k_c", "n_modes", "mlp_hidden", "query_self_attn", "f"}) keys.push_back(k);
  const auto diffs = differing(manifest_config(ckpt), as_map(cfg), keys);
  if (!diffs.empty()) throw CheckpointMismatch(diffs);

  SeptModel model(model_config(cfg), 0);
  ad::load_params(ckpt, model.params(), "enc.");
  ad::load_params(ckpt, model.params(), "dec.");
  const auto t0 = Clock::now();
  const auto m = evaluate(model, *samples);
  const double wall = seconds_since(t0);

  fs::create_directories(out);
  const fs::path csv = out / "metrics.csv";
  std::vector<MetricRow> rows;
  if (fs::exists(csv)) rows = read_metric_csv(csv);
  const int epoch = ckpt.manifest.value("epoch", 0);
  rows.push_back(row_of(cfg, "eval", epoch, split, m, wall));
  write_metric_csv(csv, rows);
  write_text(out / ("eval_" + split + ".txt"), metric_record(cfg, split, m) + "\n# config\n" + to_text(cfg));
  log_line(log, "eval " + split + " b_minFDE6 " + fmt(m.b_minFDE6) + " minADE6 " + fmt(m.minADE6) + " minFDE6 " +
                  fmt(m.minFDE6) + " MR6 " + fmt(m.MR6));
  return m;
}

// ---------------------------------------------------------------------------- ablation

std::vector<AblationRow> aggregate(std::span<const ArmResult> arms)
{
  std::vector<AblationRow> rows;
  for (const auto & subset : all_task_subsets()) {
    std::vector<double> b, ade, fde, mr;
    for (const auto & a : arms) {
      if (a.tasks != subset) continue;
      b.push_back(a.final_val.b_minFDE6);
      ade.push_back(a.final_val.minADE6);
      fde.push_back(a.final_val.minFDE6);
      mr.push_back(a.final_val.MR6);
    }
    if (b.empty()) continue;
    AblationRow r;
    r.tasks = subset;
    r.b_minFDE6 = mean_std(b);
    r.minADE6 = mean_std(ade);
    r.minFDE6 = mean_std(fde);
    r.MR6 = mean_std(mr);
    r.seeds = static_cast<int>(b.size());
    rows.push_back(r);
  }
  return rows;
}

DirectionalChecks directional_checks(std::span<const AblationRow> rows)
{
  DirectionalChecks c;
  const auto find = [&](const TaskSet & t) -> const AblationRow * {
    for (const auto & r : rows) {
      if (r.tasks == t) return &r;
    }
    return nullptr;
  };
  const auto * scratch = find(TaskSet{});
  const auto * all = find(TaskSet::all());
  if (rows.size() != 8 || scratch == nullptr || all == nullptr) {
    c.notes.push_back("incomplete ablation: " + std::to_string(rows.size()) + " of 8 arms");
    return c;
  }
  const double s = scratch->b_minFDE6.mean;
  c.pretrained_le_scratch = true;
  c.all_tasks_best = true;
  c.tp_beats_counterpart = true;
  for (const auto & r : rows) {
    const double v = r.b_minFDE6.mean;
    if (!r.tasks.empty() && v > s) {
      c.pretrained_le_scratch = false;
      c.notes.push_back("(a) " + r.tasks.to_string() + " " + fmt(v) + " > scratch " + fmt(s));
    }
    if (r.tasks != TaskSet::all() && v < all->b_minFDE6.mean) {
      c.all_tasks_best = false;
      c.notes.push_back("(b) " + r.tasks.to_string() + " " + fmt(v) + " < all " + fmt(all->b_minFDE6.mean));
    }
    if (r.tasks.tp) {
      TaskSet other = r.tasks;
      other.tp = false;
      const auto * o = find(other);
      if (o != nullptr && !(v < o->b_minFDE6.mean)) {
        c.tp_beats_counterpart = false;
        c.notes.push_back("(c) " + r.tasks.to_string() + " " + fmt(v) + " >= " + other.to_string() + " " +
                          fmt(o->b_minFDE6.mean));
      }
    }
  }
  return c;
}

std::string ablation_table(std::span<const AblationRow> rows)
{
  const auto cell = [](const MeanStd & v) { return fmt(v.mean) + " +- " + fmt(v.std); };
  std::string s = "| MTM | MRM | TP | b-minFDE6 | minADE6 | minFDE6 | MR6 | seeds |\n";
  s += "|:---:|:---:|:---:|---|---|---|---|---|\n";
  for (const auto & r : rows) {
    s += std::string("| ") + (r.tasks.mtm ? "x" : " ") + " | " + (r.tasks.mrm ? "x" : " ") + " | " +
         (r.tasks.tp ? "x" : " ") + " | " + cell(r.b_minFDE6) + " | " + cell(r.minADE6) + " | " + cell(r.minFDE6) +
         " | " + cell(r.MR6) + " | " + std::to_string(r.seeds) + " |\n";
  }
  return s;
}

std::uint64_t arm_seed(std::uint64_t base, std::size_t subset, int seed_index)
{
  return derive_seed(base, {kArmTag, static_cast<std::uint64_t>(subset), static_cast<std::uint64_t>(seed_index)});
}

namespace
{

// An interrupted stage picks up from its last finished epoch.
bool resumable(const fs::path & ckpt, const RunConfig & cfg)
{
  if (!fs::exists(ckpt)) return false;
  const auto have = manifest_config(ad::read_checkpoint(ckpt));
  std::vector<std::string> keys;
  for (auto & [k, v] : to_pairs(cfg)) {
    if (!restore_exempt(k)) keys.push_back(k);
  }
  return differing(have, as_map(cfg), keys).empty();
}

json arm_to_json(const ArmResult & a, const std::string & config_text)
{
  return {{"tasks", a.tasks.to_string()}, {"seed_index", a.seed_index}, {"seed", a.seed},
          {"final_val", to_json(a.final_val)}, {"curve", a.curve}, {"wallclock_s", a.wallclock_s},
          {"config", config_text}};
}

// Pretrains (unless the task set is empty or scratch), finetunes and evaluates one arm, or
// returns the cached result when <out>/result.json was produced by the same config.
ArmResult run_arm(RunConfig cfg, const Dataset & data, int seed_index, const LogFn & log)
{
  const fs::path out = cfg.out;
  const fs::path result = out / "result.json";
  const std::string text = to_text(cfg);
  if (fs::exists(result)) {
    const auto j = json::parse(read_text(result));
    if (j.value("config", "") == text) {
      ArmResult a;
      a.tasks = TaskSet::parse(j.at("tasks").get<std::string>());
      a.seed_index = j.at("seed_index").get<int>();
      a.seed = j.at("seed").get<std::uint64_t>();
      a.final_val = summary_from_json(j.at("final_val"));
      a.curve = j.at("curve").get<std::vector<double>>();
      a.wallclock_s = j.at("wallclock_s").get<double>();
      log_line(log, "reusing " + result.string());
      return a;
    }
  }
  const auto t0 = Clock::now();
  ArmResult a;
  a.tasks = TaskSet::parse(cfg.tasks);
  a.seed_index = seed_index;
  a.seed = cfg.seed;
  RunConfig pre = cfg;
  pre.out = (out / "pre").string();
  pre.resume.clear();
  RunConfig ft = cfg;
  ft.out = (out / "ft").string();
  ft.resume.clear();
  if (!a.tasks.empty() && !cfg.scratch) {
    const fs::path ckpt = fs::path(pre.out) / "pretrain.ckpt";
    if (resumable(ckpt, pre)) pre.resume = ckpt.string();
    run_pretrain(pre, data, log);
    ft.init = ckpt.string();
  } else {
    ft.scratch = true;
  }
  if (resumable(fs::path(ft.out) / "finetune.ckpt", ft)) ft.resume = (fs::path(ft.out) / "finetune.ckpt").string();
  const auto res = run_finetune(ft, data, log);
  a.final_val = *res.final_val;
  for (const auto & r : res.rows) {
    if (r.split == "val") a.curve.push_back(r.m.b_minFDE6);
  }
  a.wallclock_s = seconds_since(t0);
  write_text(result, arm_to_json(a, text).dump(2) + "\n");
  return a;
}

RunConfig arm_config(const RunConfig & base, const TaskSet & tasks, std::uint64_t seed, const fs::path & out)
{
  RunConfig c = base;
  c.tasks = tasks.empty() ? "none" : tasks.to_string();
  c.scratch = tasks.empty();
  c.seed = seed;
  c.out = out.string();
  c.init.clear();
  c.resume.clear();
  c.corpus.clear();
  // fields that only steer the driver, so that an arm's config is the same however it is launched
  c.n_seeds = 1;
  c.arms.clear();
  return c;
}

}  // namespace

AblationReport run_ablation(const RunConfig & cfg, const Dataset & data, const LogFn & log)
{
  validate(cfg);
  const fs::path root = cfg.out;
  fs::create_directories(root);
  write_text(root / "config.txt", to_text(cfg));
  const auto subsets = all_task_subsets();
  std::vector<TaskSet> wanted;
  {
    std::stringstream ss(cfg.arms);
    std::string arm;
    while (std::getline(ss, arm, ';')) wanted.push_back(TaskSet::parse(arm));
  }
  AblationReport rep;
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), subsets[i]) == wanted.end()) continue;
    for (int k = 0; k < cfg.n_seeds; ++k) {
      const auto arm = arm_config(cfg, subsets[i], arm_seed(cfg.seed, i, k),
                                  root / "arms" / arm_dir_name(subsets[i]) / ("seed" + std::to_string(k)));
      log_line(log, "arm " + subsets[i].to_string() + " seed " + std::to_string(k));
      rep.arms.push_back(run_arm(arm, data, k, log));
      rep.wallclock_s += rep.arms.back().wallclock_s;
    }
  }
  rep.rows = aggregate(rep.arms);
  rep.checks = directional_checks(rep.rows);

  const auto table = ablation_table(rep.rows);
  write_text(root / "ablation_table.md", table);

  std::vector<MetricRow> rows;
  for (const auto & a : rep.arms) {
    const fs::path csv = root / "arms" / arm_dir_name(a.tasks) / ("seed" + std::to_string(a.seed_index)) / "ft" /
                         "metrics.csv";
    if (fs::exists(csv)) {
      for (auto & r : read_metric_csv(csv)) rows.push_back(r);
    }
  }
  write_metric_csv(root / "metrics.csv", rows);

  std::vector<Curve> curves;
  for (const auto & r : rep.rows) {
    Curve c;
    c.label = r.tasks.to_string();
    c.dashed = !r.tasks.tp;
    std::size_t n = 0;
    for (const auto & a : rep.arms) {
      if (a.tasks == r.tasks) n = std::max(n, a.curve.size());
    }
    c.y.assign(n, 0.0);
    std::vector<int> counts(n, 0);
    for (const auto & a : rep.arms) {
      if (a.tasks != r.tasks) continue;
      for (std::size_t e = 0; e < a.curve.size(); ++e) {
        c.y[e] += a.curve[e];
        ++counts[e];
      }
    }
    for (std::size_t e = 0; e < n; ++e) c.y[e] /= std::max(1, counts[e]);
    curves.push_back(std::move(c));
  }
  write_text(root / "ablation_curves.svg", curves_svg(curves, "val b-minFDE6 (m)"));

  json summary;
  summary["n_scenes"] = cfg.n_scenes;
  summary["n_train"] = data.train.size();
  summary["n_val"] = data.val.size();
  summary["n_seeds"] = cfg.n_seeds;
  summary["epochs_pre"] = cfg.epochs_pre;
  summary["epochs_ft"] = cfg.epochs_ft;
  summary["param_count"] = param_count(model_config(cfg));
  summary["wallclock_s"] = rep.wallclock_s;
  summary["config"] = to_text(cfg);
  summary["config_fingerprint"] = fingerprint(cfg);
  json jrows = json::array();
  for (const auto & r : rep.rows) {
    jrows.push_back({{"tasks", r.tasks.to_string()}, {"seeds", r.seeds}, {"b_minFDE6", to_json(r.b_minFDE6)},
                     {"minADE6", to_json(r.minADE6)}, {"minFDE6", to_json(r.minFDE6)}, {"MR6", to_json(r.MR6)}});
  }
  summary["rows"] = jrows;
  summary["checks"] = {{"pretrained_le_scratch", rep.checks.pretrained_le_scratch},
                       {"all_tasks_best", rep.checks.all_tasks_best},
                       {"tp_beats_counterpart", rep.checks.tp_beats_counterpart},
                       {"notes", rep.checks.notes}};
  write_text(root / "ablation_summary.json", summary.dump(2) + "\n");
  log_line(log, "\n" + table);
  return rep;
}

// ---------------------------------------------------------------------------- sweep

std::vector<std::string> sweep_values(const RunConfig & cfg)
{
  const std::string & key = cfg.sweep_task;
  if (key != "p_mtm" && key != "p_mrm" && key != "t_h") {
    throw ConfigError("sweep: sweep_task must be p_mtm, p_mrm or t_h, got '" + key + "'");
  }
  std::vector<std::string> values;
  std::stringstream ss(cfg.sweep_values);
  std::string v;
  while (std::getline(ss, v, ',')) {
    const auto b = v.find_first_not_of(' ');
    const auto e = v.find_last_not_of(' ');
    if (b == std::string::npos) throw ConfigError("sweep: empty value in '" + cfg.sweep_values + "'");
    v = v.substr(b, e - b + 1);
    RunConfig probe = cfg;
    set_field(probe, key, v);
    if (key == "t_h") {
      if (probe.t_h < 1 || probe.t_h >= probe.t) {
        throw ConfigError("sweep: t_h = " + v + " outside [1, " + std::to_string(probe.t - 1) + "]");
      }
    } else {
      const double p = key == "p_mtm" ? probe.p_mtm : probe.p_mrm;
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sweep: " + key + " = " + v + " outside [0, 1]");
    }
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError("sweep: no values");
  return values;
}

std::vector<SweepRecord> run_sweep(const RunConfig & cfg, const Dataset & data, const LogFn & log)
{
  validate(cfg);
  const auto values = sweep_values(cfg);
  TaskSet task;
  if (cfg.sweep_task == "p_mtm") task.mtm = true;
  if (cfg.sweep_task == "p_mrm") task.mrm = true;
  if (cfg.sweep_task == "t_h") task.tp = true;
  const fs::path root = cfg.out;
  fs::create_directories(root);
  write_text(root / "config.txt", to_text(cfg));

  std::vector<SweepRecord> records;
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::vector<MetricSummary> finals;
    for (int k = 0; k < cfg.n_seeds; ++k) {
      // the seed depends on the seed index only, so every value sees the same init and order
      auto arm = arm_config(cfg, task, derive_seed(cfg.seed, {kSweepTag, static_cast<std::uint64_t>(k)}),
                            root / ("sweep_" + cfg.sweep_task) / ("v" + std::to_string(i)) / ("seed" + std::to_string(k)));
      set_field(arm, cfg.sweep_task, values[i]);
      log_line(log, "sweep " + cfg.sweep_task + " = " + values[i] + " seed " + std::to_string(k));
      finals.push_back(run_arm(arm, data, k, log).final_val);
    }
    SweepRecord r;
    r.task = cfg.sweep_task;
    r.value = values[i];
    r.seeds = static_cast<int>(finals.size());
    for (const auto & m : finals) {
      r.mean.b_minFDE6 += m.b_minFDE6 / r.seeds;
      r.mean.minADE6 += m.minADE6 / r.seeds;
      r.mean.minFDE6 += m.minFDE6 / r.seeds;
      r.mean.MR6 += m.MR6 / r.seeds;
      r.mean.minADE1 += m.minADE1 / r.seeds;
      r.mean.minFDE1 += m.minFDE1 / r.seeds;
      r.mean.MR1 += m.MR1 / r.seeds;
      r.mean.scenes = m.scenes;
    }
    records.push_back(r);
  }
  std::string csv = "task,value,seeds,b_minFDE6,minADE6,minFDE6,MR6,minADE1,minFDE1,MR1\n";
  for (const auto & r : records) {
    csv += r.task + "," + r.value + "," + std::to_string(r.seeds) + "," + num(r.mean.b_minFDE6) + "," +
           num(r.mean.minADE6) + "," + num(r.mean.minFDE6) + "," + num(r.mean.MR6) + "," + num(r.mean.minADE1) + "," +
           num(r.mean.minFDE1) + "," + num(r.mean.MR1) + "\n";
  }
  write_text(root / ("sweep_" + cfg.sweep_task + ".csv"), csv);
  return records;
}

// ---------------------------------------------------------------------------- report

void run_report(const RunConfig & cfg, const Dataset & data, const LogFn & log)
{
  const fs::path out = cfg.out;
  const fs::path dir = out / "report";
  fs::create_directories(dir);
  std::vector<MetricRow> rows;
  if (fs::exists(out / "metrics.csv")) rows = read_metric_csv(out / "metrics.csv");
  write_metric_csv(dir / "metrics.csv", rows);

  std::ostringstream md;
  md << "# Run report\n\n";
  md << "param_count = " << param_count(model_config(cfg)) << "\n";
  md << "config_fingerprint = " << fingerprint(cfg) << "\n";
  md << "metric rows = " << rows.size() << "\n";
  if (fs::exists(out / "ablation_table.md")) md << "\n## Ablation\n\n" << read_text(out / "ablation_table.md");

  const fs::path ckpt_path = out / "finetune.ckpt";
  int written = 0;
  if (fs::exists(ckpt_path) && cfg.svg_scenes > 0) {
    const auto ckpt = ad::read_checkpoint(ckpt_path);
    const auto diffs = differing(manifest_config(ckpt), as_map(cfg), encoder_keys());
    if (!diffs.empty()) throw CheckpointMismatch(diffs);
    SeptModel model(model_config(cfg), 0);
    ad::load_params(ckpt, model.params(), "enc.");
    ad::load_params(ckpt, model.params(), "dec.");
    ad::NoGradGuard guard;
    const auto frame = make_frame(60.0, 600.0);
    for (const auto & s : data.val) {
      if (written >= cfg.svg_scenes) break;
      const auto pred = to_values(model.forward(s.features));
      write_text(dir / (s.scene_id + ".svg"), scene_svg(s.prepared, pred, frame, s.scene_id));
      md << "\n![" << s.scene_id << "](" << s.scene_id << ".svg)\n";
      ++written;
    }
  }
  md << "\n## Config\n\n```\n" << to_text(cfg) << "```\n";
  write_text(dir / "report.md", md.str());
  log_line(log, "report: " + std::to_string(rows.size()) + " metric rows, " + std::to_string(written) + " svg scenes in " +
                  dir.string());
}

}  // namespace scenept
