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

#include "scenept/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "scenept/rng.hpp"

namespace scenept
{

TaskSet TaskSet::parse(const std::string & text)
{
  TaskSet t;
  if (text.empty() || text == "none") return t;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "mtm") {
      t.mtm = true;
    } else if (item == "mrm") {
      t.mrm = true;
    } else if (item == "tp") {
      t.tp = true;
    } else {
      throw std::invalid_argument("unknown task '" + item + "' (expected mtm, mrm, tp)");
    }
  }
  return t;
}

std::string TaskSet::to_string() const
{
  std::string s;
  const auto add = [&](bool on, const char * name) {
    if (!on) return;
    if (!s.empty()) s += ",";
    s += name;
  };
  add(mtm, "mtm");
  add(mrm, "mrm");
  add(tp, "tp");
  return s.empty() ? "none" : s;
}

std::vector<TaskSet> all_task_subsets()
{
  return {
    {false, false, false}, {true, false, false}, {false, true, false}, {false, false, true},
    {true, true, false},   {true, false, true},  {false, true, true},  {true, true, true},
  };
}

void validate(const PretrainConfig & cfg)
{
  if (!(cfg.p_mtm >= 0.0 && cfg.p_mtm <= 1.0)) throw std::invalid_argument("p_mtm must be in [0, 1]");
  if (!(cfg.p_mrm >= 0.0 && cfg.p_mrm <= 1.0)) throw std::invalid_argument("p_mrm must be in [0, 1]");
  if (cfg.T_h < 1) throw std::invalid_argument("T_h must be >= 1");
  if (cfg.k_tp < 1) throw std::invalid_argument("k_tp must be >= 1");
  if (cfg.min_len_mtm < 1) throw std::invalid_argument("min_len_mtm must be >= 1");
}

Rng task_stream(std::uint64_t scene_seed, int which)
{
  return Rng(derive_seed(scene_seed, {static_cast<std::uint64_t>(which)}));
}

MtmMask mtm_mask(const SceneFeatures & f, double p, int min_len, Rng & rng)
{
  MtmMask m;
  m.positions = MatrixRf::Zero(f.A, f.T);
  m.targets = f.agents.leftCols(kAgentContinuous);
  std::bernoulli_distribution coin(p);
  for (int a = 0; a < f.A; ++a) {
    if (f.agent_mask.row(a).sum() < static_cast<float>(min_len)) continue;
    for (int t = 0; t < f.T; ++t) {
      if (f.agent_mask(a, t) == 0.0f) continue;
      if (coin(rng)) {
        m.positions(a, t) = 1.0f;
        ++m.count;
      }
    }
  }
  return m;
}

MrmMask mrm_mask(const MatrixRf & roads, double p, Rng & rng)
{
  MrmMask m;
  const auto S = roads.rows();
  m.roads = roads;
  m.positions = MatrixRf::Zero(S, 1);
  m.targets = roads.leftCols(kRoadContinuous);
  std::bernoulli_distribution coin(p);
  for (Eigen::Index i = 0; i < S; ++i) {
    if (!coin(rng)) continue;
    m.roads.row(i).tail(roads.cols() - 2).setZero();
    m.positions(i, 0) = 1.0f;
    ++m.count;
  }
  return m;
}

TpSplit tp_split(const SceneFeatures & f, int T_h, int k_tp)
{
  if (T_h >= f.T) {
    throw HeadTooLong("HeadTooLong: T_h = " + std::to_string(T_h) + " must be below T = " + std::to_string(f.T));
  }
  TpSplit s;
  s.tail_len = f.T - T_h;
  s.head.A = f.A;
  s.head.T = T_h;
  s.head.S = f.S;
  s.head.roads = f.roads;
  s.head.agents = MatrixRf::Zero(f.A * T_h, f.agents.cols());
  s.head.agent_mask = MatrixRf::Zero(f.A, T_h);
  s.included = MatrixRf::Zero(f.A, 1);
  s.tail = MatrixRf::Zero(f.A * s.tail_len, 2);
  s.tail_mask = MatrixRf::Zero(f.A * s.tail_len, 1);
  for (int a = 0; a < f.A; ++a) {
    std::vector<int> valid;
    for (int t = 0; t < f.T; ++t)
      if (f.agent_mask(a, t) != 0.0f) valid.push_back(t);
    const int n = static_cast<int>(valid.size());
    const int h = std::min(n, T_h);
    for (int k = 0; k < h; ++k) {
      const int slot = T_h - h + k;
      s.head.agents.row(a * T_h + slot) = f.agents.row(a * f.T + valid[k]);
      s.head.agent_mask(a, slot) = 1.0f;
    }
    const bool include = n >= k_tp * T_h;
    if (!include) continue;
    s.included(a, 0) = 1.0f;
    ++s.included_count;
    for (int k = T_h; k < n; ++k) {
      const int row = a * s.tail_len + (k - T_h);
      s.tail(row, 0) = f.agents(a * f.T + valid[k], 0);
      s.tail(row, 1) = f.agents(a * f.T + valid[k], 1);
      s.tail_mask(row, 0) = 1.0f;
    }
  }
  return s;
}

template <class S>
ad::BasicTensor<S> mtm_loss(const BasicSeptModel<S> & model, const SceneFeatures & f, const MtmMask & mask)
{
  using Tensor = ad::BasicTensor<S>;
  if (mask.count == 0) return Tensor::scalar(S(0));
  const auto D = model.config().D;
  const auto m = to_tensor<S>(mask.positions, {f.A, f.T, 1});
  const auto emb = model.project_agents(to_tensor<S>(f.agents, {f.A, f.T, f.agents.cols()}));
  const auto mixed = emb * (Tensor::full({1}, S(1)) - m) + ad::reshape(model.mask_token(), {1, 1, D}) * m;
  const auto tempo = model.tempo_encode(mixed, to_tensor<S>(f.agent_mask, {f.A, f.T}));
  const auto pred = apply(model.mtm_decoder(), tempo.hidden);
  return ad::masked_mse(pred, to_tensor<S>(mask.targets, {f.A, f.T, kAgentContinuous}), m);
}

namespace
{

template <class S>
ad::BasicTensor<S> agent_validity(int S_roads, const ad::BasicTensor<S> & tempo_valid)
{
  if (S_roads == 0) return tempo_valid;
  return ad::concat({tempo_valid, ad::BasicTensor<S>::full({S_roads}, S(1))}, 0);
}

}  // namespace

template <class S>
ad::BasicTensor<S> mrm_loss(const BasicSeptModel<S> & model, const SceneFeatures & f, const MrmMask & mask)
{
  using Tensor = ad::BasicTensor<S>;
  if (mask.count == 0 || f.S == 0) return Tensor::scalar(S(0));
  const auto tempo = model.tempo_encode(
    model.project_agents(to_tensor<S>(f.agents, {f.A, f.T, f.agents.cols()})), to_tensor<S>(f.agent_mask, {f.A, f.T}));
  const auto roads = model.project_roads(to_tensor<S>(mask.roads, {f.S, mask.roads.cols()}));
  const auto validity = agent_validity<S>(f.S, tempo.valid);
  const auto memory = model.spa_encode(tempo.tokens, roads, validity);
  const auto pred = apply(model.mrm_decoder(), ad::slice(memory, 0, f.A, f.A + f.S));
  return ad::masked_mse(pred, to_tensor<S>(mask.targets, {f.S, kRoadContinuous}), to_tensor<S>(mask.positions, {f.S, 1}));
}

template <class S>
ad::BasicTensor<S> tp_loss(const BasicSeptModel<S> & model, const TpSplit & split)
{
  using Tensor = ad::BasicTensor<S>;
  if (split.included_count == 0) return Tensor::scalar(S(0));
  if (split.tail_len != model.config().tp_tail) {
    throw ad::ShapeError(
      "tp_loss: tail length " + std::to_string(split.tail_len) + " differs from the TP decoder's " +
      std::to_string(model.config().tp_tail));
  }
  const auto & h = split.head;
  const auto tempo = model.tempo_encode(
    model.project_agents(to_tensor<S>(h.agents, {h.A, h.T, h.agents.cols()})), to_tensor<S>(h.agent_mask, {h.A, h.T}));
  Tensor roads;
  if (h.S > 0) roads = model.project_roads(to_tensor<S>(h.roads, {h.S, h.roads.cols()}));
  const auto validity = agent_validity<S>(h.S, tempo.valid);
  const auto memory = model.spa_encode(tempo.tokens, roads, validity);
  const auto pred = ad::reshape(apply(model.tp_decoder(), ad::slice(memory, 0, 0, h.A)), {h.A, split.tail_len, 2});
  return ad::masked_mse(
    pred, to_tensor<S>(split.tail, {h.A, split.tail_len, 2}), to_tensor<S>(split.tail_mask, {h.A, split.tail_len, 1}));
}

template <class S>
BasicPretrainLoss<S> pretrain_loss(
  const BasicSeptModel<S> & model, const SceneFeatures & f, const PretrainConfig & cfg, const TaskSet & tasks,
  std::uint64_t scene_seed)
{
  if (tasks.empty()) throw NoTasksEnabled();
  BasicPretrainLoss<S> out;
  std::vector<ad::BasicTensor<S>> parts;
  if (tasks.mtm) {
    auto rng = task_stream(scene_seed, 0);
    parts.push_back(mtm_loss(model, f, mtm_mask(f, cfg.p_mtm, cfg.min_len_mtm, rng)));
    out.mtm = parts.back().item();
  }
  if (tasks.mrm) {
    auto rng = task_stream(scene_seed, 1);
    parts.push_back(mrm_loss(model, f, mrm_mask(f.roads, cfg.p_mrm, rng)));
    out.mrm = parts.back().item();
  }
  if (tasks.tp) {
    parts.push_back(tp_loss(model, tp_split(f, cfg.T_h, cfg.k_tp)));
    out.tp = parts.back().item();
  }
  out.total = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out.total = out.total + parts[i];
  return out;
}

namespace
{

double ade(const Eigen::MatrixX2d & a, const Eigen::MatrixX2d & b) { return (a - b).rowwise().norm().mean(); }

double fde(const Eigen::MatrixX2d & a, const Eigen::MatrixX2d & b)
{
  return (a.row(a.rows() - 1) - b.row(b.rows() - 1)).norm();
}

}  // namespace

template <class S>
PredictionValues to_values(const BasicPrediction<S> & pred)
{
  PredictionValues v;
  const auto N = pred.trajectories.dim(0);
  const auto F = pred.trajectories.dim(1);
  const auto t = pred.trajectories.values();
  for (std::int64_t i = 0; i < N; ++i) {
    Eigen::MatrixX2d m(F, 2);
    for (std::int64_t k = 0; k < F; ++k) {
      m(k, 0) = static_cast<double>(t[(i * F + k) * 2]);
      m(k, 1) = static_cast<double>(t[(i * F + k) * 2 + 1]);
    }
    v.trajectories.push_back(std::move(m));
  }
  v.scores.resize(N);
  for (std::int64_t i = 0; i < N; ++i) v.scores(i) = static_cast<double>(pred.scores.values()[i]);
  return v;
}

template <class S>
BasicFinetuneLoss<S> finetune_loss(const BasicPrediction<S> & pred, const Eigen::MatrixX2d & gt)
{
  using Tensor = ad::BasicTensor<S>;
  const auto N = pred.trajectories.dim(0);
  const auto F = pred.trajectories.dim(1);
  if (gt.rows() != F) {
    throw ad::ShapeError("finetune_loss: ground truth has " + std::to_string(gt.rows()) + " frames, predictions " + std::to_string(F));
  }
  const auto values = to_values(pred);
  BasicFinetuneLoss<S> out;
  double best = std::numeric_limits<double>::infinity();
  for (std::int64_t i = 0; i < N; ++i) {
    const double d = ade(values.trajectories[i], gt);
    if (d < best) {
      best = d;
      out.winner = static_cast<int>(i);
    }
  }
  std::vector<S> g(static_cast<std::size_t>(F * 2));
  for (std::int64_t k = 0; k < F; ++k) {
    g[k * 2] = static_cast<S>(gt(k, 0));
    g[k * 2 + 1] = static_cast<S>(gt(k, 1));
  }
  const auto tj = ad::reshape(ad::slice(pred.trajectories, 0, out.winner, out.winner + 1), {F, 2});
  out.reg = ad::l1_loss(tj, Tensor::from({F, 2}, std::move(g)));
  std::vector<S> onehot(static_cast<std::size_t>(N), S(0));
  onehot[out.winner] = S(1);
  out.cls = ad::binary_cross_entropy(pred.scores, Tensor::from({N}, std::move(onehot)), ad::Reduction::kSum, 1e-7);
  out.total = out.reg + out.cls;
  return out;
}

SceneMetrics metrics(const PredictionValues & pred, const Eigen::MatrixX2d & gt, int k)
{
  const int N = static_cast<int>(pred.trajectories.size());
  if (k < 1 || k > N) {
    throw std::invalid_argument("metrics: k = " + std::to_string(k) + " outside [1, N = " + std::to_string(N) + "]");
  }
  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return pred.scores(a) > pred.scores(b); });
  order.resize(k);
  std::sort(order.begin(), order.end());
  SceneMetrics m;
  double best = std::numeric_limits<double>::infinity();
  for (int i : order) {
    const double d = fde(pred.trajectories[i], gt);
    if (d < best) {
      best = d;
      m.best = i;
    }
  }
  m.minFDE = best;
  m.minADE = ade(pred.trajectories[m.best], gt);
  m.MR = m.minFDE > kMissThreshold ? 1.0 : 0.0;
  const double miss = 1.0 - pred.scores(m.best);
  m.b_minFDE = m.minFDE + miss * miss;
  return m;
}

void MetricAccumulator::add(const PredictionValues & pred, const Eigen::MatrixX2d & gt)
{
  const int N = static_cast<int>(pred.trajectories.size());
  const auto six = metrics(pred, gt, std::min(6, N));
  const auto one = metrics(pred, gt, 1);
  sum_.b_minFDE6 += six.b_minFDE;
  sum_.minADE6 += six.minADE;
  sum_.minFDE6 += six.minFDE;
  sum_.MR6 += six.MR;
  sum_.minADE1 += one.minADE;
  sum_.minFDE1 += one.minFDE;
  sum_.MR1 += one.MR;
  ++sum_.scenes;
}

MetricSummary MetricAccumulator::mean() const
{
  MetricSummary m = sum_;
  if (m.scenes == 0) return m;
  const double n = static_cast<double>(m.scenes);
  for (double * v : {&m.b_minFDE6, &m.minADE6, &m.minFDE6, &m.MR6, &m.minADE1, &m.minFDE1, &m.MR1}) *v /= n;
  return m;
}

#define SCENEPT_INSTANTIATE_TASKS(S)                                                                          \
  template ad::BasicTensor<S> mtm_loss(const BasicSeptModel<S> &, const SceneFeatures &, const MtmMask &);     \
  template ad::BasicTensor<S> mrm_loss(const BasicSeptModel<S> &, const SceneFeatures &, const MrmMask &);     \
  template ad::BasicTensor<S> tp_loss(const BasicSeptModel<S> &, const TpSplit &);                            \
  template BasicPretrainLoss<S> pretrain_loss(                                                                 \
    const BasicSeptModel<S> &, const SceneFeatures &, const PretrainConfig &, const TaskSet &, std::uint64_t); \
  template PredictionValues to_values(const BasicPrediction<S> &);                                            \
  template BasicFinetuneLoss<S> finetune_loss(const BasicPrediction<S> &, const Eigen::MatrixX2d &);

SCENEPT_INSTANTIATE_TASKS(float)
SCENEPT_INSTANTIATE_TASKS(double)

}  // namespace scenept
