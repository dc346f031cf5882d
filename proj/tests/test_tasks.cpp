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
#include <random>

#include "bridge.hpp"
#include "gradcheck.hpp"
#include "model_fixtures.hpp"
#include "oracles.hpp"
#include "scenept/optim.hpp"
#include "scenept/tasks.hpp"

using namespace scenept;

namespace
{

// Decoder that ignores its input and emits `value` everywhere.
template <class S>
void make_constant(const BasicMlp<S> & mlp, double value)
{
  auto w = mlp.out.w;
  auto b = mlp.out.b;
  for (auto & v : w.mutable_values()) v = S(0);
  for (auto & v : b.mutable_values()) v = static_cast<S>(value);
}

template <class S>
void set_bias(const BasicMlp<S> & mlp, const std::vector<double> & values)
{
  auto w = mlp.out.w;
  auto b = mlp.out.b;
  for (auto & v : w.mutable_values()) v = S(0);
  for (std::size_t i = 0; i < values.size(); ++i) b.mutable_values()[i] = static_cast<S>(values[i]);
}

SceneFeatures full_features(int A, int T, int S, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  auto f = testing::random_features(A, T, S, rng);
  // every agent fully valid
  for (int a = 0; a < A; ++a) {
    for (int t = 0; t < T; ++t) {
      auto row = f.agents.row(a * T + t);
      if (f.agent_mask(a, t) == 0.0f) {
        row(0) = 0.5f * static_cast<float>(t);
        row(1) = -0.25f;
        row(2) = -0.1f * static_cast<float>(T - 1 - t);
        row(3) = 1.0f;
        row(7) = 1.0f;
      }
      f.agent_mask(a, t) = 1.0f;
    }
  }
  return f;
}

}  // namespace

TEST_CASE("task sets parse, print and enumerate all eight subsets")
{
  CHECK(TaskSet::parse("tp,mtm") == TaskSet{true, false, true});
  CHECK(TaskSet::parse("none").empty());
  CHECK(TaskSet::all().to_string() == "mtm,mrm,tp");
  CHECK(TaskSet{}.to_string() == "none");
  CHECK_THROWS_AS((void)TaskSet::parse("mtm,foo"), std::invalid_argument);
  const auto subsets = all_task_subsets();
  CHECK(subsets.size() == 8);
  for (std::size_t i = 0; i < subsets.size(); ++i)
    for (std::size_t j = i + 1; j < subsets.size(); ++j) CHECK(!(subsets[i] == subsets[j]));
}

TEST_CASE("MTM masking boundaries and eligibility")
{
  std::mt19937_64 rng(1);
  auto f = testing::random_features(6, 10, 3, rng);
  Rng r(3);
  CHECK(mtm_mask(f, 0.0, 5, r).count == 0);
  const auto all = mtm_mask(f, 1.0, 5, r);
  for (int a = 0; a < f.A; ++a) {
    const float n = f.agent_mask.row(a).sum();
    for (int t = 0; t < f.T; ++t) {
      const bool expect = n >= 5.0f && f.agent_mask(a, t) != 0.0f;
      CHECK((all.positions(a, t) == 1.0f) == expect);
    }
  }
}

TEST_CASE("MTM selection ratio at p = 0.5 is within 3 sigma over 10,000 frames")
{
  std::mt19937_64 rng(2);
  Rng r(7);
  long n = 0;
  long k = 0;
  while (n < 10'000) {
    const auto f = testing::random_features(8, 20, 1, rng);
    const auto m = mtm_mask(f, 0.5, 5, r);
    for (int a = 0; a < f.A; ++a)
      if (f.agent_mask.row(a).sum() >= 5.0f) n += static_cast<long>(f.agent_mask.row(a).sum());
    k += m.count;
  }
  const double sigma = std::sqrt(n * 0.25);
  CHECK(std::abs(k - 0.5 * n) <= 3.0 * sigma);
}

TEST_CASE("MTM loss: zero without masked frames, zero for an exact decoder, closed form for a constant decoder")
{
  auto cfg = testing::small_config(16, 6, 2);
  SeptModelD m(cfg, 3);
  auto f = full_features(2, cfg.T, 3, 4);

  Rng r(1);
  const auto none = mtm_mask(f, 0.0, 5, r);
  const auto zero = mtm_loss(m, f, none);
  CHECK(zero.item() == 0.0);
  CHECK(!zero.requires_grad());

  MtmMask two;
  two.positions = MatrixRf::Zero(f.A, f.T);
  two.positions(0, 2) = 1.0f;
  two.positions(1, 5) = 1.0f;
  two.targets = f.agents.leftCols(kAgentContinuous);
  two.count = 2;
  make_constant(m.mtm_decoder(), 0.3);
  const double loss = mtm_loss(m, f, two).item();
  double expect = 0.0;
  for (int c = 0; c < 3; ++c) {
    expect += std::pow(0.3 - static_cast<double>(f.agents(0 * cfg.T + 2, c)), 2.0);
    expect += std::pow(0.3 - static_cast<double>(f.agents(1 * cfg.T + 5, c)), 2.0);
  }
  CHECK(loss == doctest::Approx(expect / 6.0).epsilon(1e-12));

  MtmMask one = two;
  one.positions(1, 5) = 0.0f;
  one.count = 1;
  set_bias(m.mtm_decoder(), {f.agents(2, 0), f.agents(2, 1), f.agents(2, 2)});
  CHECK(mtm_loss(m, f, one).item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("MRM keeps the start point bitwise and zeroes everything else")
{
  std::mt19937_64 rng(5);
  const auto f = testing::random_features(1, 4, 400, rng);
  Rng r(2);
  CHECK(mrm_mask(f.roads, 0.0, r).roads == f.roads);
  const auto m = mrm_mask(f.roads, 0.5, r);
  for (int i = 0; i < f.S; ++i) {
    if (m.positions(i, 0) == 1.0f) {
      CHECK(m.roads(i, 0) == f.roads(i, 0));
      CHECK(m.roads(i, 1) == f.roads(i, 1));
      for (int c = 2; c < kDr; ++c) CHECK(m.roads(i, c) == 0.0f);
    } else {
      CHECK(m.roads.row(i) == f.roads.row(i));
    }
    for (int c = 0; c < kRoadContinuous; ++c) CHECK(m.targets(i, c) == f.roads(i, c));
  }
}

TEST_CASE("MRM selection ratio at p = 0.5 is within 3 sigma over 10,000 vectors")
{
  std::mt19937_64 rng(6);
  const auto f = testing::random_features(1, 2, 10'000, rng);
  Rng r(11);
  const auto m = mrm_mask(f.roads, 0.5, r);
  CHECK(std::abs(m.count - 5000.0) <= 3.0 * std::sqrt(2500.0));
}

TEST_CASE("MRM loss: zero without masked vectors, closed form for a constant decoder")
{
  auto cfg = testing::small_config(16, 6, 2);
  SeptModelD m(cfg, 8);
  std::mt19937_64 rng(3);
  const auto f = testing::random_features(2, cfg.T, 5, rng);
  Rng r(1);
  CHECK(mrm_loss(m, f, mrm_mask(f.roads, 0.0, r)).item() == 0.0);

  MrmMask two;
  two.roads = f.roads;
  two.positions = MatrixRf::Zero(f.S, 1);
  two.targets = f.roads.leftCols(kRoadContinuous);
  for (int i : {1, 3}) {
    two.positions(i, 0) = 1.0f;
    two.roads.row(i).tail(kDr - 2).setZero();
  }
  two.count = 2;
  make_constant(m.mrm_decoder(), -0.2);
  double expect = 0.0;
  for (int i : {1, 3})
    for (int c = 0; c < kRoadContinuous; ++c) expect += std::pow(-0.2 - static_cast<double>(f.roads(i, c)), 2.0);
  CHECK(mrm_loss(m, f, two).item() == doctest::Approx(expect / 10.0).epsilon(1e-12));
}

TEST_CASE("TP split: head, tail length and the exclusion rule")
{
  SceneFeatures f = full_features(3, 20, 2, 1);
  // agent 1 keeps only its last 10 frames
  for (int t = 0; t < 10; ++t) {
    f.agent_mask(1, t) = 0.0f;
    f.agents.row(20 + t).setZero();
  }
  const auto s = tp_split(f, 8, 2);
  CHECK(s.tail_len == 12);
  CHECK(s.included(0, 0) == 1.0f);
  CHECK(s.included(1, 0) == 0.0f);  // 10 < 16
  CHECK(s.included_count == 2);
  for (int k = 0; k < 12; ++k) {
    CHECK(s.tail_mask(0 * 12 + k, 0) == 1.0f);
    CHECK(s.tail(0 * 12 + k, 0) == f.agents(8 + k, 0));
  }
  // head of agent 1: its first 8 valid frames, frames 10..17
  for (int k = 0; k < 8; ++k) CHECK(s.head.agents.row(8 + k) == f.agents.row(20 + 10 + k));
  CHECK_THROWS_AS((void)tp_split(f, 20, 2), HeadTooLong);
  CHECK_THROWS_AS((void)tp_split(f, 25, 2), HeadTooLong);
}

TEST_CASE("TP exclusion matches a brute-force filter over valid lengths")
{
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto f = testing::random_features(8, 20, 1, rng);
    const int T_h = std::uniform_int_distribution<int>(1, 19)(rng);
    const int k = std::uniform_int_distribution<int>(1, 3)(rng);
    const auto s = tp_split(f, T_h, k);
    for (int a = 0; a < f.A; ++a) {
      int n = 0;
      for (int t = 0; t < f.T; ++t) n += f.agent_mask(a, t) != 0.0f ? 1 : 0;
      CHECK((s.included(a, 0) == 1.0f) == (n >= k * T_h));
      int tail = 0;
      for (int j = 0; j < s.tail_len; ++j) tail += s.tail_mask(a * s.tail_len + j, 0) != 0.0f ? 1 : 0;
      CHECK(tail == (n >= k * T_h ? std::max(0, n - T_h) : 0));
    }
  }
}

TEST_CASE("TP loss is zero without included agents and matches a constant decoder")
{
  auto cfg = testing::small_config(16, 6, 2);
  cfg.tp_tail = 3;
  SeptModelD m(cfg, 2);
  auto f = full_features(2, cfg.T, 3, 7);
  CHECK(tp_loss(m, tp_split(f, 3, 3)).item() == 0.0);
  const auto s = tp_split(f, 3, 2);
  REQUIRE(s.included_count == 2);
  make_constant(m.tp_decoder(), 0.1);
  double expect = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int k = 0; k < 3; ++k)
      for (int c = 0; c < 2; ++c) expect += std::pow(0.1 - static_cast<double>(f.agents(a * cfg.T + 3 + k, c)), 2.0);
  CHECK(tp_loss(m, s).item() == doctest::Approx(expect / 12.0).epsilon(1e-12));
}

TEST_CASE("pretrain loss is the sum of the task losses, and so is its gradient")
{
  auto cfg = testing::small_config(16, 6, 2);
  cfg.tp_tail = 3;
  SeptModelD m(cfg, 6);
  auto f = full_features(3, cfg.T, 4, 2);
  PretrainConfig pc;
  pc.T_h = 3;
  pc.k_tp = 1;
  pc.min_len_mtm = 2;
  CHECK_THROWS_AS((void)pretrain_loss(m, f, pc, TaskSet{}, 0), NoTasksEnabled);

  const auto all = pretrain_loss(m, f, pc, TaskSet::all(), 42);
  const auto mtm = pretrain_loss(m, f, pc, TaskSet{true, false, false}, 42);
  const auto mrm = pretrain_loss(m, f, pc, TaskSet{false, true, false}, 42);
  const auto tp = pretrain_loss(m, f, pc, TaskSet{false, false, true}, 42);
  CHECK(mtm.total.item() == all.mtm);
  CHECK(mrm.total.item() == all.mrm);
  CHECK(tp.total.item() == all.tp);
  CHECK(all.total.item() == (all.mtm + all.mrm) + all.tp);
  CHECK(all.mtm > 0.0);
  CHECK(all.mrm > 0.0);
  CHECK(all.tp > 0.0);

  const auto grads = [&](const TaskSet & t) {
    m.params().zero_grad();
    pretrain_loss(m, f, pc, t, 42).total.backward();
    std::vector<double> g;
    for (const auto & p : m.params().params())
      for (auto v : p.tensor.grad()) g.push_back(v);
    return g;
  };
  const auto g_all = grads(TaskSet::all());
  const auto g1 = grads({true, false, false});
  const auto g2 = grads({false, true, false});
  const auto g3 = grads({false, false, true});
  double worst = 0.0;
  for (std::size_t i = 0; i < g_all.size(); ++i) worst = std::max(worst, std::abs(g_all[i] - (g1[i] + g2[i] + g3[i])));
  CHECK(worst < 1e-12);

  // every pretraining decoder and the mask token are reached
  m.params().zero_grad();
  all.total.backward();
  for (const auto & p : m.params().params()) {
    if (p.name.rfind("pre.", 0) != 0 && p.name != "enc.mask_token") continue;
    double norm = 0.0;
    for (auto v : p.tensor.grad()) norm += std::abs(v);
    INFO(p.name);
    CHECK(norm > 0.0);
  }
}

TEST_CASE("pretraining gradients match finite differences")
{
  auto cfg = testing::small_config(16, 6, 2);
  cfg.tp_tail = 3;
  PretrainConfig pc;
  pc.T_h = 3;
  pc.k_tp = 1;
  pc.min_len_mtm = 2;
  std::vector<double> errors;
  std::mt19937_64 rng(4);
  for (int point = 0; point < 3; ++point) {
    SeptModelD m(cfg, 30 + point);
    const auto f = full_features(2, cfg.T, 4, 50 + point);
    std::vector<ad::TensorD> inputs;
    for (const auto & p : m.params().params())
      if (p.name.rfind("dec.", 0) != 0) inputs.push_back(p.tensor);
    testing::gradcheck([&] { return pretrain_loss(m, f, pc, TaskSet::all(), 9).total; }, inputs, 3, rng, errors, 1e-6);
  }
  const auto stats = testing::summarize(errors);
  CHECK(stats.max_rel < 1e-2);
  CHECK(stats.p95_rel < 1e-3);
}

TEST_CASE("TP overfits a single constant-velocity agent")
{
  auto cfg = testing::small_config(32, 20, 2);
  cfg.tp_tail = 12;
  cfg.mlp_hidden = 64;
  SeptModel m(cfg, 1);
  SceneFeatures f;
  f.A = 1;
  f.T = 20;
  f.S = 2;
  f.agents = MatrixRf::Zero(20, kDh);
  f.agent_mask = MatrixRf::Ones(1, 20);
  for (int t = 0; t < 20; ++t) {
    // 8 m/s along x, current position at the origin
    f.agents(t, 0) = static_cast<float>(0.8 * (t - 19) / kCoordScale);
    f.agents(t, 2) = static_cast<float>(-0.1 * (19 - t));
    f.agents(t, 3) = 1.0f;
    f.agents(t, 7) = 1.0f;
  }
  f.roads = MatrixRf::Zero(2, kDr);
  f.roads.row(0) << -2.0f, 0.0f, -1.5f, 0.0f, 0.5f, 1.0f, 0.0f, 0.0f, 0.0f;
  f.roads.row(1) << -1.5f, 0.0f, -1.0f, 0.0f, 0.5f, 1.0f, 0.0f, 0.0f, 0.0f;
  const auto split = tp_split(f, 8, 2);
  std::vector<ad::NamedTensor> params;
  for (const auto & p : m.params().params())
    if (p.name.rfind("dec.", 0) != 0) params.push_back(p);
  ad::Adam opt(params);
  double loss = 0.0;
  for (int step = 0; step < 400; ++step) {
    m.params().zero_grad();
    auto l = tp_loss(m, split);
    loss = l.item();
    l.backward();
    opt.step(1e-3f);
  }
  const double mse_m2 = loss * kCoordScale * kCoordScale;
  MESSAGE("TP single-agent tail MSE: " << mse_m2 << " m^2");
  CHECK(mse_m2 < 1e-2);
}

TEST_CASE("finetune loss examples")
{
  testing::RawPrediction one;
  one.N = 1;
  one.F = 3;
  one.gt = {1, 0, 2, 0, 3, 0};
  one.xy = one.gt;
  one.scores = {1.0};
  const auto l1 = finetune_loss(testing::to_prediction(one), testing::ground_truth(one));
  CHECK(l1.winner == 0);
  CHECK(l1.reg.item() == 0.0);
  CHECK(l1.cls.item() == doctest::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-9));

  testing::RawPrediction two = one;
  two.N = 2;
  two.xy.insert(two.xy.end(), {1, 1, 2, 1, 3, 1});
  two.scores = {0.5, 0.5};
  const auto l2 = finetune_loss(testing::to_prediction(two), testing::ground_truth(two));
  CHECK(l2.winner == 0);
  CHECK(l2.cls.item() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));

  // identical candidates tie; the lowest index wins
  testing::RawPrediction tie = two;
  tie.xy = {1, 1, 2, 1, 3, 1, 1, 1, 2, 1, 3, 1};
  CHECK(finetune_loss(testing::to_prediction(tie), testing::ground_truth(tie)).winner == 0);
}

TEST_CASE("finetune loss agrees with a direct implementation on 1,000 instances")
{
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    const int N = std::uniform_int_distribution<int>(1, 8)(rng);
    const auto p = testing::random_prediction(N, 30, rng);
    const auto o = testing::oracle_finetune_loss(p);
    const auto l = finetune_loss(testing::to_prediction(p), testing::ground_truth(p));
    CHECK(l.winner == o.j);
    CHECK(std::abs(l.total.item() - o.total) < 1e-6);
  }
}

TEST_CASE("metric examples")
{
  testing::RawPrediction p;
  p.N = 1;
  p.F = 2;
  p.gt = {1, 0, 2, 0};
  p.xy = {1, 0, 2, 0};
  p.scores = {0.7};
  auto m = metrics(testing::to_values(p), testing::ground_truth(p), 1);
  CHECK(m.minFDE == 0.0);
  CHECK(m.MR == 0.0);
  CHECK(m.b_minFDE == doctest::Approx(0.09));
  p.xy = {1, 0, 2, 2.5};
  m = metrics(testing::to_values(p), testing::ground_truth(p), 1);
  CHECK(m.minFDE == 2.5);
  CHECK(m.MR == 1.0);
  CHECK_THROWS_AS((void)metrics(testing::to_values(p), testing::ground_truth(p), 2), std::invalid_argument);
}

TEST_CASE("metrics agree with an exhaustive scan on 1,000 prediction sets")
{
  std::mt19937_64 rng(13);
  for (int i = 0; i < 1000; ++i) {
    const auto p = testing::random_prediction(6, 30, rng);
    const auto v = testing::to_values(p);
    const auto g = testing::ground_truth(p);
    double prev = 1e300;
    for (int k = 1; k <= 6; ++k) {
      const auto m = metrics(v, g, k);
      const auto o = testing::oracle_metrics(p, k);
      CHECK(m.best == o.best);
      CHECK(std::abs(m.minADE - o.minADE) <= 1e-9);
      CHECK(std::abs(m.minFDE - o.minFDE) <= 1e-9);
      CHECK(m.MR == o.MR);
      CHECK(std::abs(m.b_minFDE - o.b_minFDE) <= 1e-9);
      CHECK(m.b_minFDE >= m.minFDE);
      CHECK(m.minFDE <= prev);
      prev = m.minFDE;
    }
  }
}

TEST_CASE("metric accumulator averages over scenes")
{
  std::mt19937_64 rng(14);
  MetricAccumulator acc;
  double fde6 = 0.0;
  double mr1 = 0.0;
  for (int i = 0; i < 3; ++i) {
    const auto p = testing::random_prediction(6, 30, rng);
    acc.add(testing::to_values(p), testing::ground_truth(p));
    fde6 += testing::oracle_metrics(p, 6).minFDE;
    mr1 += testing::oracle_metrics(p, 1).MR;
  }
  const auto s = acc.mean();
  CHECK(s.scenes == 3);
  CHECK(s.minFDE6 == doctest::Approx(fde6 / 3.0).epsilon(1e-12));
  CHECK(s.MR1 == doctest::Approx(mr1 / 3.0).epsilon(1e-12));
  CHECK(MetricAccumulator{}.mean().scenes == 0);
}
