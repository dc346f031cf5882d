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

#include <random>

#include "gradcheck.hpp"
#include "model_fixtures.hpp"
#include "scenept/model.hpp"

using namespace scenept;
using scenept::testing::max_abs_diff;

namespace
{

std::int64_t network_scalars(const SeptModel & m)
{
  std::int64_t n = 0;
  for (const auto & p : m.params().params()) {
    if (p.name.rfind("pre.", 0) == 0 || p.name == "enc.mask_token") continue;
    n += p.tensor.numel();
  }
  return n;
}

}  // namespace

TEST_CASE("projection of a zero input is relu of the bias and never negative")
{
  const auto cfg = testing::small_config();
  SeptModel m(cfg, 3);
  const auto out = m.project_agents(ad::Tensor::zeros({1, kDh}));
  const auto b = m.params().find("enc.proj_agent.b")->values();
  for (int j = 0; j < cfg.D; ++j) CHECK(out.values()[j] == std::max(b[j], 0.0f));

  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0.0f, 3.0f);
  std::vector<float> x(50 * kDr);
  for (auto & v : x) v = n(rng);
  const auto y = m.project_roads(ad::Tensor::from({50, kDr}, x));
  for (auto v : y.values()) CHECK(v >= 0.0f);
  CHECK_THROWS_AS((void)m.project_roads(ad::Tensor::zeros({2, kDh})), ad::ShapeError);
}

TEST_CASE("param_count matches the store and lands near 9.6M at the default configuration")
{
  const ModelConfig cfg;
  const auto n = param_count(cfg);
  MESSAGE("default param_count = " << n);
  CHECK(n >= 6'700'000);
  CHECK(n <= 12'500'000);
  CHECK(network_scalars(SeptModel(cfg, 0)) == n);

  auto self = testing::small_config();
  self.query_self_attn = true;
  CHECK(network_scalars(SeptModel(self, 0)) == param_count(self));
}

TEST_CASE("param_count at unit dimensions equals a hand count")
{
  ModelConfig c;
  c.D = c.K_T = c.K_S = c.K_C = c.heads = c.dim_head = c.N = c.ffn_mult = c.mlp_hidden = 1;
  c.T = 2;
  c.F = 1;
  // projections 9 + 10, relative bias 1 * 3
  // block: q, k, v, o with bias 4 * 2, feedforward 2, two layer norms 4 -> 14
  // TempoNet 14 + final norm 2, SpaNet 14 + 2
  // queries 1, cross layer 8 + 2 + 4, final norm 2
  // traj head 1 + 1 + 2 + 2, score head 1 + 1 + 1 + 1
  CHECK(param_count(c) == 19 + 3 + 16 + 16 + 1 + 14 + 2 + 6 + 4);
  CHECK(network_scalars(SeptModel(c, 0)) == param_count(c));
}

TEST_CASE("doubling the TempoNet depth adds exactly K_T encoder blocks")
{
  ModelConfig c;
  const auto base = param_count(c);
  c.K_T *= 2;
  CHECK(param_count(c) - base == 3 * encoder_block_count(ModelConfig{}));
}

TEST_CASE("feedforward layers carry no bias")
{
  SeptModel m(testing::small_config(), 0);
  int ff = 0;
  for (const auto & p : m.params().params()) {
    const bool is_ff = p.name.find(".ff1.") != std::string::npos || p.name.find(".ff2.") != std::string::npos;
    if (is_ff) {
      ++ff;
      CHECK(p.name.substr(p.name.size() - 2) == ".w");
    }
  }
  CHECK(ff == 2 * (2 + 2 + 2));
}

TEST_CASE("predictions have N x F x 2 trajectories and normalized scores, bitwise deterministic")
{
  ModelConfig cfg;
  cfg.D = 32;
  cfg.heads = 2;
  cfg.dim_head = 16;
  cfg.mlp_hidden = 64;
  SeptModel m(cfg, 5);
  std::mt19937_64 rng(2);
  const auto f = testing::random_features(4, cfg.T, 12, rng);
  const auto p = m.forward(f);
  CHECK(p.trajectories.shape() == ad::Shape{6, 30, 2});
  double total = 0.0;
  for (auto s : p.scores.values()) {
    CHECK(s >= 0.0f);
    total += s;
  }
  CHECK(std::abs(total - 1.0) < 1e-5);
  const auto q = SeptModel(cfg, 5).forward(f);
  CHECK(max_abs_diff(p.trajectories.values(), q.trajectories.values()) == 0.0);
  CHECK(max_abs_diff(p.scores.values(), q.scores.values()) == 0.0);
}

TEST_CASE("constant history with zero relative bias pools to the single-frame result")
{
  auto cfg = testing::small_config();
  SeptModel m(cfg, 9);
  m.zero_relative_bias();
  std::mt19937_64 rng(4);
  const auto frame = testing::random_tensor({1, 1, cfg.D}, rng, false);
  std::vector<float> one(frame.values().begin(), frame.values().end());
  std::vector<float> rep;
  for (int t = 0; t < cfg.T; ++t) rep.insert(rep.end(), one.begin(), one.end());
  const auto single = m.tempo_encode(ad::Tensor::from({1, 1, cfg.D}, one), ad::Tensor::full({1, 1}, 1.0f));
  const auto full = m.tempo_encode(ad::Tensor::from({1, cfg.T, cfg.D}, rep), ad::Tensor::full({1, cfg.T}, 1.0f));
  CHECK(max_abs_diff(single.tokens.values(), full.tokens.values()) < 1e-5);
}

TEST_CASE("an agent without valid frames gets a zero token")
{
  auto cfg = testing::small_config();
  SeptModel m(cfg, 1);
  std::mt19937_64 rng(3);
  std::vector<float> mask(2 * cfg.T, 1.0f);
  for (int t = 0; t < cfg.T; ++t) mask[cfg.T + t] = 0.0f;
  const auto emb = testing::random_tensor({2, cfg.T, cfg.D}, rng, false);
  std::vector<float> e(emb.values().begin(), emb.values().end());
  const auto out = m.tempo_encode(ad::Tensor::from({2, cfg.T, cfg.D}, e), ad::Tensor::from({2, cfg.T}, mask));
  for (int j = 0; j < cfg.D; ++j) CHECK(out.tokens.at({1, j}) == 0.0f);
  CHECK(out.valid.at({0}) == 1.0f);
  CHECK(out.valid.at({1}) == 0.0f);
}

TEST_CASE("padding frames and agents leaves predictions unchanged")
{
  auto cfg = testing::small_config(32, 10, 3);
  SeptModel m(cfg, 11);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = testing::random_features(3, cfg.T, 7, rng);
    const auto p = m.forward(f);
    const auto q = m.forward(testing::pad_features(f, 4, 2));
    CHECK(max_abs_diff(p.trajectories.values(), q.trajectories.values()) < 1e-5);
    CHECK(max_abs_diff(p.scores.values(), q.scores.values()) < 1e-5);
  }
}

TEST_CASE("road order does not change predictions; SpaNet outputs permute with roads")
{
  auto cfg = testing::small_config(32, 8, 3);
  SeptModel m(cfg, 12);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = testing::random_features(3, cfg.T, 9, rng);
    const auto g = testing::permute_roads(f, rng);
    const auto p = m.forward(f);
    const auto q = m.forward(g);
    CHECK(max_abs_diff(p.trajectories.values(), q.trajectories.values()) < 1e-5);
    CHECK(max_abs_diff(p.scores.values(), q.scores.values()) < 1e-5);
  }

  // equivariance at the SpaNet level with a swap of two road tokens
  const auto agents = testing::random_tensor({2, cfg.D}, rng, false);
  const auto roads = testing::random_tensor({3, cfg.D}, rng, false);
  const auto toF = [](const ad::TensorD & t) {
    return ad::Tensor::from(t.shape(), std::vector<float>(t.values().begin(), t.values().end()));
  };
  const auto a = toF(agents);
  const auto r = toF(roads);
  const std::vector<std::int64_t> swap = {2, 1, 0};
  const auto r2 = ad::index_select(r, 0, swap);
  const auto valid = ad::Tensor::full({5}, 1.0f);
  const auto o1 = m.spa_encode(a, r, valid);
  const auto o2 = m.spa_encode(a, r2, valid);
  for (int j = 0; j < cfg.D; ++j) {
    CHECK(std::abs(o1.at({2, j}) - o2.at({4, j})) < 1e-5);
    CHECK(std::abs(o1.at({0, j}) - o2.at({0, j})) < 1e-5);
  }

  // a masked padding token leaves the others unchanged
  const auto r3 = ad::concat({r, toF(testing::random_tensor({1, cfg.D}, rng, false))}, 0);
  std::vector<float> v3 = {1, 1, 1, 1, 1, 0};
  const auto o3 = m.spa_encode(a, r3, ad::Tensor::from({6}, v3));
  CHECK(max_abs_diff(o1.values(), ad::slice(o3, 0, 0, 5).values()) < 1e-5);
}

TEST_CASE("end-to-end gradients match finite differences at reduced dimensions")
{
  const auto cfg = testing::small_config(16, 6, 2);
  std::vector<double> errors;
  std::mt19937_64 rng(21);
  for (int point = 0; point < 10; ++point) {
    SeptModelD m(cfg, 100 + point);
    const auto f = testing::random_features(2, cfg.T, 4, rng);
    std::vector<ad::TensorD> inputs;
    for (const auto & p : m.params().params()) {
      if (p.name.rfind("pre.", 0) == 0 || p.name == "enc.mask_token") continue;
      inputs.push_back(p.tensor);
    }
    const auto fwd = [&] {
      const auto p = m.forward(f);
      return ad::concat({ad::reshape(p.trajectories, {p.trajectories.numel()}), p.scores}, 0);
    };
    testing::gradcheck(fwd, inputs, 4, rng, errors, 1e-6);
  }
  const auto stats = testing::summarize(errors);
  MESSAGE("model gradcheck: n=" << stats.count << " max=" << stats.max_rel << " p95=" << stats.p95_rel);
  CHECK(stats.max_rel < 1e-2);
  CHECK(stats.p95_rel < 1e-3);
}

TEST_CASE("every network parameter receives a nonzero gradient")
{
  const auto cfg = testing::small_config(16, 6, 3);
  SeptModel m(cfg, 4);
  std::mt19937_64 rng(5);
  for (int s = 0; s < 4; ++s) {
    const auto f = testing::random_features(3, cfg.T, 5, rng);
    const auto p = m.forward(f);
    const auto w = testing::random_tensor({cfg.N, cfg.F, 2}, rng, false);
    const auto wf = ad::Tensor::from(w.shape(), std::vector<float>(w.values().begin(), w.values().end()));
    (ad::sum(p.trajectories * wf) + ad::sum(ad::log(p.scores) * ad::Tensor::from({3}, {1.0f, -2.0f, 0.5f}))).backward();
  }
  for (const auto & p : m.params().params()) {
    if (p.name.rfind("pre.", 0) == 0 || p.name == "enc.mask_token") continue;
    double norm = 0.0;
    for (auto g : p.tensor.grad()) norm += std::abs(g);
    INFO(p.name);
    CHECK(norm > 0.0);
  }
}
