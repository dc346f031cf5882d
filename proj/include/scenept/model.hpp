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
#include <random>
#include <string>
#include <vector>

#include "scenept/features.hpp"
#include "scenept/ops.hpp"
#include "scenept/optim.hpp"

namespace scenept
{

struct ModelConfig
{
  int D = 256;
  int K_T = 3;
  int K_S = 2;
  int K_C = 3;
  int heads = 8;
  int dim_head = 64;
  int N = 6;
  int ffn_mult = 4;
  int mlp_hidden = 512;
  int T = 20;
  int F = 30;
  int D_h = kDh;
  int D_r = kDr;
  bool query_self_attn = false;
  int tp_tail = 12;  // frames emitted by the TP decoder, T - T_h

  bool operator==(const ModelConfig &) const = default;
};

void validate(const ModelConfig & cfg);

/// Trainable scalars of the prediction network (projections, TempoNet, SpaNet, Cross
/// Attender, heads). The MTM mask token and the pretraining decoders are not counted.
std::int64_t param_count(const ModelConfig & cfg);

/// Scalars of one pre-LN encoder block of width D.
std::int64_t encoder_block_count(const ModelConfig & cfg);

template <class S>
struct BasicLinear
{
  ad::BasicTensor<S> w;  // [in, out]
  ad::BasicTensor<S> b;  // [out], undefined when bias-free
};

template <class S>
struct BasicAttention
{
  BasicLinear<S> q, k, v, o;
};

template <class S>
struct BasicEncoderBlock
{
  ad::BasicTensor<S> ln1_g, ln1_b, ln2_g, ln2_b;
  BasicAttention<S> attn;
  BasicLinear<S> ff1, ff2;  // bias-free
};

template <class S>
struct BasicCrossBlock
{
  ad::BasicTensor<S> lnq_g, lnq_b, ln2_g, ln2_b;
  BasicAttention<S> cross;
  ad::BasicTensor<S> lnsa_g, lnsa_b;  // self-attention among queries, only with query_self_attn
  BasicAttention<S> self;
  BasicLinear<S> ff1, ff2;
};

template <class S>
struct BasicMlp
{
  BasicLinear<S> hidden, out;
};

template <class S>
struct BasicTempoOutput
{
  ad::BasicTensor<S> hidden;  // [A, L, D], after the final layer norm
  ad::BasicTensor<S> tokens;  // [A, D], masked max over L
  ad::BasicTensor<S> valid;   // [A], 1 when the agent has any valid frame
};

template <class S>
struct BasicPrediction
{
  ad::BasicTensor<S> trajectories;  // [N, F, 2] meters in the target frame
  ad::BasicTensor<S> scores;        // [N]
};

/// The network. Parameter names: "enc.*" for projections, TempoNet, SpaNet and the
/// mask token; "dec.*" for the Cross Attender and heads; "pre.*" for the pretraining
/// decoders.
template <class S>
class BasicSeptModel
{
public:
  using Tensor = ad::BasicTensor<S>;

  BasicSeptModel(const ModelConfig & cfg, std::uint64_t seed);

  const ModelConfig & config() const { return cfg_; }
  ad::BasicParamStore<S> & params() { return store_; }
  const ad::BasicParamStore<S> & params() const { return store_; }

  /// relu(x W + b); x has last extent D_h.
  Tensor project_agents(const Tensor & x) const;
  /// relu(x W + b); x has last extent D_r.
  Tensor project_roads(const Tensor & x) const;

  /// emb [A, L, D], mask [A, L] with L <= T.
  BasicTempoOutput<S> tempo_encode(const Tensor & emb, const Tensor & mask) const;
  /// Memory over agents then roads, [A + S, D]. validity is [A + S].
  Tensor spa_encode(const Tensor & agent_tokens, const Tensor & road_tokens, const Tensor & validity) const;
  BasicPrediction<S> decode(const Tensor & memory, const Tensor & validity) const;

  /// Full pipeline on prepared features.
  BasicPrediction<S> forward(const SceneFeatures & f) const;

  const Tensor & mask_token() const { return mask_token_; }
  const BasicMlp<S> & mtm_decoder() const { return mtm_dec_; }
  const BasicMlp<S> & mrm_decoder() const { return mrm_dec_; }
  const BasicMlp<S> & tp_decoder() const { return tp_dec_; }

  /// Zeroes the relative position tables (used by tests of the content path).
  void zero_relative_bias();

  const std::vector<BasicEncoderBlock<S>> & tempo_blocks() const { return tempo_; }

private:
  Tensor relative_bias(int L) const;

  ModelConfig cfg_;
  ad::BasicParamStore<S> store_;
  std::mt19937_64 rng_;

  BasicLinear<S> proj_agent_, proj_road_;
  Tensor rel_bias_;  // [heads, 2T - 1], shared by all TempoNet blocks
  std::vector<BasicEncoderBlock<S>> tempo_, spa_;
  Tensor tempo_ln_g_, tempo_ln_b_, spa_ln_g_, spa_ln_b_;
  Tensor mask_token_;  // [D]
  Tensor queries_;     // [N, D]
  std::vector<BasicCrossBlock<S>> cross_;
  Tensor cross_ln_g_, cross_ln_b_;
  BasicMlp<S> traj_head_, score_head_;
  BasicMlp<S> mtm_dec_, mrm_dec_, tp_dec_;
};

using SeptModel = BasicSeptModel<float>;
using SeptModelD = BasicSeptModel<double>;

extern template class BasicSeptModel<float>;
extern template class BasicSeptModel<double>;

template <class S>
ad::BasicTensor<S> apply(const BasicLinear<S> & l, const ad::BasicTensor<S> & x);
template <class S>
ad::BasicTensor<S> apply(const BasicMlp<S> & m, const ad::BasicTensor<S> & x);

/// Multi-head attention of queries x [B, Lq, D] over keys/values y [B, Lk, D].
/// key_mask is [B, Lk] (0/1) or undefined; bias is [heads, Lq, Lk] or undefined.
/// Query rows whose keys are all masked get all-zero attention weights.
template <class S>
ad::BasicTensor<S> attention(
  const BasicAttention<S> & p, const ad::BasicTensor<S> & x, const ad::BasicTensor<S> & y, int heads,
  int dim_head, const ad::BasicTensor<S> & key_mask, const ad::BasicTensor<S> & bias);

/// Row-major copy of a float feature matrix into a tensor of the given shape.
template <class S>
ad::BasicTensor<S> to_tensor(const MatrixRf & m, ad::Shape shape);

}  // namespace scenept
