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

#include "scenept/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scenept
{

namespace
{

void require_positive(int v, const char * name)
{
  if (v <= 0) throw std::invalid_argument(std::string("ModelConfig.") + name + " must be positive");
}

}  // namespace

void validate(const ModelConfig & cfg)
{
  require_positive(cfg.D, "D");
  require_positive(cfg.K_T, "K_T");
  require_positive(cfg.K_S, "K_S");
  require_positive(cfg.K_C, "K_C");
  require_positive(cfg.heads, "heads");
  require_positive(cfg.dim_head, "dim_head");
  require_positive(cfg.N, "N");
  require_positive(cfg.ffn_mult, "ffn_mult");
  require_positive(cfg.mlp_hidden, "mlp_hidden");
  require_positive(cfg.T, "T");
  require_positive(cfg.F, "F");
  require_positive(cfg.D_h, "D_h");
  require_positive(cfg.D_r, "D_r");
  require_positive(cfg.tp_tail, "tp_tail");
}

namespace
{

std::int64_t attention_count(const ModelConfig & c)
{
  const std::int64_t D = c.D;
  const std::int64_t I = std::int64_t{c.heads} * c.dim_head;
  return 3 * (D * I + I) + (I * D + D);
}

std::int64_t ffn_count(const ModelConfig & c) { return 2 * std::int64_t{c.D} * c.D * c.ffn_mult; }

std::int64_t mlp_count(std::int64_t in, std::int64_t hidden, std::int64_t out)
{
  return in * hidden + hidden + hidden * out + out;
}

}  // namespace

std::int64_t encoder_block_count(const ModelConfig & cfg)
{
  return attention_count(cfg) + ffn_count(cfg) + 4 * std::int64_t{cfg.D};
}

std::int64_t param_count(const ModelConfig & c)
{
  const std::int64_t D = c.D;
  std::int64_t n = 0;
  n += (c.D_h * D + D) + (c.D_r * D + D);
  n += std::int64_t{c.heads} * (2 * c.T - 1);
  n += c.K_T * encoder_block_count(c) + 2 * D;
  n += c.K_S * encoder_block_count(c) + 2 * D;
  std::int64_t cross = attention_count(c) + ffn_count(c) + 4 * D;
  if (c.query_self_attn) cross += attention_count(c) + 2 * D;
  n += std::int64_t{c.N} * D + c.K_C * cross + 2 * D;
  n += mlp_count(D, c.mlp_hidden, std::int64_t{c.F} * 2);
  n += mlp_count(D, c.mlp_hidden, 1);
  return n;
}

template <class S>
ad::BasicTensor<S> to_tensor(const MatrixRf & m, ad::Shape shape)
{
  std::vector<S> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.size(); ++i) v[static_cast<std::size_t>(i)] = static_cast<S>(m.data()[i]);
  return ad::BasicTensor<S>::from(std::move(shape), std::move(v));
}

template <class S>
ad::BasicTensor<S> apply(const BasicLinear<S> & l, const ad::BasicTensor<S> & x)
{
  auto y = ad::matmul(x, l.w);
  return l.b.defined() ? y + l.b : y;
}

template <class S>
ad::BasicTensor<S> apply(const BasicMlp<S> & m, const ad::BasicTensor<S> & x)
{
  return apply(m.out, ad::relu(apply(m.hidden, x)));
}

template <class S>
ad::BasicTensor<S> attention(
  const BasicAttention<S> & p, const ad::BasicTensor<S> & x, const ad::BasicTensor<S> & y, int heads,
  int dim_head, const ad::BasicTensor<S> & key_mask, const ad::BasicTensor<S> & bias)
{
  const auto B = x.dim(0);
  const auto Lq = x.dim(1);
  const auto Lk = y.dim(1);
  const std::int64_t H = heads;
  const std::int64_t dh = dim_head;
  const auto split = [&](const ad::BasicTensor<S> & t, std::int64_t L) {
    return ad::permute(ad::reshape(t, {B, L, H, dh}), {0, 2, 1, 3});
  };
  const auto q = split(apply(p.q, x), Lq);
  const auto k = split(apply(p.k, y), Lk);
  const auto v = split(apply(p.v, y), Lk);
  auto logits = ad::matmul(q, ad::transpose(k, 2, 3)) * static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  if (bias.defined()) logits = logits + bias;
  ad::BasicTensor<S> mask;
  if (key_mask.defined()) mask = ad::reshape(key_mask, {B, 1, 1, Lk});
  const auto w = ad::softmax(logits, 3, mask);
  const auto ctx = ad::reshape(ad::permute(ad::matmul(w, v), {0, 2, 1, 3}), {B, Lq, H * dh});
  return apply(p.o, ctx);
}

template <class S>
BasicSeptModel<S>::BasicSeptModel(const ModelConfig & cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed)
{
  validate(cfg_);
  const std::int64_t D = cfg_.D;
  const std::int64_t I = std::int64_t{cfg_.heads} * cfg_.dim_head;
  const std::int64_t Dff = D * cfg_.ffn_mult;

  const auto linear = [&](const std::string & name, std::int64_t in, std::int64_t out, bool bias) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    BasicLinear<S> l;
    l.w = store_.create(name + ".w", {in, out}, [&] { return static_cast<S>(u(rng_)); });
    if (bias) l.b = store_.create(name + ".b", {out}, [&] { return static_cast<S>(u(rng_)); });
    return l;
  };
  const auto gaussian = [&](const std::string & name, ad::Shape shape) {
    std::normal_distribution<double> n(0.0, 0.02);
    return store_.create(name, std::move(shape), [&] { return static_cast<S>(n(rng_)); });
  };
  const auto ln = [&](const std::string & name, Tensor & g, Tensor & b) {
    g = store_.create_constant(name + ".g", {D}, S(1));
    b = store_.create_constant(name + ".b", {D}, S(0));
  };
  const auto attn = [&](const std::string & name) {
    BasicAttention<S> a;
    a.q = linear(name + ".q", D, I, true);
    a.k = linear(name + ".k", D, I, true);
    a.v = linear(name + ".v", D, I, true);
    a.o = linear(name + ".o", I, D, true);
    return a;
  };
  const auto block = [&](const std::string & name) {
    BasicEncoderBlock<S> b;
    ln(name + ".ln1", b.ln1_g, b.ln1_b);
    b.attn = attn(name + ".attn");
    ln(name + ".ln2", b.ln2_g, b.ln2_b);
    b.ff1 = linear(name + ".ff1", D, Dff, false);
    b.ff2 = linear(name + ".ff2", Dff, D, false);
    return b;
  };
  const auto mlp = [&](const std::string & name, std::int64_t in, std::int64_t out) {
    BasicMlp<S> m;
    m.hidden = linear(name + ".hidden", in, cfg_.mlp_hidden, true);
    m.out = linear(name + ".out", cfg_.mlp_hidden, out, true);
    return m;
  };

  proj_agent_ = linear("enc.proj_agent", cfg_.D_h, D, true);
  proj_road_ = linear("enc.proj_road", cfg_.D_r, D, true);
  rel_bias_ = store_.create_constant("enc.tempo.rel_bias", {cfg_.heads, 2 * cfg_.T - 1}, S(0));
  for (int i = 0; i < cfg_.K_T; ++i) tempo_.push_back(block("enc.tempo." + std::to_string(i)));
  ln("enc.tempo.ln", tempo_ln_g_, tempo_ln_b_);
  for (int i = 0; i < cfg_.K_S; ++i) spa_.push_back(block("enc.spa." + std::to_string(i)));
  ln("enc.spa.ln", spa_ln_g_, spa_ln_b_);
  mask_token_ = gaussian("enc.mask_token", {D});

  queries_ = gaussian("dec.queries", {cfg_.N, D});
  for (int i = 0; i < cfg_.K_C; ++i) {
    const std::string name = "dec.cross." + std::to_string(i);
    BasicCrossBlock<S> c;
    ln(name + ".lnq", c.lnq_g, c.lnq_b);
    c.cross = attn(name + ".cross");
    if (cfg_.query_self_attn) {
      ln(name + ".lnsa", c.lnsa_g, c.lnsa_b);
      c.self = attn(name + ".self");
    }
    ln(name + ".ln2", c.ln2_g, c.ln2_b);
    c.ff1 = linear(name + ".ff1", D, Dff, false);
    c.ff2 = linear(name + ".ff2", Dff, D, false);
    cross_.push_back(std::move(c));
  }
  ln("dec.cross.ln", cross_ln_g_, cross_ln_b_);
  traj_head_ = mlp("dec.traj", D, std::int64_t{cfg_.F} * 2);
  score_head_ = mlp("dec.score", D, 1);

  mtm_dec_ = mlp("pre.mtm", D, kAgentContinuous);
  mrm_dec_ = mlp("pre.mrm", D, kRoadContinuous);
  tp_dec_ = mlp("pre.tp", D, std::int64_t{cfg_.tp_tail} * 2);
}

template <class S>
auto BasicSeptModel<S>::project_agents(const Tensor & x) const -> Tensor
{
  if (x.dim(-1) != cfg_.D_h) throw ad::ShapeError("project_agents: last axis of " + ad::to_string(x.shape()) + " is not D_h");
  return ad::relu(apply(proj_agent_, x));
}

template <class S>
auto BasicSeptModel<S>::project_roads(const Tensor & x) const -> Tensor
{
  if (x.dim(-1) != cfg_.D_r) throw ad::ShapeError("project_roads: last axis of " + ad::to_string(x.shape()) + " is not D_r");
  return ad::relu(apply(proj_road_, x));
}

template <class S>
auto BasicSeptModel<S>::relative_bias(int L) const -> Tensor
{
  const int span = cfg_.T - 1;
  std::vector<std::int64_t> idx(static_cast<std::size_t>(L) * L);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) idx[static_cast<std::size_t>(i) * L + j] = std::clamp(j - i, -span, span) + span;
  return ad::reshape(ad::index_select(rel_bias_, 1, idx), {cfg_.heads, L, L});
}

template <class S>
void BasicSeptModel<S>::zero_relative_bias()
{
  auto t = rel_bias_;
  for (auto & v : t.mutable_values()) v = S(0);
}

namespace
{

template <class S>
ad::BasicTensor<S> encoder_stack(
  const std::vector<BasicEncoderBlock<S>> & blocks, ad::BasicTensor<S> x, const ModelConfig & c,
  const ad::BasicTensor<S> & key_mask, const ad::BasicTensor<S> & bias)
{
  for (const auto & b : blocks) {
    const auto h = ad::layer_norm(x, b.ln1_g, b.ln1_b);
    x = x + attention(b.attn, h, h, c.heads, c.dim_head, key_mask, bias);
    const auto f = ad::layer_norm(x, b.ln2_g, b.ln2_b);
    x = x + apply(b.ff2, ad::relu(apply(b.ff1, f)));
  }
  return x;
}

}  // namespace

template <class S>
BasicTempoOutput<S> BasicSeptModel<S>::tempo_encode(const Tensor & emb, const Tensor & mask) const
{
  if (emb.ndim() != 3 || emb.dim(2) != cfg_.D || mask.ndim() != 2 || mask.dim(0) != emb.dim(0) || mask.dim(1) != emb.dim(1)) {
    throw ad::ShapeError("tempo_encode: embeddings " + ad::to_string(emb.shape()) + " vs mask " + ad::to_string(mask.shape()));
  }
  const auto A = emb.dim(0);
  const auto L = static_cast<int>(emb.dim(1));
  BasicTempoOutput<S> out;
  const auto x = encoder_stack(tempo_, emb, cfg_, mask, relative_bias(L));
  out.hidden = ad::layer_norm(x, tempo_ln_g_, tempo_ln_b_);
  out.tokens = ad::max_pool(out.hidden, 1, ad::reshape(mask, {A, L, 1}));
  std::vector<S> valid(static_cast<std::size_t>(A), S(0));
  const auto m = mask.values();
  for (std::int64_t a = 0; a < A; ++a)
    for (int t = 0; t < L; ++t)
      if (m[a * L + t] != S(0)) valid[a] = S(1);
  out.valid = Tensor::from({A}, std::move(valid));
  return out;
}

template <class S>
auto BasicSeptModel<S>::spa_encode(const Tensor & agent_tokens, const Tensor & road_tokens, const Tensor & validity) const
  -> Tensor
{
  Tensor tokens = agent_tokens;
  if (road_tokens.defined() && road_tokens.dim(0) > 0) tokens = ad::concat({agent_tokens, road_tokens}, 0);
  const auto M = tokens.dim(0);
  if (validity.numel() != M) {
    throw ad::ShapeError("spa_encode: validity " + ad::to_string(validity.shape()) + " vs tokens " + ad::to_string(tokens.shape()));
  }
  const auto x = encoder_stack(spa_, ad::reshape(tokens, {1, M, cfg_.D}), cfg_, ad::reshape(validity, {1, M}), Tensor{});
  return ad::reshape(ad::layer_norm(x, spa_ln_g_, spa_ln_b_), {M, cfg_.D});
}

template <class S>
BasicPrediction<S> BasicSeptModel<S>::decode(const Tensor & memory, const Tensor & validity) const
{
  const auto M = memory.dim(0);
  const std::int64_t N = cfg_.N;
  const auto mem = ad::reshape(memory, {1, M, cfg_.D});
  const auto key_mask = ad::reshape(validity, {1, M});
  auto q = ad::reshape(queries_, {1, N, cfg_.D});
  for (const auto & c : cross_) {
    q = q + attention(c.cross, ad::layer_norm(q, c.lnq_g, c.lnq_b), mem, cfg_.heads, cfg_.dim_head, key_mask, Tensor{});
    if (cfg_.query_self_attn) {
      const auto h = ad::layer_norm(q, c.lnsa_g, c.lnsa_b);
      q = q + attention(c.self, h, h, cfg_.heads, cfg_.dim_head, Tensor{}, Tensor{});
    }
    q = q + apply(c.ff2, ad::relu(apply(c.ff1, ad::layer_norm(q, c.ln2_g, c.ln2_b))));
  }
  q = ad::reshape(ad::layer_norm(q, cross_ln_g_, cross_ln_b_), {N, cfg_.D});
  BasicPrediction<S> p;
  p.trajectories = ad::reshape(apply(traj_head_, q), {N, cfg_.F, 2}) * static_cast<S>(kCoordScale);
  p.scores = ad::softmax(ad::reshape(apply(score_head_, q), {N}), 0);
  return p;
}

template <class S>
BasicPrediction<S> BasicSeptModel<S>::forward(const SceneFeatures & f) const
{
  const auto agents = to_tensor<S>(f.agents, {f.A, f.T, cfg_.D_h});
  const auto mask = to_tensor<S>(f.agent_mask, {f.A, f.T});
  const auto tempo = tempo_encode(project_agents(agents), mask);
  Tensor roads;
  Tensor validity = tempo.valid;
  if (f.S > 0) {
    roads = project_roads(to_tensor<S>(f.roads, {f.S, cfg_.D_r}));
    validity = ad::concat({tempo.valid, Tensor::full({f.S}, S(1))}, 0);
  }
  return decode(spa_encode(tempo.tokens, roads, validity), validity);
}

template class BasicSeptModel<float>;
template class BasicSeptModel<double>;

#define SCENEPT_INSTANTIATE_MODEL(S)                                                                          \
  template ad::BasicTensor<S> to_tensor<S>(const MatrixRf &, ad::Shape);                                       \
  template ad::BasicTensor<S> apply(const BasicLinear<S> &, const ad::BasicTensor<S> &);                      \
  template ad::BasicTensor<S> apply(const BasicMlp<S> &, const ad::BasicTensor<S> &);                         \
  template ad::BasicTensor<S> attention(                                                                       \
    const BasicAttention<S> &, const ad::BasicTensor<S> &, const ad::BasicTensor<S> &, int, int,              \
    const ad::BasicTensor<S> &, const ad::BasicTensor<S> &);

SCENEPT_INSTANTIATE_MODEL(float)
SCENEPT_INSTANTIATE_MODEL(double)

}  // namespace scenept
