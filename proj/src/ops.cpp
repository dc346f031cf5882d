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

#include "scenept/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace scenept::ad
{

namespace
{

template <class S>
using MatR = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using ConstMap = Eigen::Map<const MatR<S>>;
template <class S>
using MutMap = Eigen::Map<MatR<S>>;

int normalize_axis(int axis, std::int64_t ndim, const Shape & shape)
{
  const auto a = axis < 0 ? axis + ndim : axis;
  if (a < 0 || a >= ndim) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape));
  }
  return static_cast<int>(a);
}

struct AxisSplit
{
  std::int64_t outer = 1;
  std::int64_t len = 1;
  std::int64_t inner = 1;
};

AxisSplit split_at(const Shape & shape, int axis)
{
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// offsets[k] is the flat index into a tensor of shape `in` that broadcasts to flat
// index k of `out`. Empty when the shapes are identical.
std::vector<std::int64_t> broadcast_offsets(const Shape & in, const Shape & out)
{
  if (in == out) {
    return {};
  }
  const auto nd = static_cast<int>(out.size());
  std::vector<std::int64_t> stride(nd, 0);
  std::int64_t s = 1;
  for (int i = static_cast<int>(in.size()) - 1, j = nd - 1; i >= 0; --i, --j) {
    stride[j] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  const auto n = numel(out);
  std::vector<std::int64_t> off(static_cast<std::size_t>(n));
  std::vector<std::int64_t> idx(nd, 0);
  std::int64_t cur = 0;
  for (std::int64_t k = 0; k < n; ++k) {
    off[k] = cur;
    for (int d = nd - 1; d >= 0; --d) {
      if (++idx[d] < out[d]) {
        cur += stride[d];
        break;
      }
      cur -= stride[d] * (out[d] - 1);
      idx[d] = 0;
    }
  }
  return off;
}

inline std::int64_t at_offset(const std::vector<std::int64_t> & off, std::int64_t k)
{
  return off.empty() ? k : off[k];
}

// Expands a 0/1 mask to the full extent of `shape`; an undefined mask keeps everything.
template <class S>
std::vector<std::uint8_t> expand_mask(const BasicTensor<S> & mask, const Shape & shape, const char * op)
{
  const auto n = numel(shape);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(n), 1);
  if (!mask.defined()) {
    return out;
  }
  if (broadcast_shape(mask.shape(), shape) != shape) {
    throw ShapeError(
      std::string(op) + ": mask " + to_string(mask.shape()) + " does not broadcast to " +
      to_string(shape));
  }
  const auto off = broadcast_offsets(mask.shape(), shape);
  const auto mv = mask.values();
  for (std::int64_t k = 0; k < n; ++k) {
    out[k] = mv[at_offset(off, k)] != S(0);
  }
  return out;
}

template <class S, class Fwd, class GradA, class GradB>
BasicTensor<S> binary_op(
  const BasicTensor<S> & a, const BasicTensor<S> & b, const char * op, Fwd fwd, GradA grad_a, GradB grad_b)
{
  Shape out_shape;
  try {
    out_shape = broadcast_shape(a.shape(), b.shape());
  } catch (const ShapeError &) {
    throw ShapeError(
      std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
      to_string(b.shape()));
  }
  auto oa = broadcast_offsets(a.shape(), out_shape);
  auto ob = broadcast_offsets(b.shape(), out_shape);
  const auto n = numel(out_shape);
  std::vector<S> out(static_cast<std::size_t>(n));
  const auto av = a.values();
  const auto bv = b.values();
  for (std::int64_t k = 0; k < n; ++k) {
    out[k] = fwd(av[at_offset(oa, k)], bv[at_offset(ob, k)]);
  }
  return BasicTensor<S>::make(
    std::move(out_shape), std::move(out), op, {a, b},
    [oa = std::move(oa), ob = std::move(ob), grad_a, grad_b](detail::Node<S> & self) {
      detail::Node<S> & pa = *self.parents[0];
      detail::Node<S> & pb = *self.parents[1];
      const auto n = static_cast<std::int64_t>(self.grad.size());
      if (pa.requires_grad) {
        auto & ga = pa.ensure_grad();
        for (std::int64_t k = 0; k < n; ++k) {
          const auto ia = at_offset(oa, k);
          ga[ia] += grad_a(pa.value[ia], pb.value[at_offset(ob, k)], self.grad[k]);
        }
      }
      if (pb.requires_grad) {
        auto & gb = pb.ensure_grad();
        for (std::int64_t k = 0; k < n; ++k) {
          const auto ib = at_offset(ob, k);
          gb[ib] += grad_b(pa.value[at_offset(oa, k)], pb.value[ib], self.grad[k]);
        }
      }
    });
}

template <class S, class Fwd, class Grad>
BasicTensor<S> unary_op(const BasicTensor<S> & a, const char * op, Fwd fwd, Grad grad)
{
  const auto av = a.values();
  std::vector<S> out(av.size());
  std::transform(av.begin(), av.end(), out.begin(), fwd);
  return BasicTensor<S>::make(a.shape(), std::move(out), op, {a}, [grad](detail::Node<S> & self) {
    detail::Node<S> & p = *self.parents[0];
    auto & g = p.ensure_grad();
    for (std::size_t k = 0; k < g.size(); ++k) {
      g[k] += grad(p.value[k], self.value[k], self.grad[k]);
    }
  });
}

}  // namespace

Shape broadcast_shape(const Shape & a, const Shape & b)
{
  const auto n = std::max(a.size(), b.size());
  Shape out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ea = i < n - a.size() ? 1 : a[i - (n - a.size())];
    const auto eb = i < n - b.size() ? 1 : b[i - (n - b.size())];
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    out[i] = ea == 1 ? eb : ea;
  }
  return out;
}

template <class S>
BasicTensor<S> add(const BasicTensor<S> & a, const BasicTensor<S> & b)
{
  return binary_op(
    a, b, "add", [](S x, S y) { return x + y; },
    [](S, S, S g) { return g; }, [](S, S, S g) { return g; });
}

template <class S>
BasicTensor<S> sub(const BasicTensor<S> & a, const BasicTensor<S> & b)
{
  return binary_op(
    a, b, "sub", [](S x, S y) { return x - y; },
    [](S, S, S g) { return g; }, [](S, S, S g) { return -g; });
}

template <class S>
BasicTensor<S> mul(const BasicTensor<S> & a, const BasicTensor<S> & b)
{
  return binary_op(
    a, b, "mul", [](S x, S y) { return x * y; },
    [](S, S y, S g) { return g * y; }, [](S x, S, S g) { return g * x; });
}

template <class S>
BasicTensor<S> add_scalar(const BasicTensor<S> & a, Scalar<S> s)
{
  return unary_op(
    a, "add_scalar", [s](S x) { return x + s; }, [](S, S, S g) { return g; });
}

template <class S>
BasicTensor<S> mul_scalar(const BasicTensor<S> & a, Scalar<S> s)
{
  return unary_op(
    a, "mul_scalar", [s](S x) { return x * s; }, [s](S, S, S g) { return g * s; });
}

template <class S>
BasicTensor<S> relu(const BasicTensor<S> & a)
{
  return unary_op(
    a, "relu", [](S x) { return x > S(0) ? x : S(0); },
    [](S x, S, S g) { return x > S(0) ? g : S(0); });
}

template <class S>
BasicTensor<S> exp(const BasicTensor<S> & a)
{
  return unary_op(
    a, "exp", [](S x) { return std::exp(x); }, [](S, S y, S g) { return g * y; });
}

template <class S>
BasicTensor<S> log(const BasicTensor<S> & a)
{
  return unary_op(
    a, "log", [](S x) { return std::log(x); }, [](S x, S, S g) { return g / x; });
}

template <class S>
BasicTensor<S> matmul(const BasicTensor<S> & a, const BasicTensor<S> & b)
{
  if (a.ndim() < 2 || b.ndim() < 2) {
    throw ShapeError(
      "matmul: operands must have rank >= 2, got " + to_string(a.shape()) + " and " +
      to_string(b.shape()));
  }
  const auto M = a.dim(-2);
  const auto K = a.dim(-1);
  const auto N = b.dim(-1);
  if (b.dim(-2) != K) {
    throw ShapeError(
      "matmul: inner extents differ in " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }

  if (b.ndim() == 2) {
    const auto P = a.numel() / K;
    Shape out_shape = a.shape();
    out_shape.back() = N;
    std::vector<S> out(static_cast<std::size_t>(P * N));
    MutMap<S>(out.data(), P, N).noalias() =
      ConstMap<S>(a.values().data(), P, K) * ConstMap<S>(b.values().data(), K, N);
    return BasicTensor<S>::make(std::move(out_shape), std::move(out), "matmul", {a, b}, [P, K, N](detail::Node<S> & self) {
      detail::Node<S> & pa = *self.parents[0];
      detail::Node<S> & pb = *self.parents[1];
      ConstMap<S> g(self.grad.data(), P, N);
      if (pa.requires_grad) {
        MutMap<S>(pa.ensure_grad().data(), P, K).noalias() += g * ConstMap<S>(pb.value.data(), K, N).transpose();
      }
      if (pb.requires_grad) {
        MutMap<S>(pb.ensure_grad().data(), K, N).noalias() += ConstMap<S>(pa.value.data(), P, K).transpose() * g;
      }
    });
  }

  const Shape batch_a(a.shape().begin(), a.shape().end() - 2);
  const Shape batch_b(b.shape().begin(), b.shape().end() - 2);
  Shape batch;
  try {
    batch = broadcast_shape(batch_a, batch_b);
  } catch (const ShapeError &) {
    throw ShapeError(
      "matmul: batch extents do not broadcast in " + to_string(a.shape()) + " x " +
      to_string(b.shape()));
  }
  auto oa = broadcast_offsets(batch_a, batch);
  auto ob = broadcast_offsets(batch_b, batch);
  const auto B = numel(batch);
  Shape out_shape = batch;
  out_shape.push_back(M);
  out_shape.push_back(N);
  std::vector<S> out(static_cast<std::size_t>(B * M * N));
  const S * av = a.values().data();
  const S * bv = b.values().data();
  for (std::int64_t i = 0; i < B; ++i) {
    MutMap<S>(out.data() + i * M * N, M, N).noalias() =
      ConstMap<S>(av + at_offset(oa, i) * M * K, M, K) * ConstMap<S>(bv + at_offset(ob, i) * K * N, K, N);
  }
  return BasicTensor<S>::make(
    std::move(out_shape), std::move(out), "matmul", {a, b},
    [oa = std::move(oa), ob = std::move(ob), B, M, K, N](detail::Node<S> & self) {
      detail::Node<S> & pa = *self.parents[0];
      detail::Node<S> & pb = *self.parents[1];
      for (std::int64_t i = 0; i < B; ++i) {
        ConstMap<S> g(self.grad.data() + i * M * N, M, N);
        const auto ia = at_offset(oa, i) * M * K;
        const auto ib = at_offset(ob, i) * K * N;
        if (pa.requires_grad) {
          MutMap<S>(pa.ensure_grad().data() + ia, M, K).noalias() +=
            g * ConstMap<S>(pb.value.data() + ib, K, N).transpose();
        }
        if (pb.requires_grad) {
          MutMap<S>(pb.ensure_grad().data() + ib, K, N).noalias() +=
            ConstMap<S>(pa.value.data() + ia, M, K).transpose() * g;
        }
      }
    });
}

template <class S>
BasicTensor<S> reshape(const BasicTensor<S> & a, Shape shape)
{
  std::int64_t known = 1;
  int infer = -1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw ShapeError("reshape: more than one inferred extent");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0 && known > 0) {
    shape[infer] = a.numel() / known;
  }
  if (numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  std::vector<S> out(a.values().begin(), a.values().end());
  return BasicTensor<S>::make(std::move(shape), std::move(out), "reshape", {a}, [](detail::Node<S> & self) {
    auto & g = self.parents[0]->ensure_grad();
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += self.grad[k];
  });
}

template <class S>
BasicTensor<S> permute(const BasicTensor<S> & a, const std::vector<int> & axes)
{
  const auto nd = a.ndim();
  if (static_cast<std::int64_t>(axes.size()) != nd) {
    throw ShapeError("permute: axis list rank mismatch for shape " + to_string(a.shape()));
  }
  std::vector<std::int64_t> in_stride(nd);
  std::int64_t s = 1;
  for (auto i = nd - 1; i >= 0; --i) {
    in_stride[i] = s;
    s *= a.shape()[i];
  }
  Shape out_shape(nd);
  std::vector<std::int64_t> stride(nd);
  std::vector<bool> used(nd, false);
  for (std::int64_t i = 0; i < nd; ++i) {
    const int ax = normalize_axis(axes[i], nd, a.shape());
    if (used[ax]) throw ShapeError("permute: repeated axis");
    used[ax] = true;
    out_shape[i] = a.shape()[ax];
    stride[i] = in_stride[ax];
  }
  const auto n = a.numel();
  std::vector<std::int64_t> map(static_cast<std::size_t>(n));
  std::vector<std::int64_t> idx(nd, 0);
  std::int64_t cur = 0;
  for (std::int64_t k = 0; k < n; ++k) {
    map[k] = cur;
    for (auto d = nd - 1; d >= 0; --d) {
      if (++idx[d] < out_shape[d]) {
        cur += stride[d];
        break;
      }
      cur -= stride[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
  std::vector<S> out(static_cast<std::size_t>(n));
  const auto av = a.values();
  for (std::int64_t k = 0; k < n; ++k) out[k] = av[map[k]];
  return BasicTensor<S>::make(std::move(out_shape), std::move(out), "permute", {a}, [map = std::move(map)](detail::Node<S> & self) {
    auto & g = self.parents[0]->ensure_grad();
    for (std::size_t k = 0; k < map.size(); ++k) g[map[k]] += self.grad[k];
  });
}

template <class S>
BasicTensor<S> transpose(const BasicTensor<S> & a, int axis0, int axis1)
{
  const auto nd = a.ndim();
  std::vector<int> axes(nd);
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[normalize_axis(axis0, nd, a.shape())], axes[normalize_axis(axis1, nd, a.shape())]);
  return permute(a, axes);
}

template <class S>
BasicTensor<S> concat(std::span<const BasicTensor<S>> parts, int axis)
{
  if (parts.empty()) {
    throw ShapeError("concat: no inputs");
  }
  const auto & ref = parts.front().shape();
  const int ax = normalize_axis(axis, static_cast<std::int64_t>(ref.size()), ref);
  Shape out_shape = ref;
  out_shape[ax] = 0;
  for (const auto & p : parts) {
    bool ok = p.ndim() == static_cast<std::int64_t>(ref.size());
    for (std::size_t i = 0; ok && i < ref.size(); ++i) {
      ok = static_cast<int>(i) == ax || p.shape()[i] == ref[i];
    }
    if (!ok) {
      throw ShapeError(
        "concat: shape " + to_string(p.shape()) + " incompatible with " + to_string(ref) +
        " along axis " + std::to_string(ax));
    }
    out_shape[ax] += p.shape()[ax];
  }
  const auto split = split_at(out_shape, ax);
  std::vector<S> out(static_cast<std::size_t>(numel(out_shape)));
  std::vector<std::int64_t> lens;
  std::int64_t begin = 0;
  for (const auto & p : parts) {
    const auto len = p.shape()[ax];
    const auto pv = p.values();
    for (std::int64_t o = 0; o < split.outer; ++o) {
      std::copy_n(
        pv.begin() + o * len * split.inner, len * split.inner,
        out.begin() + (o * split.len + begin) * split.inner);
    }
    lens.push_back(len);
    begin += len;
  }
  std::vector<BasicTensor<S>> parents(parts.begin(), parts.end());
  return BasicTensor<S>::make(
    std::move(out_shape), std::move(out), "concat", std::move(parents),
    [lens = std::move(lens), split](detail::Node<S> & self) {
      std::int64_t begin = 0;
      for (std::size_t i = 0; i < lens.size(); ++i) {
        detail::Node<S> & p = *self.parents[i];
        const auto len = lens[i];
        if (p.requires_grad) {
          auto & g = p.ensure_grad();
          for (std::int64_t o = 0; o < split.outer; ++o) {
            const S * src = self.grad.data() + (o * split.len + begin) * split.inner;
            S * dst = g.data() + o * len * split.inner;
            for (std::int64_t k = 0; k < len * split.inner; ++k) dst[k] += src[k];
          }
        }
        begin += len;
      }
    });
}

template <class S>
BasicTensor<S> slice(const BasicTensor<S> & a, int axis, std::int64_t begin, std::int64_t end)
{
  const int ax = normalize_axis(axis, a.ndim(), a.shape());
  const auto extent = a.shape()[ax];
  if (begin < 0 || end > extent || begin > end) {
    throw ShapeError(
      "slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for shape " +
      to_string(a.shape()) + " axis " + std::to_string(ax));
  }
  const auto split = split_at(a.shape(), ax);
  Shape out_shape = a.shape();
  out_shape[ax] = end - begin;
  const auto len = end - begin;
  std::vector<S> out(static_cast<std::size_t>(split.outer * len * split.inner));
  const auto av = a.values();
  for (std::int64_t o = 0; o < split.outer; ++o) {
    std::copy_n(
      av.begin() + (o * split.len + begin) * split.inner, len * split.inner,
      out.begin() + o * len * split.inner);
  }
  return BasicTensor<S>::make(std::move(out_shape), std::move(out), "slice", {a}, [split, begin, len](detail::Node<S> & self) {
    auto & g = self.parents[0]->ensure_grad();
    for (std::int64_t o = 0; o < split.outer; ++o) {
      const S * src = self.grad.data() + o * len * split.inner;
      S * dst = g.data() + (o * split.len + begin) * split.inner;
      for (std::int64_t k = 0; k < len * split.inner; ++k) dst[k] += src[k];
    }
  });
}

template <class S>
BasicTensor<S> index_select(const BasicTensor<S> & a, int axis, std::span<const std::int64_t> indices)
{
  const int ax = normalize_axis(axis, a.ndim(), a.shape());
  const auto split = split_at(a.shape(), ax);
  for (auto i : indices) {
    if (i < 0 || i >= split.len) {
      throw ShapeError(
        "index_select: index " + std::to_string(i) + " out of range for shape " + to_string(a.shape()));
    }
  }
  Shape out_shape = a.shape();
  const auto m = static_cast<std::int64_t>(indices.size());
  out_shape[ax] = m;
  std::vector<S> out(static_cast<std::size_t>(split.outer * m * split.inner));
  const auto av = a.values();
  for (std::int64_t o = 0; o < split.outer; ++o) {
    for (std::int64_t j = 0; j < m; ++j) {
      std::copy_n(
        av.begin() + (o * split.len + indices[j]) * split.inner, split.inner,
        out.begin() + (o * m + j) * split.inner);
    }
  }
  std::vector<std::int64_t> idx(indices.begin(), indices.end());
  return BasicTensor<S>::make(
    std::move(out_shape), std::move(out), "index_select", {a}, [idx = std::move(idx), split](detail::Node<S> & self) {
      auto & g = self.parents[0]->ensure_grad();
      const auto m = static_cast<std::int64_t>(idx.size());
      for (std::int64_t o = 0; o < split.outer; ++o) {
        for (std::int64_t j = 0; j < m; ++j) {
          const S * src = self.grad.data() + (o * m + j) * split.inner;
          S * dst = g.data() + (o * split.len + idx[j]) * split.inner;
          for (std::int64_t k = 0; k < split.inner; ++k) dst[k] += src[k];
        }
      }
    });
}

template <class S>
BasicTensor<S> softmax(const BasicTensor<S> & a, int axis, const BasicTensor<S> & mask)
{
  const int ax = normalize_axis(axis, a.ndim(), a.shape());
  const auto split = split_at(a.shape(), ax);
  auto keep = expand_mask(mask, a.shape(), "softmax");
  std::vector<S> out(static_cast<std::size_t>(a.numel()), S(0));
  const auto av = a.values();
  for (std::int64_t o = 0; o < split.outer; ++o) {
    for (std::int64_t i = 0; i < split.inner; ++i) {
      const auto base = o * split.len * split.inner + i;
      S mx = -std::numeric_limits<S>::infinity();
      for (std::int64_t j = 0; j < split.len; ++j) {
        const auto k = base + j * split.inner;
        if (keep[k]) mx = std::max(mx, av[k]);
      }
      if (mx == -std::numeric_limits<S>::infinity()) {
        continue;  // fully masked row stays zero
      }
      double total = 0.0;
      for (std::int64_t j = 0; j < split.len; ++j) {
        const auto k = base + j * split.inner;
        if (keep[k]) {
          out[k] = std::exp(av[k] - mx);
          total += out[k];
        }
      }
      const auto inv = static_cast<S>(1.0 / total);
      for (std::int64_t j = 0; j < split.len; ++j) out[base + j * split.inner] *= inv;
    }
  }
  return BasicTensor<S>::make(a.shape(), std::move(out), "softmax", {a}, [split](detail::Node<S> & self) {
    auto & g = self.parents[0]->ensure_grad();
    const auto & y = self.value;
    const auto & dy = self.grad;
    for (std::int64_t o = 0; o < split.outer; ++o) {
      for (std::int64_t i = 0; i < split.inner; ++i) {
        const auto base = o * split.len * split.inner + i;
        double dot = 0.0;
        for (std::int64_t j = 0; j < split.len; ++j) {
          const auto k = base + j * split.inner;
          dot += static_cast<double>(dy[k]) * y[k];
        }
        const auto d = static_cast<S>(dot);
        for (std::int64_t j = 0; j < split.len; ++j) {
          const auto k = base + j * split.inner;
          g[k] += y[k] * (dy[k] - d);
        }
      }
    }
  });
}

template <class S>
BasicTensor<S> layer_norm(const BasicTensor<S> & x, const BasicTensor<S> & gamma, const BasicTensor<S> & beta, double eps)
{
  const auto D = x.dim(-1);
  if (gamma.shape() != Shape{D} || beta.shape() != Shape{D}) {
    throw ShapeError(
      "layer_norm: scale " + to_string(gamma.shape()) + " / shift " + to_string(beta.shape()) +
      " do not match input " + to_string(x.shape()));
  }
  const auto rows = x.numel() / std::max<std::int64_t>(D, 1);
  std::vector<S> out(static_cast<std::size_t>(x.numel()));
  std::vector<S> xhat(out.size());
  std::vector<S> rstd(static_cast<std::size_t>(rows));
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  for (std::int64_t r = 0; r < rows; ++r) {
    const S * row = xv.data() + r * D;
    double m = 0.0;
    for (std::int64_t j = 0; j < D; ++j) m += row[j];
    m /= static_cast<double>(D);
    double var = 0.0;
    for (std::int64_t j = 0; j < D; ++j) var += (row[j] - m) * (row[j] - m);
    var /= static_cast<double>(D);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[r] = static_cast<S>(rs);
    for (std::int64_t j = 0; j < D; ++j) {
      const auto h = static_cast<S>((row[j] - m) * rs);
      xhat[r * D + j] = h;
      out[r * D + j] = h * gv[j] + bv[j];
    }
  }
  return BasicTensor<S>::make(
    x.shape(), std::move(out), "layer_norm", {x, gamma, beta},
    [xhat = std::move(xhat), rstd = std::move(rstd), rows, D](detail::Node<S> & self) {
      detail::Node<S> & px = *self.parents[0];
      detail::Node<S> & pg = *self.parents[1];
      detail::Node<S> & pb = *self.parents[2];
      const auto & dy = self.grad;
      if (pg.requires_grad) {
        auto & g = pg.ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t j = 0; j < D; ++j) g[j] += dy[r * D + j] * xhat[r * D + j];
      }
      if (pb.requires_grad) {
        auto & g = pb.ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r)
          for (std::int64_t j = 0; j < D; ++j) g[j] += dy[r * D + j];
      }
      if (px.requires_grad) {
        auto & g = px.ensure_grad();
        const auto & gam = pg.value;
        for (std::int64_t r = 0; r < rows; ++r) {
          double s1 = 0.0;
          double s2 = 0.0;
          for (std::int64_t j = 0; j < D; ++j) {
            const double dh = static_cast<double>(dy[r * D + j]) * gam[j];
            s1 += dh;
            s2 += dh * xhat[r * D + j];
          }
          s1 /= static_cast<double>(D);
          s2 /= static_cast<double>(D);
          for (std::int64_t j = 0; j < D; ++j) {
            const double dh = static_cast<double>(dy[r * D + j]) * gam[j];
            g[r * D + j] += static_cast<S>(rstd[r] * (dh - s1 - xhat[r * D + j] * s2));
          }
        }
      }
    });
}

template <class S>
BasicTensor<S> max_pool(const BasicTensor<S> & a, int axis, const BasicTensor<S> & mask)
{
  const int ax = normalize_axis(axis, a.ndim(), a.shape());
  const auto split = split_at(a.shape(), ax);
  const auto keep = expand_mask(mask, a.shape(), "max_pool");
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + ax);
  std::vector<S> out(static_cast<std::size_t>(split.outer * split.inner), S(0));
  std::vector<std::int64_t> arg(out.size(), -1);
  const auto av = a.values();
  for (std::int64_t o = 0; o < split.outer; ++o) {
    for (std::int64_t i = 0; i < split.inner; ++i) {
      const auto base = o * split.len * split.inner + i;
      std::int64_t best = -1;
      for (std::int64_t j = 0; j < split.len; ++j) {
        const auto k = base + j * split.inner;
        if (keep[k] && (best < 0 || av[k] > av[best])) best = k;
      }
      if (best >= 0) {
        out[o * split.inner + i] = av[best];
        arg[o * split.inner + i] = best;
      }
    }
  }
  return BasicTensor<S>::make(std::move(out_shape), std::move(out), "max_pool", {a}, [arg = std::move(arg)](detail::Node<S> & self) {
    auto & g = self.parents[0]->ensure_grad();
    for (std::size_t k = 0; k < arg.size(); ++k) {
      if (arg[k] >= 0) g[arg[k]] += self.grad[k];
    }
  });
}

template <class S>
BasicTensor<S> sum(const BasicTensor<S> & a)
{
  double total = 0.0;
  for (auto v : a.values()) total += v;
  return BasicTensor<S>::make({}, {static_cast<S>(total)}, "sum", {a}, [](detail::Node<S> & self) {
    auto & g = self.parents[0]->ensure_grad();
    for (auto & v : g) v += self.grad[0];
  });
}

template <class S>
BasicTensor<S> mean(const BasicTensor<S> & a)
{
  const auto n = static_cast<double>(a.numel());
  double total = 0.0;
  for (auto v : a.values()) total += v;
  return BasicTensor<S>::make({}, {static_cast<S>(total / n)}, "mean", {a}, [n](detail::Node<S> & self) {
    auto & g = self.parents[0]->ensure_grad();
    const auto d = static_cast<S>(self.grad[0] / n);
    for (auto & v : g) v += d;
  });
}

template <class S>
BasicTensor<S> l1_loss(const BasicTensor<S> & pred, const BasicTensor<S> & target)
{
  if (pred.shape() != target.shape()) {
    throw ShapeError(
      "l1_loss: prediction " + to_string(pred.shape()) + " vs target " + to_string(target.shape()));
  }
  const auto n = static_cast<double>(pred.numel());
  const auto pv = pred.values();
  const auto tv = target.values();
  double total = 0.0;
  for (std::size_t k = 0; k < pv.size(); ++k) total += std::abs(static_cast<double>(pv[k]) - tv[k]);
  return BasicTensor<S>::make({}, {static_cast<S>(total / n)}, "l1_loss", {pred, target}, [n](detail::Node<S> & self) {
    detail::Node<S> & pp = *self.parents[0];
    detail::Node<S> & pt = *self.parents[1];
    const auto d = static_cast<S>(self.grad[0] / n);
    for (std::size_t k = 0; k < pp.value.size(); ++k) {
      const S diff = pp.value[k] - pt.value[k];
      const S s = diff > S(0) ? d : (diff < S(0) ? -d : S(0));
      if (pp.requires_grad) pp.ensure_grad()[k] += s;
      if (pt.requires_grad) pt.ensure_grad()[k] -= s;
    }
  });
}

template <class S>
BasicTensor<S> masked_mse(const BasicTensor<S> & pred, const BasicTensor<S> & target, const BasicTensor<S> & mask)
{
  if (pred.shape() != target.shape()) {
    throw ShapeError(
      "masked_mse: prediction " + to_string(pred.shape()) + " vs target " + to_string(target.shape()));
  }
  auto keep = expand_mask(mask, pred.shape(), "masked_mse");
  const auto count = std::count(keep.begin(), keep.end(), std::uint8_t{1});
  if (count == 0) {
    return BasicTensor<S>::scalar(S(0));
  }
  const auto pv = pred.values();
  const auto tv = target.values();
  double total = 0.0;
  for (std::size_t k = 0; k < pv.size(); ++k) {
    if (keep[k]) {
      const double d = static_cast<double>(pv[k]) - tv[k];
      total += d * d;
    }
  }
  const auto n = static_cast<double>(count);
  return BasicTensor<S>::make(
    {}, {static_cast<S>(total / n)}, "masked_mse", {pred, target},
    [keep = std::move(keep), n](detail::Node<S> & self) {
      detail::Node<S> & pp = *self.parents[0];
      detail::Node<S> & pt = *self.parents[1];
      const double scale = 2.0 * self.grad[0] / n;
      for (std::size_t k = 0; k < keep.size(); ++k) {
        if (!keep[k]) continue;
        const auto g = static_cast<S>(scale * (static_cast<double>(pp.value[k]) - pt.value[k]));
        if (pp.requires_grad) pp.ensure_grad()[k] += g;
        if (pt.requires_grad) pt.ensure_grad()[k] -= g;
      }
    });
}

template <class S>
BasicTensor<S> binary_cross_entropy(const BasicTensor<S> & prob, const BasicTensor<S> & target, Reduction reduction, double eps)
{
  if (prob.shape() != target.shape()) {
    throw ShapeError(
      "binary_cross_entropy: probability " + to_string(prob.shape()) + " vs target " +
      to_string(target.shape()));
  }
  const auto pv = prob.values();
  const auto tv = target.values();
  const double lo = eps;
  const double hi = 1.0 - eps;
  double total = 0.0;
  for (std::size_t k = 0; k < pv.size(); ++k) {
    const double p = std::clamp(static_cast<double>(pv[k]), lo, hi);
    total -= tv[k] * std::log(p) + (1.0 - tv[k]) * std::log(1.0 - p);
  }
  const double denom = reduction == Reduction::kMean ? static_cast<double>(pv.size()) : 1.0;
  return BasicTensor<S>::make(
    {}, {static_cast<S>(total / denom)}, "binary_cross_entropy", {prob, target},
    [lo, hi, denom](detail::Node<S> & self) {
      detail::Node<S> & pp = *self.parents[0];
      if (!pp.requires_grad) return;
      auto & g = pp.ensure_grad();
      const auto & tv = self.parents[1]->value;
      const double scale = self.grad[0] / denom;
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double p = pp.value[k];
        if (p < lo || p > hi) continue;  // clamped region is flat
        g[k] += static_cast<S>(scale * (-tv[k] / p + (1.0 - tv[k]) / (1.0 - p)));
      }
    });
}

#define SCENEPT_INSTANTIATE_OPS(S)                                                          \
  template BasicTensor<S> add(const BasicTensor<S> &, const BasicTensor<S> &);              \
  template BasicTensor<S> sub(const BasicTensor<S> &, const BasicTensor<S> &);              \
  template BasicTensor<S> mul(const BasicTensor<S> &, const BasicTensor<S> &);              \
  template BasicTensor<S> add_scalar(const BasicTensor<S> &, Scalar<S>);                    \
  template BasicTensor<S> mul_scalar(const BasicTensor<S> &, Scalar<S>);                    \
  template BasicTensor<S> relu(const BasicTensor<S> &);                                     \
  template BasicTensor<S> exp(const BasicTensor<S> &);                                      \
  template BasicTensor<S> log(const BasicTensor<S> &);                                      \
  template BasicTensor<S> matmul(const BasicTensor<S> &, const BasicTensor<S> &);           \
  template BasicTensor<S> reshape(const BasicTensor<S> &, Shape);                           \
  template BasicTensor<S> permute(const BasicTensor<S> &, const std::vector<int> &);        \
  template BasicTensor<S> transpose(const BasicTensor<S> &, int, int);                      \
  template BasicTensor<S> concat(std::span<const BasicTensor<S>>, int);                     \
  template BasicTensor<S> slice(const BasicTensor<S> &, int, std::int64_t, std::int64_t);   \
  template BasicTensor<S> index_select(                                                     \
    const BasicTensor<S> &, int, std::span<const std::int64_t>);                            \
  template BasicTensor<S> softmax(const BasicTensor<S> &, int, const BasicTensor<S> &);     \
  template BasicTensor<S> layer_norm(                                                       \
    const BasicTensor<S> &, const BasicTensor<S> &, const BasicTensor<S> &, double);        \
  template BasicTensor<S> max_pool(const BasicTensor<S> &, int, const BasicTensor<S> &);    \
  template BasicTensor<S> sum(const BasicTensor<S> &);                                      \
  template BasicTensor<S> mean(const BasicTensor<S> &);                                     \
  template BasicTensor<S> l1_loss(const BasicTensor<S> &, const BasicTensor<S> &);          \
  template BasicTensor<S> masked_mse(                                                       \
    const BasicTensor<S> &, const BasicTensor<S> &, const BasicTensor<S> &);                \
  template BasicTensor<S> binary_cross_entropy(                                             \
    const BasicTensor<S> &, const BasicTensor<S> &, Reduction, double);

SCENEPT_INSTANTIATE_OPS(float)
SCENEPT_INSTANTIATE_OPS(double)

}  // namespace scenept::ad
