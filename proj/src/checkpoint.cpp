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

#include "scenept/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace scenept::ad
{

namespace
{

constexpr std::array<char, 8> kMagic = {'S', 'C', 'P', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void put_le(std::ostream & os, T value)
{
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  auto u = std::bit_cast<U>(value);
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((u >> (8 * i)) & 0xFF);
  }
  os.write(bytes.data(), bytes.size());
}

template <class T>
T get_le(std::istream & is, const char * what)
{
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::array<unsigned char, sizeof(U)> bytes{};
  is.read(reinterpret_cast<char *>(bytes.data()), bytes.size());
  if (!is) {
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  U u = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    u |= static_cast<U>(bytes[i]) << (8 * i);
  }
  return std::bit_cast<T>(u);
}

void put_string(std::ostream & os, const std::string & s)
{
  put_le<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream & is, const char * what)
{
  const auto n = get_le<std::uint64_t>(is, what);
  if (n > (1ULL << 32)) {
    throw CheckpointError(std::string("implausible length for ") + what);
  }
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) {
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  return s;
}

}  // namespace

const TensorRecord * Checkpoint::find(const std::string & name) const
{
  for (const auto & r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

void write_checkpoint(const std::filesystem::path & path, const Checkpoint & ckpt)
{
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  }
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kFormatVersion);
  put_string(os, ckpt.manifest.dump());
  put_le<std::uint64_t>(os, ckpt.records.size());
  for (const auto & r : ckpt.records) {
    put_string(os, r.name);
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.shape.size()));
    for (auto e : r.shape) put_le<std::int64_t>(os, e);
    put_le<std::uint64_t>(os, r.data.size());
    for (auto v : r.data) put_le<float>(os, v);
  }
  if (!os) {
    throw CheckpointError("failed writing checkpoint: " + path.string());
  }
}

Checkpoint read_checkpoint(const std::filesystem::path & path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw CheckpointError("cannot open checkpoint: " + path.string());
  }
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) {
    throw CheckpointError("not a checkpoint file: " + path.string());
  }
  const auto version = get_le<std::uint32_t>(is, "format version");
  if (version != kFormatVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  try {
    ckpt.manifest = nlohmann::json::parse(get_string(is, "manifest"));
  } catch (const nlohmann::json::parse_error & e) {
    throw CheckpointError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  const auto count = get_le<std::uint64_t>(is, "record count");
  for (std::uint64_t i = 0; i < count; ++i) {
    TensorRecord r;
    r.name = get_string(is, "record name");
    const auto nd = get_le<std::uint32_t>(is, "record rank");
    for (std::uint32_t d = 0; d < nd; ++d) r.shape.push_back(get_le<std::int64_t>(is, "record shape"));
    const auto n = get_le<std::uint64_t>(is, "payload size");
    if (static_cast<std::int64_t>(n) != numel(r.shape)) {
      throw CheckpointError("record " + r.name + ": payload size does not match shape");
    }
    r.data.resize(n);
    for (auto & v : r.data) v = get_le<float>(is, "payload");
    ckpt.records.push_back(std::move(r));
  }
  return ckpt;
}

void append_params(Checkpoint & ckpt, const ParamStore & store, const std::string & prefix)
{
  for (const auto & p : store.params()) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    const auto v = p.tensor.values();
    ckpt.records.push_back({p.name, p.tensor.shape(), {v.begin(), v.end()}});
  }
}

void append_optimizer(Checkpoint & ckpt, const Adam & opt)
{
  for (std::size_t i = 0; i < opt.params().size(); ++i) {
    const auto & p = opt.params()[i];
    ckpt.records.push_back({"adam.m/" + p.name, p.tensor.shape(), opt.first_moment(i)});
    ckpt.records.push_back({"adam.v/" + p.name, p.tensor.shape(), opt.second_moment(i)});
  }
  ckpt.manifest["adam_step"] = opt.step_count();
}

std::size_t load_params(const Checkpoint & ckpt, ParamStore & store, const std::string & prefix)
{
  std::size_t loaded = 0;
  for (const auto & p : store.params()) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    const auto * r = ckpt.find(p.name);
    if (r == nullptr) {
      throw CheckpointError("checkpoint lacks parameter " + p.name);
    }
    if (r->shape != p.tensor.shape()) {
      throw CheckpointError(
        "parameter " + p.name + ": checkpoint shape " + to_string(r->shape) + " vs model " +
        to_string(p.tensor.shape()));
    }
    auto t = p.tensor;
    std::copy(r->data.begin(), r->data.end(), t.mutable_values().begin());
    ++loaded;
  }
  return loaded;
}

void load_optimizer(const Checkpoint & ckpt, Adam & opt)
{
  for (std::size_t i = 0; i < opt.params().size(); ++i) {
    const auto & name = opt.params()[i].name;
    const auto * m = ckpt.find("adam.m/" + name);
    const auto * v = ckpt.find("adam.v/" + name);
    if (m == nullptr || v == nullptr) {
      throw CheckpointError("checkpoint lacks optimizer state for " + name);
    }
    if (m->data.size() != opt.first_moment(i).size() || v->data.size() != opt.second_moment(i).size()) {
      throw CheckpointError("optimizer state size mismatch for " + name);
    }
    opt.first_moment(i) = m->data;
    opt.second_moment(i) = v->data;
  }
  opt.set_step_count(ckpt.manifest.value("adam_step", std::int64_t{0}));
}

}  // namespace scenept::ad
