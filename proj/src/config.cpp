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

#include "scenept/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <variant>

namespace scenept
{

namespace
{

using Member = std::variant<
  std::uint64_t RunConfig::*, int RunConfig::*, double RunConfig::*, bool RunConfig::*, std::string RunConfig::*>;

struct Field
{
  const char * key;
  Member member;
};

const std::vector<Field> & fields()
{
  static const std::vector<Field> f = {
    {"seed", &RunConfig::seed},
    {"out", &RunConfig::out},
    {"tasks", &RunConfig::tasks},
    {"scratch", &RunConfig::scratch},
    {"prune", &RunConfig::prune},
    {"corpus", &RunConfig::corpus},
    {"init", &RunConfig::init},
    {"resume", &RunConfig::resume},
    {"device", &RunConfig::device},
    {"p_mtm", &RunConfig::p_mtm},
    {"p_mrm", &RunConfig::p_mrm},
    {"t_h", &RunConfig::t_h},
    {"k_tp", &RunConfig::k_tp},
    {"min_len_mtm", &RunConfig::min_len_mtm},
    {"pretrain_splits", &RunConfig::pretrain_splits},
    {"epochs_pre", &RunConfig::epochs_pre},
    {"epochs_ft", &RunConfig::epochs_ft},
    {"batch", &RunConfig::batch},
    {"lr", &RunConfig::lr},
    {"clip", &RunConfig::clip},
    {"train_limit", &RunConfig::train_limit},
    {"eval_train", &RunConfig::eval_train},
    {"data_seed", &RunConfig::data_seed},
    {"n_scenes", &RunConfig::n_scenes},
    {"a_max", &RunConfig::a_max},
    {"t", &RunConfig::t},
    {"f", &RunConfig::f},
    {"map_style", &RunConfig::map_style},
    {"d", &RunConfig::d},
    {"k_t", &RunConfig::k_t},
    {"k_s", &RunConfig::k_s},
    {"k_c", &RunConfig::k_c},
    {"heads", &RunConfig::heads},
    {"dim_head", &RunConfig::dim_head},
    {"n_modes", &RunConfig::n_modes},
    {"ffn_mult", &RunConfig::ffn_mult},
    {"mlp_hidden", &RunConfig::mlp_hidden},
    {"query_self_attn", &RunConfig::query_self_attn},
    {"n_seeds", &RunConfig::n_seeds},
    {"arms", &RunConfig::arms},
    {"sweep_task", &RunConfig::sweep_task},
    {"sweep_values", &RunConfig::sweep_values},
    {"svg_scenes", &RunConfig::svg_scenes},
  };
  return f;
}

std::string format_double(double v)
{
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string & key, const std::string & text)
{
  T v{};
  const auto * end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) {
    throw ConfigError("config: cannot parse '" + text + "' for key '" + key + "'");
  }
  return v;
}

bool parse_bool(const std::string & key, const std::string & text)
{
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config: cannot parse '" + text + "' as a boolean for key '" + key + "'");
}

std::string trim(const std::string & s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> to_pairs(const RunConfig & cfg)
{
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto & f : fields()) {
    std::string value = std::visit(
      [&](auto member) -> std::string {
        const auto & v = cfg.*member;
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, std::string>) {
          return v;
        } else if constexpr (std::is_same_v<V, bool>) {
          return v ? "true" : "false";
        } else if constexpr (std::is_same_v<V, double>) {
          return format_double(v);
        } else {
          return std::to_string(v);
        }
      },
      f.member);
    out.emplace_back(f.key, std::move(value));
  }
  return out;
}

std::string to_text(const RunConfig & cfg)
{
  std::string s;
  for (const auto & [k, v] : to_pairs(cfg)) s += k + " = " + v + "\n";
  return s;
}

void set_field(RunConfig & cfg, const std::string & key, const std::string & value)
{
  for (const auto & f : fields()) {
    if (key != f.key) continue;
    std::visit(
      [&](auto member) {
        auto & v = cfg.*member;
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, std::string>) {
          v = value;
        } else if constexpr (std::is_same_v<V, bool>) {
          v = parse_bool(key, value);
        } else {
          v = parse_number<V>(key, value);
        }
      },
      f.member);
    return;
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

void apply_text(RunConfig & cfg, const std::string & text)
{
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: line " + std::to_string(n) + " is not 'key = value': " + line);
    }
    set_field(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_file(RunConfig & cfg, const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_text(cfg, ss.str());
}

void validate(const RunConfig & cfg)
{
  const auto require = [](bool ok, const std::string & what) {
    if (!ok) throw ConfigError("config: " + what);
  };
  require(cfg.device == "cpu", "device must be cpu");
  require(cfg.epochs_pre >= 0 && cfg.epochs_ft >= 0, "epoch counts must be >= 0");
  require(cfg.batch >= 1, "batch must be >= 1");
  require(cfg.lr >= 0.0, "lr must be >= 0");
  require(cfg.clip > 0.0, "clip must be > 0");
  require(cfg.train_limit >= 0, "train_limit must be >= 0");
  require(cfg.n_seeds >= 1, "n_seeds must be >= 1");
  require(cfg.t_h < cfg.t, "t_h must be below t (HeadTooLong)");
  require(cfg.svg_scenes >= 0, "svg_scenes must be >= 0");
  (void)TaskSet::parse(cfg.tasks);
  {
    std::stringstream ss(cfg.pretrain_splits);
    std::string split;
    int n = 0;
    while (std::getline(ss, split, ',')) {
      require(split == "train" || split == "val" || split == "test", "pretrain_splits: unknown split '" + split + "'");
      ++n;
    }
    require(n > 0, "pretrain_splits must name at least one split");
  }
  {
    std::stringstream ss(cfg.arms);
    std::string arm;
    while (std::getline(ss, arm, ';')) (void)TaskSet::parse(arm);
  }
  try {
    validate(pretrain_config(cfg));
    validate(model_config(cfg));
    validate(gen_config(cfg));
  } catch (const ConfigError &) {
    throw;
  } catch (const std::invalid_argument & e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ModelConfig model_config(const RunConfig & cfg)
{
  ModelConfig m;
  m.D = cfg.d;
  m.K_T = cfg.k_t;
  m.K_S = cfg.k_s;
  m.K_C = cfg.k_c;
  m.heads = cfg.heads;
  m.dim_head = cfg.dim_head;
  m.N = cfg.n_modes;
  m.ffn_mult = cfg.ffn_mult;
  m.mlp_hidden = cfg.mlp_hidden;
  m.T = cfg.t;
  m.F = cfg.f;
  m.query_self_attn = cfg.query_self_attn;
  m.tp_tail = std::max(1, cfg.t - cfg.t_h);
  return m;
}

PretrainConfig pretrain_config(const RunConfig & cfg)
{
  PretrainConfig p;
  p.p_mtm = cfg.p_mtm;
  p.p_mrm = cfg.p_mrm;
  p.T_h = cfg.t_h;
  p.k_tp = cfg.k_tp;
  p.min_len_mtm = cfg.min_len_mtm;
  return p;
}

GenConfig gen_config(const RunConfig & cfg)
{
  GenConfig g;
  g.seed = cfg.data_seed;
  g.n_scenes = cfg.n_scenes;
  g.A_max = cfg.a_max;
  g.T = cfg.t;
  g.F = cfg.f;
  g.map_style = parse_map_style(cfg.map_style);
  return g;
}

const std::vector<std::string> & encoder_keys()
{
  static const std::vector<std::string> k = {"d", "k_t", "k_s", "heads", "dim_head", "ffn_mult", "t"};
  return k;
}

std::vector<std::string> differing(
  const std::map<std::string, std::string> & a, const std::map<std::string, std::string> & b,
  const std::vector<std::string> & keys)
{
  std::vector<std::string> out;
  for (const auto & k : keys) {
    const auto ia = a.find(k);
    const auto ib = b.find(k);
    const std::string va = ia == a.end() ? "<missing>" : ia->second;
    const std::string vb = ib == b.end() ? "<missing>" : ib->second;
    if (va != vb) out.push_back(k + ": " + va + " -> " + vb);
  }
  return out;
}

std::string fingerprint(const RunConfig & cfg)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : to_text(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace scenept
