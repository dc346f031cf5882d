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

#include <filesystem>
#include <fstream>

#include "scenept/config.hpp"

using namespace scenept;

TEST_CASE("defaults match the desk-scale schedule")
{
  const RunConfig c;
  CHECK(c.epochs_pre == 30);
  CHECK(c.epochs_ft == 20);
  CHECK(c.batch == 32);
  CHECK(c.lr == 2e-4);
  CHECK(c.clip == 1.0);
  CHECK(c.p_mtm == 0.5);
  CHECK(c.p_mrm == 0.5);
  CHECK(c.t_h == 8);
  CHECK(c.k_tp == 2);
  CHECK(c.min_len_mtm == 5);
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("text round trip is lossless")
{
  RunConfig c;
  c.seed = 18446744073709551615ULL;
  c.lr = 0.1 + 0.2;
  c.p_mtm = 1.0 / 3.0;
  c.tasks = "mrm,tp";
  c.scratch = true;
  c.out = "a dir/with spaces";
  RunConfig back;
  apply_text(back, to_text(c));
  CHECK(back == c);
}

TEST_CASE("file values override defaults and later settings override the file")
{
  const auto path = std::filesystem::temp_directory_path() / "scenept_test_config.txt";
  {
    std::ofstream f(path);
    f << "# comment\n  seed = 7   \nlr=0.001 # trailing\n\nd = 32\n";
  }
  RunConfig c;
  apply_file(c, path);
  CHECK(c.seed == 7);
  CHECK(c.lr == 0.001);
  CHECK(c.d == 32);
  CHECK(c.heads == 8);
  set_field(c, "seed", "9");
  CHECK(c.seed == 9);
  CHECK(c.lr == 0.001);
  std::filesystem::remove(path);
}

TEST_CASE("unknown keys and bad values are rejected")
{
  RunConfig c;
  CHECK_THROWS_AS(set_field(c, "learning_rate", "1"), ConfigError);
  CHECK_THROWS_AS(set_field(c, "seed", "-1x"), ConfigError);
  CHECK_THROWS_AS(set_field(c, "scratch", "maybe"), ConfigError);
  CHECK_THROWS_AS(apply_text(c, "seed 3\n"), ConfigError);
  CHECK_THROWS_AS(apply_file(c, "/nonexistent/scenept.cfg"), ConfigError);
}

TEST_CASE("validate rejects out-of-range combinations")
{
  RunConfig c;
  c.device = "cuda";
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.t_h = 20;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.p_mtm = 1.5;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.d = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.batch = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("derived configs")
{
  RunConfig c;
  c.t = 12;
  c.t_h = 5;
  c.d = 48;
  const auto m = model_config(c);
  CHECK(m.D == 48);
  CHECK(m.T == 12);
  CHECK(m.tp_tail == 7);
  CHECK(pretrain_config(c).T_h == 5);
  CHECK(gen_config(c).T == 12);
}

TEST_CASE("differing lists changed keys only")
{
  RunConfig a;
  RunConfig b;
  b.d = 64;
  b.heads = 4;
  b.lr = 1.0;
  std::map<std::string, std::string> ma, mb;
  for (auto & [k, v] : to_pairs(a)) ma[k] = v;
  for (auto & [k, v] : to_pairs(b)) mb[k] = v;
  const auto d = differing(ma, mb, encoder_keys());
  REQUIRE(d.size() == 2);
  CHECK(d[0] == "d: 256 -> 64");
  CHECK(d[1] == "heads: 8 -> 4");
}

TEST_CASE("fingerprint tracks every field")
{
  RunConfig a;
  RunConfig b;
  CHECK(fingerprint(a) == fingerprint(b));
  CHECK(fingerprint(a).size() == 16);
  b.svg_scenes = 4;
  CHECK(fingerprint(a) != fingerprint(b));
}
