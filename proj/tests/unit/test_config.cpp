// Copyright 2026 The pmask Authors.
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


#include <doctest.h>

#include "helpers.hpp"
#include "pmask/config.hpp"
#include "pmask/errors.hpp"

using namespace pmask;

TEST_SUITE("config") {

TEST_CASE("empty text gives the documented defaults") {
  const RunConfig c = parse_run_config("");
  CHECK(c.num_classes == 21);
  CHECK(c.crf.iterations == 10);
  CHECK(c.crf.appearance.weight == 10.0);
  CHECK(c.crf.appearance.spatial_sigma == 80.0);
  CHECK(c.crf.appearance.color_sigma == 13.0);
  CHECK(c.crf.smoothness.weight == 3.0);
  CHECK(c.crf.smoothness.spatial_sigma == 3.0);
  CHECK(c.gen.alpha == 11.0);
  CHECK(c.base_alpha == 24.0);
  CHECK(c.gen.cvs.t == 0.05);
  CHECK(c.gen.cvs.s == 0.3);
  CHECK(c.gen.fg_threshold == 0.05);
  CHECK(c.pus.beta == 0.5);
  CHECK(c.pus.kappa == 0.5);
  CHECK(c.multicrop.scales.size() == 10);
  CHECK(c.cycle.max_rounds == 2);
}

TEST_CASE("sections override defaults") {
  const RunConfig c = parse_run_config(R"(
num_classes = 81
[crf]
iterations = 5
w1 = 4.0
theta_beta = 10
[gen]
alpha = 8
fg_threshold = 0.5
tie_break = "lowest-class-id"
[gen.cvs]
s = 0.2
[gen.crf]
w2 = 1.5
[pus]
mode = "ignore"
beta = 0.8
[multicrop]
scales = [1.0, 2.0]
crop_size = 320
stride = 200
[cycle]
max_rounds = 1
policy = "fixed"
)");
  CHECK(c.num_classes == 81);
  CHECK(c.crf.iterations == 5);
  CHECK(c.crf.appearance.color_sigma == 10.0);
  // [gen.crf] layers over [crf].
  CHECK(c.gen.crf.iterations == 5);
  CHECK(c.gen.crf.appearance.weight == 4.0);
  CHECK(c.gen.crf.smoothness.weight == 1.5);
  CHECK(c.crf.smoothness.weight == 3.0);
  CHECK(c.gen.alpha == 8.0);
  CHECK(c.gen.cvs.s == 0.2);
  CHECK(c.pus.mode == PusMode::kIgnore);
  CHECK(c.pus.kappa == 0.8);  // follows beta unless set
  CHECK(c.multicrop.scales == std::vector<double>{1.0, 2.0});
  CHECK(c.multicrop.crop_size == 320);
  CHECK(c.cycle.policy == UpdatePolicy::kFixed);
  CHECK(c.cycle.num_classes == 81);
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK_THROWS_AS(parse_run_config("[crf]\nw3 = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("[render]\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("[gen.cvs]\nq = 1\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("[crf]\niterations = \"ten\"\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("[crf]\niterations = 2.5\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("[gen]\ntie_break = \"random\"\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("[pus]\nkappa = 0\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("[multicrop]\nstride = 900\n"), ValidationError);
  CHECK_THROWS_AS(parse_run_config("[crf\n"), FormatError);
}

TEST_CASE("paths resolve against the config file") {
  testing::TempDir d;
  testing::write_bytes(d / "run.toml", "[paths]\ncams = \"cams\"\nout = \"/abs/out\"\npredictor = \"./p.sh\"\n");
  const RunConfig c = load_run_config(d / "run.toml");
  CHECK(*c.paths.cams == std::filesystem::absolute(d.path()) / "cams");
  CHECK(*c.paths.out == "/abs/out");
  CHECK(*c.paths.predictor == "./p.sh");
  CHECK_FALSE(c.paths.images.has_value());
}

TEST_CASE("dump parses back to the same values") {
  RunConfig c = parse_run_config("[crf]\nw1 = 2.5\n[pus]\nmode = \"pow\"\nkappa = 0.3\n");
  const RunConfig r = parse_run_config(dump_run_config(c));
  CHECK(r.crf.appearance.weight == 2.5);
  CHECK(r.pus.mode == PusMode::kPow);
  CHECK(r.pus.kappa == 0.3);
  CHECK(r.multicrop.scales == c.multicrop.scales);
  CHECK(dump_run_config(r) == dump_run_config(c));
}

}  // TEST_SUITE
