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
#include "pmask/errors.hpp"
#include "pmask/pus.hpp"

using namespace pmask;

namespace {

LossMap loss(std::size_t h, std::size_t w, std::vector<double> v) {
  Grid<double> g(h, w);
  g.storage() = std::move(v);
  return LossMap(std::move(g));
}

LossMap random_loss(std::uint64_t seed) {
  SeededRng rng(seed);
  const std::size_t h = 1 + rng.below(12), w = 1 + rng.below(12);
  Grid<double> g(h, w);
  for (auto& v : g.storage()) v = rng.uniform(0.0, 3.0);
  PseudoMask labels(h, w);
  for (auto& l : labels.labels.storage()) l = rng.below(5) == 0 ? kIgnoreLabel : 1;
  labels.labels[0] = 1;
  return LossMap::from_labels(std::move(g), labels);
}

}  // namespace

TEST_SUITE("pus") {

TEST_CASE("clamp") {
  CHECK(pus_clamp(loss(1, 2, {0.2, 0.9}), 0.5).values.storage() == std::vector<double>{0.2, 0.5});
  CHECK(pus_clamp(loss(1, 2, {0.1, 0.2}), 0.5).values.storage() == std::vector<double>{0.1, 0.2});
  CHECK(pus_clamp(loss(1, 2, {0.7, 0.5}), 0.5).values.storage() == std::vector<double>{0.5, 0.5});
}

TEST_CASE("pow") {
  CHECK(pus_pow(loss(1, 2, {0.3, 2.0}), 1.0).values.storage() == std::vector<double>{0.3, 2.0});
  CHECK(pus_pow(loss(1, 1, {0.0}), 0.3).values.storage() == std::vector<double>{0.0});
  CHECK(pus_pow(loss(1, 1, {4.0}), 0.5).values.storage() == std::vector<double>{2.0});
}

TEST_CASE("ignore") {
  CHECK(pus_ignore(loss(1, 2, {0.1, 0.2}), 0.5).values.storage() == std::vector<double>{0.1, 0.2});
  CHECK(pus_ignore(loss(1, 2, {0.5, 3.0}), 0.5).values.storage() == std::vector<double>{0.0, 0.0});
  CHECK(pus_ignore(loss(1, 2, {0.4, 0.6}), 0.5).values.storage() == std::vector<double>{0.4, 0.0});
}

TEST_CASE("gate") {
  PusConfig cfg;
  cfg.mode = PusMode::kClamp;
  SUBCASE("mean above beta takes the plain mean") {
    const PusResult r = pus_evaluate(loss(1, 2, {0.2, 1.0}), cfg);
    CHECK_FALSE(r.gated);
    CHECK(r.loss == doctest::Approx(0.6));
  }
  SUBCASE("mean below beta applies the transform") {
    // 2x2 fixture, mean 0.3.
    const PusResult r = pus_evaluate(loss(2, 2, {0.1, 0.9, 0.1, 0.1}), cfg);
    CHECK(r.gated);
    CHECK(r.plain_mean == doctest::Approx(0.3));
    CHECK(r.loss == doctest::Approx((0.1 + 0.5 + 0.1 + 0.1) / 4));
  }
  SUBCASE("mean exactly beta takes the plain mean") {
    const PusResult r = pus_evaluate(loss(1, 2, {0.25, 0.75}), cfg);
    CHECK_FALSE(r.gated);
    CHECK(r.loss == 0.5);
  }
  SUBCASE("mode none never transforms") {
    cfg.mode = PusMode::kNone;
    CHECK(pus_loss(loss(1, 2, {0.1, 0.9}), cfg) == doctest::Approx(0.5));
    CHECK_FALSE(pus_evaluate(loss(1, 2, {0.0, 0.1}), cfg).gated);
  }
  SUBCASE("beta zero never gates") {
    cfg.beta = 0.0;
    const LossMap l = loss(1, 3, {0.0, 0.0, 0.0});
    CHECK_FALSE(pus_evaluate(l, cfg).gated);
  }
}

TEST_CASE("ignore pixels never contribute") {
  Grid<double> g(1, 3);
  g.storage() = {0.2, 100.0, 0.4};
  PseudoMask labels(1, 3);
  labels.labels.storage() = {1, kIgnoreLabel, 2};
  const LossMap l = LossMap::from_labels(g, labels);
  CHECK(l.valid_count() == 2);
  CHECK(mean_valid(l) == doctest::Approx(0.3));
  CHECK(pus_clamp(l, 0.5).values[1] == 0.0);
  PseudoMask all_ignored(1, 3, kIgnoreLabel);
  CHECK_THROWS_AS(pus_loss(LossMap::from_labels(g, all_ignored), PusConfig{}), EmptyLoss);
}

TEST_CASE("random loss maps: ordering between transforms") {
  for (std::uint64_t s = 0; s < 300; ++s) {
    const LossMap l = random_loss(s);
    const double kappa = 0.1 + 0.01 * static_cast<double>(s % 150);
    const LossMap c = pus_clamp(l, kappa), ig = pus_ignore(l, kappa);
    for (std::size_t i = 0; i < l.values.size(); ++i) {
      if (!l.valid[i]) continue;
      REQUIRE(c.values[i] == std::min(l.values[i], kappa));
      REQUIRE(ig.values[i] <= c.values[i]);
    }
    REQUIRE(mean_valid(c) <= mean_valid(l));
    REQUIRE(mean_valid(ig) <= mean_valid(c));
    PusConfig cfg;
    cfg.beta = 10.0;
    cfg.kappa = kappa;
    for (PusMode m : {PusMode::kClamp, PusMode::kIgnore}) {
      cfg.mode = m;
      REQUIRE(pus_loss(l, cfg) <= mean_valid(l));
    }
  }
}

TEST_CASE("config and parsing") {
  CHECK(parse_pus_mode("pow") == PusMode::kPow);
  CHECK(pus_mode_name(PusMode::kIgnore) == "ignore");
  CHECK_THROWS_AS(parse_pus_mode("square"), ValidationError);
  PusConfig c;
  c.kappa = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  CHECK_THROWS_AS(pus_loss(loss(1, 1, {-1.0}), PusConfig{}), ValidationError);
}

}  // TEST_SUITE
