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

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "pmask/cam_ops.hpp"
#include "pmask/errors.hpp"
#include "pmask/mask_gen.hpp"

using namespace pmask;

namespace {

GenConfig exact_cfg() {
  GenConfig c;
  c.strict_crf = true;
  return c;
}

std::set<int> label_set(const PseudoMask& m) {
  return {m.labels.storage().begin(), m.labels.storage().end()};
}

/// Two-blob CAM with a matching tinted image.
std::pair<CamTensor, RgbImage> blob_pair(std::size_t h, std::size_t w, std::uint64_t seed,
                                         double overlap) {
  SeededRng rng(seed);
  CamTensor cam{Volume<double>(2, h, w), {5, 9}};
  RgbImage img(h, w);
  const double cx0 = w * (0.5 - overlap), cx1 = w * (0.5 + overlap), cy = h / 2.0;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const double d0 = std::hypot(x - cx0, y - cy), d1 = std::hypot(x - cx1, y - cy);
      cam.data(0, y, x) = std::exp(-d0 * d0 / 8.0) + 0.01 * rng.uniform();
      cam.data(1, y, x) = 0.6 * std::exp(-d1 * d1 / 12.0) + 0.01 * rng.uniform();
      const std::uint8_t v = static_cast<std::uint8_t>(d0 < d1 ? 60 : 190);
      img.at(y, x, 0) = v;
      img.at(y, x, 1) = static_cast<std::uint8_t>(255 - v);
      img.at(y, x, 2) = 100;
    }
  }
  return {cam, img};
}

}  // namespace

TEST_SUITE("mask_gen") {

TEST_CASE("baseline: a normalized all-ones channel labels every pixel") {
  NormalizedCam n{Volume<double>(1, 3, 3, 1.0), {15}};
  GenConfig cfg = exact_cfg();
  cfg.crf.iterations = 0;
  const PseudoMask m = baseline_mask_from_normalized(n, RgbImage(3, 3, 128), cfg);
  CHECK(label_set(m) == std::set<int>{15});
  // With mean-field iterations the uniform image keeps the same answer.
  cfg.crf.iterations = 10;
  CHECK(label_set(baseline_mask_from_normalized(n, RgbImage(3, 3, 128), cfg)) == std::set<int>{15});
}

TEST_CASE("baseline: constant or zero raw CAMs give background") {
  const GenConfig cfg = exact_cfg();
  CamTensor ones{Volume<double>(1, 3, 3, 1.0), {15}};
  CHECK(label_set(baseline_mask(ones, RgbImage(3, 3, 128), cfg)) == std::set<int>{0});
  CamTensor zeros{Volume<double>(2, 3, 3, 0.0), {3, 4}};
  CHECK(label_set(baseline_mask(zeros, RgbImage(3, 3, 128), cfg)) == std::set<int>{0});
}

TEST_CASE("baseline with zero iterations is the plain unary argmax") {
  const CamTensor cam = testing::random_cam(2, 6, 7, 21);
  GenConfig cfg = exact_cfg();
  cfg.crf.iterations = 0;
  cfg.alpha = 2.0;
  const PseudoMask m = baseline_mask(cam, testing::random_image(6, 7, 1), cfg);
  const UnaryCam u = assemble_unary(normalize(cam), cfg.alpha);
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 3; ++c) {
      if (u.data.plane(c)[i] > u.data.plane(best)[i]) best = c;
    }
    REQUIRE(m.labels[i] == (best == 0 ? 0 : cam.class_ids[best - 1]));
  }
}

TEST_CASE("class binary mask") {
  const GenConfig cfg = exact_cfg();
  const RgbImage img(4, 4, 90);
  CHECK(class_binary_mask(Grid<double>(4, 4, 1.0), img, cfg).storage() ==
        std::vector<std::uint8_t>(16, 1));
  CHECK(class_binary_mask(Grid<double>(4, 4, 0.0), img, cfg).storage() ==
        std::vector<std::uint8_t>(16, 0));
}

TEST_CASE("class binary mask matches the exact CRF oracle plus threshold") {
  const GenConfig cfg = exact_cfg();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const CamTensor cam = testing::random_cam(1, 4, 4, 40 + s);
    const Grid<double> ch = normalize(cam).data.plane_grid(0);
    const RgbImage img = testing::random_image(4, 4, s);
    std::vector<double> two(32);
    for (std::size_t i = 0; i < 16; ++i) {
      two[i] = std::pow(1.0 - ch[i], cfg.alpha);
      two[16 + i] = ch[i];
    }
    const auto q = oracle::mean_field(two, img.pixels, 4, 4, 2, oracle::CrfSettings{});
    const Grid<std::uint8_t> m = class_binary_mask(ch, img, cfg);
    for (std::size_t i = 0; i < 16; ++i) REQUIRE(m[i] == (q[16 + i] > cfg.fg_threshold ? 1 : 0));
  }
}

TEST_CASE("proportion map") {
  NormalizedCam n{Volume<double>(3, 1, 3), {1, 2, 3}};
  n.data.storage() = {0.7, 0.2, 0.0, 0.6, 0.4, 0.9, 0.5, 0.5, 0.5};
  ClassBinaryMasks m{Volume<std::uint8_t>(3, 1, 3), {1, 2, 3}};
  m.masks.storage() = {1, 0, 0, 1, 1, 0, 0, 0, 0};
  const ProportionMap p = proportion_map(n, m);
  CHECK(p.p(0, 0, 0) == 1.0);  // single masked pixel: v / v
  CHECK(p.p(1, 0, 0) == doctest::Approx(0.6));
  CHECK(p.p(1, 0, 1) == doctest::Approx(0.4));
  CHECK(p.active == std::vector<bool>{true, true, false});
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.p(2, 0, i) == 0.0);
  // Reconstruction: p * denom == normalized value.
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::abs(p.p(c, 0, i) * p.denominators[c] - n.data(c, 0, i)) <= 1e-9);
    }
  }
}

TEST_CASE("ppmg assignment") {
  ClassBinaryMasks m{Volume<std::uint8_t>(2, 1, 4), {4, 7}};
  m.masks.storage() = {1, 1, 0, 1, 0, 1, 0, 1};
  ProportionMap p{Volume<double>(2, 1, 4), {1.0, 1.0}, {true, true}};
  p.p.storage() = {0.3, 0.01, 0.2, 0.05, 0.9, 0.02, 0.9, 0.05};
  const PseudoMask out = ppmg_assign(m, p, {4, 7});
  CHECK(out.labels[0] == 4);  // single active mask
  CHECK(out.labels[1] == 7);  // larger proportion wins
  CHECK(out.labels[2] == 0);  // no mask
  CHECK(out.labels[3] == 4);  // tie goes to the lower id
}

TEST_CASE("ppmg prefers proportion over raw score on overlapping classes") {
  // Class 2 is spread wide, class 1 is compact. At pixel 0 the raw score of
  // class 2 is higher but its share of its own total is lower.
  NormalizedCam n{Volume<double>(2, 1, 4), {1, 2}};
  n.data.storage() = {0.5, 1.0, 0.0, 0.0, 0.6, 1.0, 1.0, 1.0};
  ClassBinaryMasks m{Volume<std::uint8_t>(2, 1, 4), {1, 2}};
  m.masks.storage() = {1, 1, 0, 0, 1, 1, 1, 1};
  const ProportionMap p = proportion_map(n, m);
  const PseudoMask out = ppmg_assign(m, p, {1, 2});
  CHECK(n.data(1, 0, 0) > n.data(0, 0, 0));
  CHECK(out.labels[0] == 1);
}

TEST_CASE("generate_ppmg properties") {
  const GenConfig cfg = exact_cfg();
  SUBCASE("single class closure") {
    const CamTensor cam = testing::random_cam(1, 5, 5, 3);
    CamTensor c12 = cam;
    c12.class_ids = {12};
    const auto s = label_set(generate_ppmg(c12, testing::random_image(5, 5, 3), cfg));
    CHECK(std::includes(std::set<int>{0, 12}.begin(), std::set<int>{0, 12}.end(), s.begin(), s.end()));
  }
  SUBCASE("disjoint supports keep their own class") {
    CamTensor cam{Volume<double>(2, 4, 8, 0.0), {3, 6}};
    RgbImage img(4, 8);
    for (std::size_t y = 0; y < 4; ++y) {
      for (std::size_t x = 0; x < 8; ++x) {
        cam.data(x < 4 ? 0 : 1, y, x) = 1.0;
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = x < 4 ? 20 : 230;
      }
    }
    const PpmgTrace tr = trace_ppmg(cam, img, cfg);
    for (std::size_t y = 0; y < 4; ++y) {
      for (std::size_t x = 0; x < 8; ++x) {
        REQUIRE(tr.masks.masks(0, y, x) == (x < 4));
        REQUIRE(tr.masks.masks(1, y, x) == (x >= 4));
        REQUIRE(tr.mask.labels(y, x) == (x < 4 ? 3 : 6));
      }
    }
  }
  SUBCASE("mask consistency, determinism, equivariance, scale invariance") {
    for (std::uint64_t s = 0; s < 4; ++s) {
      auto [cam, img] = blob_pair(8, 10, s, 0.1);
      const PpmgTrace tr = trace_ppmg(cam, img, cfg);
      for (std::size_t i = 0; i < tr.mask.labels.size(); ++i) {
        const int l = tr.mask.labels[i];
        if (l == 0) continue;
        const std::size_t c = l == 5 ? 0 : 1;
        REQUIRE(tr.masks.masks.plane(c)[i] == 1);
      }
      CHECK(generate_ppmg(cam, img, cfg) == tr.mask);

      CamTensor swapped{Volume<double>(2, 8, 10), {9, 5}};
      swapped.data.set_plane(0, cam.data.plane_grid(1));
      swapped.data.set_plane(1, cam.data.plane_grid(0));
      CHECK(generate_ppmg(swapped, img, cfg) == tr.mask);

      CamTensor scaled = cam;
      for (auto& v : scaled.data.plane(1)) v *= 37.0;
      CHECK(generate_ppmg(scaled, img, cfg) == tr.mask);
    }
  }
}

TEST_CASE("single-class ppmg and baseline agree when the masks coincide") {
  // A crisp square painted on the image too: the per-class mask and the
  // baseline foreground are the same region, so both pipelines label alike.
  CamTensor cam{Volume<double>(1, 8, 8, 0.0), {11}};
  for (std::size_t y = 2; y < 6; ++y) {
    for (std::size_t x = 2; x < 6; ++x) cam.data(0, y, x) = 1.0;
  }
  RgbImage img(8, 8, 20);
  for (std::size_t y = 2; y < 6; ++y) {
    for (std::size_t x = 2; x < 6; ++x) {
      for (std::size_t c = 0; c < 3; ++c) img.at(y, x, c) = 230;
    }
  }
  GenConfig cfg = exact_cfg();
  cfg.fg_threshold = 0.5;
  const PpmgTrace tr = trace_ppmg(cam, img, cfg);
  const PseudoMask base = baseline_mask(cam, img, cfg);
  std::size_t fg = 0;
  for (std::size_t i = 0; i < 64; ++i) {
    REQUIRE((base.labels[i] != 0) == (tr.masks.masks.plane(0)[i] == 1));
    fg += base.labels[i] != 0;
  }
  CHECK(fg == 16);
  CHECK(tr.mask == base);
}

TEST_CASE("mismatched image size is rejected") {
  const CamTensor cam = testing::random_cam(1, 4, 4, 1);
  CHECK_THROWS_AS(generate_ppmg(cam, RgbImage(4, 5), GenConfig{}), ValidationError);
  CHECK_THROWS_AS(baseline_mask(cam, RgbImage(3, 4), GenConfig{}), ValidationError);
}

}  // TEST_SUITE
