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

#include "cycle_stubs.hpp"
#include "helpers.hpp"
#include "pmask/cyclic_eval.hpp"
#include "pmask/errors.hpp"

using namespace pmask;
namespace fs = std::filesystem;

namespace {

PseudoMask mask(std::size_t h, std::size_t w, std::vector<std::uint8_t> v) {
  PseudoMask m(h, w);
  m.labels.storage() = std::move(v);
  return m;
}

}  // namespace

TEST_SUITE("cyclic_eval") {

TEST_CASE("confusion") {
  const PseudoMask gt = mask(2, 2, {0, 1, 1, 255});
  const ConfusionMatrix same = confusion(gt, mask(2, 2, {0, 1, 1, 0}), 3);
  CHECK(same.at(0, 0) == 1);
  CHECK(same.at(1, 1) == 2);
  CHECK(same.total() == 3);
  const ConfusionMatrix one = confusion(gt, mask(2, 2, {0, 1, 2, 2}), 3);
  CHECK(one.at(1, 2) == 1);
  CHECK(one.at(1, 1) == 1);
  CHECK(one.total() == 3);
  CHECK(confusion(mask(1, 2, {255, 255}), mask(1, 2, {0, 1}), 2).total() == 0);
  CHECK_THROWS_AS(confusion(mask(1, 1, {3}), mask(1, 1, {0}), 3), ValidationError);
  CHECK_THROWS_AS(confusion(mask(1, 1, {0}), mask(1, 1, {255}), 3), ValidationError);
  CHECK_THROWS_AS(confusion(mask(1, 1, {0}), mask(1, 2, {0, 0}), 3), ValidationError);
}

TEST_CASE("miou") {
  ConfusionMatrix perfect(3);
  perfect.at(0, 0) = 4;
  perfect.at(2, 2) = 1;
  const MiouResult p = miou(perfect);
  CHECK(p.miou == 1.0);
  CHECK(p.present == 2);
  CHECK_FALSE(p.iou[1].has_value());

  // 10 px of class 1; 5 predicted right, 5 predicted as class 1 elsewhere.
  ConfusionMatrix m(2);
  m.at(1, 1) = 5;
  m.at(1, 0) = 5;
  m.at(0, 1) = 5;
  m.at(0, 0) = 85;
  const MiouResult r = miou(m);
  CHECK(*r.iou[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(*r.iou[0] == doctest::Approx(85.0 / 95.0).epsilon(1e-15));

  ConfusionMatrix disjoint(2);
  disjoint.at(1, 0) = 3;
  CHECK(*miou(disjoint).iou[1] == 0.0);
  CHECK_THROWS_AS(miou(ConfusionMatrix(4)), EmptyEvaluation);
}

TEST_CASE("miou is equivariant under relabeling") {
  SeededRng rng(4);
  for (int r = 0; r < 20; ++r) {
    PseudoMask gt(5, 6), pred(5, 6), pg(5, 6), pp(5, 6);
    const std::vector<std::uint8_t> perm{2, 0, 3, 1};
    for (std::size_t i = 0; i < 30; ++i) {
      gt.labels[i] = static_cast<std::uint8_t>(rng.below(4));
      pred.labels[i] = static_cast<std::uint8_t>(rng.below(4));
      pg.labels[i] = perm[gt.labels[i]];
      pp.labels[i] = perm[pred.labels[i]];
    }
    CHECK(miou(confusion(gt, pred, 4)).miou ==
          doctest::Approx(miou(confusion(pg, pp, 4)).miou).epsilon(1e-15));
    const ConfusionMatrix self = confusion(gt, gt, 4);
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) {
        if (a != b) REQUIRE(self.at(a, b) == 0);
      }
    }
  }
}

TEST_CASE("should_update") {
  std::vector<HistoryEntry> h{{0, 0.6673, false, false}};
  CHECK(should_update(h, 0.6850));
  CHECK_FALSE(should_update({{0, 0.3673, false, false}}, 0.3565));
  CHECK_FALSE(should_update(h, 0.6673));
  CHECK_FALSE(should_update(h, 0.6680, 0.001));
  CHECK_FALSE(should_update({}, 0.9));
}

TEST_CASE("evaluate_dirs") {
  testing::TempDir d;
  fs::create_directories(d / "gt");
  fs::create_directories(d / "pred");
  encode_mask_png(mask(1, 2, {0, 1}), d / "gt" / "a.png");
  encode_mask_png(mask(1, 2, {0, 1}), d / "pred" / "a.png");
  CHECK(miou(evaluate_dirs(d / "pred", d / "gt", 2)).miou == 1.0);
  encode_mask_png(mask(1, 2, {0, 1}), d / "gt" / "b.png");
  CHECK_THROWS_AS(evaluate_dirs(d / "pred", d / "gt", 2), ValidationError);
}

TEST_CASE("state and manifest JSON") {
  CycleState s{1, "/x/round_1", {{0, 0.5, false, true}, {0, std::nullopt, true, false}}};
  const CycleState r = state_from_json(state_to_json(s));
  CHECK(r.round == 1);
  CHECK(r.current_masks == s.current_masks);
  REQUIRE(r.history.size() == 2);
  CHECK(r.history[0].baseline);
  CHECK_FALSE(r.history[1].val_miou.has_value());
  const std::string m = manifest_to_json({2, 0.7, true, false, "d"});
  for (const char* key : {"\"round\":2", "\"val_miou\":0.7", "\"updated\":true",
                          "\"pus_enabled\":false", "\"mask_dir\":\"d\""}) {
    CHECK(m.find(key) != std::string::npos);
  }
  CHECK_THROWS_AS(state_from_json("{}"), FormatError);
}

TEST_CASE("run_cycle") {
  testing::TempDir root;
  const auto d = testing::make_cycle_dataset(root.path(), 30);
  CyclePaths paths{root / "work", d.train_images, d.val_images, d.val_gt};
  CycleConfig cfg;
  cfg.num_classes = 3;
  CycleState s0{0, d.initial_masks, {}};

  SUBCASE("identity predictor is a fixed point") {
    CycleState cur = s0;
    auto pred = testing::copy_predictor([&] { return cur.current_masks; });
    for (int k = 0; k < 2; ++k) {
      const CycleOutcome out = run_cycle(cur, pred, paths, cfg);
      CHECK_FALSE(out.manifest.updated);
      CHECK(out.state.current_masks == d.initial_masks);
      CHECK(out.manifest.pus_enabled);
      cur = out.state;
    }
    CHECK(cur.history.size() == 3);  // baseline + two calls
    CHECK_FALSE(fs::exists(root / "work" / "round_1"));
  }

  SUBCASE("oracle predictor updates") {
    testing::FnPredictor oracle([&](const std::string& stem, const fs::path& images) {
      const fs::path src = fs::equivalent(images, d.val_images) ? d.val_gt : d.train_gt;
      return decode_mask_png(src / (stem + ".png"));
    });
    const CycleOutcome out = run_cycle(s0, oracle, paths, cfg);
    CHECK(out.manifest.updated);
    CHECK(*out.manifest.val_miou == 1.0);
    CHECK(out.state.round == 1);
    CHECK(out.state.current_masks == root / "work" / "round_1");
    CHECK_FALSE(out.manifest.pus_enabled);
    CHECK(decode_mask_png(out.state.current_masks / "t1.png") == decode_mask_png(d.train_gt / "t1.png"));
    // Persisted state matches.
    CHECK(load_or_init_state(root / "work", {}).round == 1);
    CHECK(fs::exists(root / "work" / "manifest.json"));
  }

  SUBCASE("max_rounds caps updates") {
    cfg.max_rounds = 0;
    testing::ScriptedPredictor pred(d, {0});
    CHECK_FALSE(run_cycle(s0, pred, paths, cfg).manifest.updated);
  }

  SUBCASE("fixed policy swaps without ground truth") {
    cfg.policy = UpdatePolicy::kFixed;
    paths.val_gt.reset();
    testing::ScriptedPredictor pred(d, {0});
    const CycleOutcome out = run_cycle(s0, pred, paths, cfg);
    CHECK(out.manifest.updated);
    CHECK_FALSE(out.manifest.val_miou.has_value());
    CHECK(pred.val_calls == 0);
  }

  SUBCASE("validation policy needs ground truth") {
    paths.val_gt.reset();
    testing::ScriptedPredictor pred(d, {0});
    CHECK_THROWS_AS(run_cycle(s0, pred, paths, cfg), ValidationError);
  }

  SUBCASE("missing predictions are a PredictorError and leave state alone") {
    struct Partial : Predictor {
      void predict(const fs::path&, const fs::path& out) override {
        encode_mask_png(PseudoMask(20, 20), out / "v0.png");
      }
    } partial;
    CHECK_THROWS_AS(run_cycle(s0, partial, paths, cfg), PredictorError);
    CHECK_FALSE(fs::exists(state_path(root / "work")));
  }

  SUBCASE("command predictor") {
    const fs::path script = root / "pred.sh";
    testing::write_bytes(script, "#!/bin/sh\n# args: --images DIR --out DIR\ncp \"" +
                                     d.val_gt.string() + "\"/*.png \"$4\"/\n");
    fs::permissions(script, fs::perms::owner_all);
    CommandPredictor cmd(script.string());
    testing::TempDir out;
    run_predictor(cmd, d.val_images, out / "p");
    CHECK(fs::exists(out / "p" / "v1.png"));
    CommandPredictor failing("false");
    CHECK_THROWS_AS(run_predictor(failing, d.val_images, out / "q"), PredictorError);
  }
}

}  // TEST_SUITE
