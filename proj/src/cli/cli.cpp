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


#include "pmask/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmask/config.hpp"
#include "pmask/cyclic_eval.hpp"
#include "pmask/dense_crf.hpp"
#include "pmask/errors.hpp"
#include "pmask/mask_gen.hpp"
#include "pmask/multicrop.hpp"
#include "pmask/parallel.hpp"
#include "pmask/pus.hpp"
#include "pmask/simd/kernels.hpp"
#include "pmask/synthetic.hpp"
#include "pmask/tensor_io.hpp"

namespace pmask {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

/// Input problem reported to the user with exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

struct Globals {
  std::string config;
  std::size_t jobs = 1;
  std::uint64_t seed = 0;
  bool strict_crf = false;
};

struct Io {
  std::ostream& out;
  std::ostream& err;
};

fs::path need(const std::string& flag_value, const std::optional<fs::path>& fallback,
              const char* flag) {
  if (!flag_value.empty()) return flag_value;
  if (fallback) return *fallback;
  throw InputError(std::string("missing ") + flag);
}

fs::path need_dir(const std::string& flag_value, const std::optional<fs::path>& fallback,
                  const char* flag) {
  fs::path p = need(flag_value, fallback, flag);
  if (!fs::is_directory(p)) throw InputError(std::string(flag) + ": not a directory: " + p.string());
  return p;
}

void emit(Io& io, const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    io.out << text;
  } else {
    write_file_atomic(out_path, text);
  }
}

// --- gen -------------------------------------------------------------------

struct GenArgs {
  std::string mode = "ppmg";
  std::string cams, images, out, summary;
  std::optional<double> alpha;
};

int cmd_gen(const GenArgs& a, const RunConfig& rc, const Globals& g, Io& io) {
  if (a.mode != "ppmg" && a.mode != "baseline") throw InputError("--mode must be ppmg or baseline");
  const fs::path cam_dir = need_dir(a.cams, rc.paths.cams, "--cams");
  const fs::path img_dir = need_dir(a.images, rc.paths.images, "--images");
  const fs::path out_dir = need(a.out, rc.paths.out, "--out");
  const auto cams = index_by_stem(cam_dir, {".npy"});
  const auto imgs = index_by_stem(img_dir, image_extensions());
  if (cams.empty() && imgs.empty()) throw InputError("no inputs");

  std::vector<std::string> problems;
  for (const auto& [stem, _] : cams) {
    if (!imgs.count(stem)) problems.push_back("no image for CAM " + stem);
  }
  for (const auto& [stem, _] : imgs) {
    if (!cams.count(stem)) problems.push_back("no CAM for image " + stem);
  }
  if (!problems.empty()) {
    for (const auto& p : problems) io.err << "pmask gen: " << p << "\n";
    throw InputError(std::to_string(problems.size()) + " unpaired input(s)");
  }

  GenConfig cfg = rc.gen;
  cfg.strict_crf = g.strict_crf;
  cfg.alpha = a.alpha.value_or(a.mode == "baseline" ? rc.base_alpha : rc.gen.alpha);
  cfg.validate();

  std::vector<std::string> stems;
  for (const auto& [stem, _] : cams) stems.push_back(stem);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());

  std::vector<std::array<std::uint64_t, 256>> histo(stems.size());
  parallel_for(stems.size(), g.jobs, [&](std::size_t i) {
    const auto& stem = stems[i];
    CamTensor cam = load_cam_tensor(cams.at(stem));
    cam.validate(rc.num_classes);
    const RgbImage img = load_image(imgs.at(stem));
    if (img.height != cam.height() || img.width != cam.width()) {
      throw InputError("size mismatch for " + stem);
    }
    const PseudoMask m =
        a.mode == "ppmg" ? generate_ppmg(cam, img, cfg) : baseline_mask(cam, img, cfg);
    encode_mask_png(m, out_dir / (stem + ".png"));
    histo[i].fill(0);
    for (auto l : m.labels.values()) ++histo[i][l];
  });

  ordered_json per_image = ordered_json::object();
  std::array<std::uint64_t, 256> total{};
  for (std::size_t i = 0; i < stems.size(); ++i) {
    ordered_json counts = ordered_json::object();
    for (std::size_t l = 0; l < 256; ++l) {
      if (!histo[i][l]) continue;
      counts[std::to_string(l)] = histo[i][l];
      total[l] += histo[i][l];
    }
    per_image[stems[i]] = counts;
  }
  ordered_json class_pixels = ordered_json::object();
  for (std::size_t l = 0; l < 256; ++l) {
    if (total[l]) class_pixels[std::to_string(l)] = total[l];
  }
  ordered_json summary{{"mode", a.mode},
                       {"alpha", cfg.alpha},
                       {"images", stems.size()},
                       {"class_pixels", class_pixels},
                       {"per_image", per_image}};
  const std::string text = summary.dump(2) + "\n";
  write_file_atomic(a.summary.empty() ? out_dir / "summary.json" : fs::path(a.summary), text);
  io.out << text;
  return kExitOk;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string pred, gt, out;
  std::optional<int> num_classes;
};

ordered_json miou_json(const MiouResult& r, const ConfusionMatrix& cm) {
  ordered_json per = ordered_json::array();
  for (std::size_t c = 0; c < r.iou.size(); ++c) {
    per.push_back({{"class", c}, {"iou", r.iou[c] ? ordered_json(*r.iou[c]) : ordered_json()}});
  }
  return {{"miou", r.miou},
          {"present_classes", r.present},
          {"pixels", cm.total()},
          {"per_class", per}};
}

int cmd_eval(const EvalArgs& a, const RunConfig& rc, const Globals& g, Io& io) {
  const fs::path pred = need_dir(a.pred, rc.paths.masks, "--pred");
  const fs::path gt = need_dir(a.gt, rc.paths.gt, "--gt");
  const int k = a.num_classes.value_or(rc.num_classes);
  if (k < 1 || k > 255) throw InputError("--num-classes must lie in [1, 255]");
  const ConfusionMatrix cm = evaluate_dirs(pred, gt, static_cast<std::size_t>(k), g.jobs);
  emit(io, a.out, miou_json(miou(cm), cm).dump(2) + "\n");
  return kExitOk;
}

// --- multicrop -------------------------------------------------------------

struct MulticropArgs {
  std::string images, base, out;
  std::optional<std::size_t> sample;
};

int cmd_multicrop(const MulticropArgs& a, const RunConfig& rc, const Globals& g, Io& io) {
  const fs::path src = need(a.images, rc.paths.images, "--images");
  std::map<std::string, fs::path> imgs;
  if (fs::is_directory(src)) {
    imgs = index_by_stem(src, image_extensions());
  } else if (fs::is_regular_file(src)) {
    imgs[src.stem().string()] = src;
  } else {
    throw InputError("no such image or directory: " + src.string());
  }
  if (imgs.empty()) throw InputError("no inputs");
  std::map<std::string, fs::path> bases;
  if (!a.base.empty()) {
    if (fs::is_directory(a.base)) {
      bases = index_by_stem(a.base, {".png"});
    } else {
      bases[fs::path(a.base).stem().string()] = a.base;
    }
  }

  std::ostringstream lines;
  std::uint64_t stream = 0;
  for (const auto& [stem, path] : imgs) {
    const RgbImage img = load_image(path);
    std::vector<CropProposal> crops = generate_crops(img.height, img.width, rc.multicrop);
    if (!bases.empty()) {
      auto it = bases.find(stem);
      if (it == bases.end()) throw InputError("no base mask for " + stem);
      const PseudoMask base = decode_mask_png(it->second);
      if (base.height() != img.height || base.width() != img.width) {
        throw InputError("base mask size differs from image " + stem);
      }
      label_crops(crops, base, rc.multicrop);
    }
    if (a.sample) crops = sample_crops(crops, *a.sample, g.seed + stream++);
    for (const auto& c : crops) {
      ordered_json j{{"image", stem},
                     {"scale", c.scale},
                     {"window", {c.window.x0, c.window.y0, c.window.x1, c.window.y1}},
                     {"labels", c.labels}};
      lines << j.dump() << "\n";
    }
  }
  emit(io, a.out, lines.str());
  return kExitOk;
}

// --- pus -------------------------------------------------------------------

struct PusArgs {
  std::string loss, labels, out, mode;
  std::optional<double> beta, kappa;
};

ordered_json stats_json(const LossMap& l) {
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < l.values.size(); ++i) {
    if (!l.valid[i]) continue;
    lo = first ? l.values[i] : std::min(lo, l.values[i]);
    hi = first ? l.values[i] : std::max(hi, l.values[i]);
    first = false;
  }
  return {{"mean", mean_valid(l)}, {"min", lo}, {"max", hi}};
}

int cmd_pus(const PusArgs& a, const RunConfig& rc, Io& io) {
  if (a.loss.empty()) throw InputError("missing --loss");
  PusConfig cfg = rc.pus;
  if (!a.mode.empty()) cfg.mode = parse_pus_mode(a.mode);
  if (a.beta) {
    cfg.beta = *a.beta;
    if (!a.kappa) cfg.kappa = *a.beta;
  }
  if (a.kappa) cfg.kappa = *a.kappa;
  cfg.validate();

  const NpyArray arr = read_npy(a.loss);
  std::vector<std::size_t> shape = arr.shape;
  if (shape.size() == 3 && shape[0] == 1) shape.erase(shape.begin());
  if (shape.size() != 2) throw InputError("loss map must have shape (H, W) or (1, H, W)");
  Grid<double> values(shape[0], shape[1]);
  std::copy(arr.data.begin(), arr.data.end(), values.storage().begin());
  LossMap l(values);
  if (!a.labels.empty()) {
    const PseudoMask labels = decode_mask_png(a.labels);
    if (labels.height() != shape[0] || labels.width() != shape[1]) {
      throw InputError("label mask size differs from the loss map");
    }
    l = LossMap::from_labels(values, labels);
  }
  l.validate();
  const PusResult r = pus_evaluate(l, cfg);
  ordered_json j{{"mode", pus_mode_name(cfg.mode)},
                 {"beta", cfg.beta},
                 {"kappa", cfg.kappa},
                 {"valid_pixels", l.valid_count()},
                 {"input", stats_json(l)},
                 {"transformed", stats_json(pus_apply(l, cfg.mode, cfg.kappa))},
                 {"gated", r.gated},
                 {"loss", r.loss}};
  emit(io, a.out, j.dump(2) + "\n");
  return kExitOk;
}

// --- cycle -----------------------------------------------------------------

struct CycleArgs {
  std::string work_dir, masks, train_images, val_images, val_gt, predictor;
  bool force_update = false;
  std::optional<int> max_rounds;
};

int cmd_cycle(const CycleArgs& a, const RunConfig& rc, const Globals& g, Io& io) {
  CyclePaths paths;
  paths.work_dir = need(a.work_dir, rc.paths.work_dir, "--work-dir");
  paths.train_images = need(a.train_images, rc.paths.train_images, "--train-images");
  paths.val_images = need(a.val_images, rc.paths.val_images, "--val-images");
  if (!a.val_gt.empty()) paths.val_gt = fs::path(a.val_gt);
  else paths.val_gt = rc.paths.val_gt;
  const std::string command = !a.predictor.empty() ? a.predictor : rc.paths.predictor.value_or("");
  if (command.empty()) throw InputError("missing --predictor");

  CycleConfig cfg = rc.cycle;
  cfg.jobs = g.jobs;
  if (a.max_rounds) cfg.max_rounds = *a.max_rounds;
  if (a.force_update) cfg.policy = UpdatePolicy::kFixed;
  if (!paths.val_gt && cfg.policy == UpdatePolicy::kValidation) {
    throw InputError("no validation ground truth: pass --val-gt, or --force-update to swap without it");
  }
  CycleState state;
  if (fs::exists(state_path(paths.work_dir))) {
    state = load_or_init_state(paths.work_dir, {});
  } else {
    state = load_or_init_state(paths.work_dir, need(a.masks, rc.paths.masks, "--masks"));
  }
  CommandPredictor predictor(command);
  const CycleOutcome res = run_cycle(state, predictor, paths, cfg);
  io.out << manifest_to_json(res.manifest) << "\n";
  return kExitOk;
}

// --- crf-bench -------------------------------------------------------------

struct BenchArgs {
  std::vector<std::size_t> sizes{32, 64};
  std::size_t labels = 3;
  int repeats = 3;
  std::string family = "structured";
  std::string out;
};

template <class F>
double best_ms(int repeats, F f) {
  double best = 0.0;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    best = r == 0 ? ms : std::min(best, ms);
  }
  return best;
}

int cmd_crf_bench(const BenchArgs& a, const RunConfig& rc, const Globals& g, Io& io) {
  if (a.family != "structured" && a.family != "random") {
    throw InputError("--family must be structured or random");
  }
  if (a.repeats < 1) throw InputError("--repeats must be >= 1");
  ordered_json runs = ordered_json::array();
  for (std::size_t n : a.sizes) {
    if (n == 0 || n * n > kExactMaxPixels) {
      throw InputError("size " + std::to_string(n) + " exceeds the exact backend limit");
    }
    const CrfProblem p = a.family == "structured" ? structured_crf_problem(n, n, a.labels, g.seed)
                                                  : random_crf_problem(n, n, a.labels, g.seed);
    Posterior exact, fast;
    const double exact_ms = best_ms(a.repeats, [&] { exact = mean_field_exact(p, rc.crf); });
    const double fast_ms = best_ms(a.repeats, [&] { fast = mean_field_fast(p, rc.crf); });
    double max_dq = 0.0;
    for (std::size_t i = 0; i < exact.q.size(); ++i) {
      max_dq = std::max(max_dq, std::abs(exact.q.storage()[i] - fast.q.storage()[i]));
    }
    const Grid<int> ea = exact.argmax(), fa = fast.argmax();
    std::size_t agree = 0;
    for (std::size_t i = 0; i < ea.size(); ++i) agree += ea[i] == fa[i];
    runs.push_back({{"size", n},
                    {"labels", a.labels},
                    {"exact_ms", exact_ms},
                    {"fast_ms", fast_ms},
                    {"speedup", exact_ms / fast_ms},
                    {"argmax_agreement", static_cast<double>(agree) / static_cast<double>(ea.size())},
                    {"max_abs_dq", max_dq}});
  }
  ordered_json j{{"isa", simd::active_kernels().name},
                 {"family", a.family},
                 {"seed", g.seed},
                 {"iterations", rc.crf.iterations},
                 {"runs", runs}};
  emit(io, a.out, j.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pseudo-mask generation and utilization toolkit", "pmask"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "TOML run configuration");
  app.add_option("--jobs,-j", g.jobs, "Worker threads for per-image work")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_flag("--strict-crf", g.strict_crf, "Use the exact CRF backend when the image allows it");

  GenArgs gen;
  auto* s_gen = app.add_subcommand("gen", "Generate pseudo-masks from CAMs and images");
  s_gen->add_option("--mode", gen.mode, "ppmg or baseline")->capture_default_str();
  s_gen->add_option("--cams", gen.cams, "Directory of <stem>.npy CAMs with sidecar JSON");
  s_gen->add_option("--images", gen.images, "Directory of <stem>.png|ppm images");
  s_gen->add_option("--out", gen.out, "Output directory for <stem>.png masks");
  s_gen->add_option("--summary", gen.summary, "Summary JSON path (default <out>/summary.json)");
  s_gen->add_option("--alpha", gen.alpha, "Background exponent override");

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "mIoU of predicted masks against ground truth");
  s_eval->add_option("--pred", ev.pred, "Directory of predicted masks");
  s_eval->add_option("--gt", ev.gt, "Directory of ground-truth masks");
  s_eval->add_option("--num-classes", ev.num_classes, "Class count including background");
  s_eval->add_option("--out", ev.out, "Write the report here instead of stdout");

  MulticropArgs mc;
  auto* s_mc = app.add_subcommand("multicrop", "Multi-scale crop proposals as JSON lines");
  s_mc->add_option("--images", mc.images, "Image file or directory");
  s_mc->add_option("--base", mc.base, "Base mask file or directory used for crop labels");
  s_mc->add_option("--sample", mc.sample, "Draw this many proposals per image (seeded)");
  s_mc->add_option("--out", mc.out, "Write JSONL here instead of stdout");

  PusArgs pu;
  auto* s_pus = app.add_subcommand("pus", "Apply a loss transform to a stored loss map");
  s_pus->add_option("--loss", pu.loss, "NPY loss map, shape (H, W) or (1, H, W)");
  s_pus->add_option("--labels", pu.labels, "Label PNG; 255 marks ignored pixels");
  s_pus->add_option("--mode", pu.mode, "none, clamp, pow or ignore");
  s_pus->add_option("--beta", pu.beta, "Warm-up threshold");
  s_pus->add_option("--kappa", pu.kappa, "Transform parameter (defaults to beta)");
  s_pus->add_option("--out", pu.out, "Write the report here instead of stdout");

  CycleArgs cy;
  auto* s_cy = app.add_subcommand("cycle", "One cyclic pseudo-mask update step");
  s_cy->add_option("--work-dir", cy.work_dir, "State, manifests and round_<n> masks");
  s_cy->add_option("--masks", cy.masks, "Initial masks (first call only)");
  s_cy->add_option("--train-images", cy.train_images, "Training images");
  s_cy->add_option("--val-images", cy.val_images, "Validation images");
  s_cy->add_option("--val-gt", cy.val_gt, "Validation ground-truth masks");
  s_cy->add_option("--predictor", cy.predictor, "Command run as <cmd> --images <dir> --out <dir>");
  s_cy->add_flag("--force-update", cy.force_update, "Swap masks without a validation check");
  s_cy->add_option("--max-rounds", cy.max_rounds, "Stop swapping after this many rounds");

  BenchArgs be;
  auto* s_be = app.add_subcommand("crf-bench", "Time the exact and fast CRF backends");
  s_be->add_option("--sizes", be.sizes, "Square image sizes")->delimiter(',')->capture_default_str();
  s_be->add_option("--labels", be.labels, "Label count")->capture_default_str();
  s_be->add_option("--repeats", be.repeats, "Best of this many runs")->capture_default_str();
  s_be->add_option("--family", be.family, "structured or random")->capture_default_str();
  s_be->add_option("--out", be.out, "Write the report here instead of stdout");

  for (auto* s : {s_gen, s_eval, s_mc, s_pus, s_cy, s_be}) s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  Io io{out, err};
  try {
    const RunConfig rc = g.config.empty() ? parse_run_config("") : load_run_config(g.config);
    if (s_gen->parsed()) return cmd_gen(gen, rc, g, io);
    if (s_eval->parsed()) return cmd_eval(ev, rc, g, io);
    if (s_mc->parsed()) return cmd_multicrop(mc, rc, g, io);
    if (s_pus->parsed()) return cmd_pus(pu, rc, io);
    if (s_cy->parsed()) return cmd_cycle(cy, rc, g, io);
    if (s_be->parsed()) return cmd_crf_bench(be, rc, g, io);
  } catch (const InputError& e) {
    err << "pmask: " << e.what() << "\n";
    return kExitInput;
  } catch (const ValidationError& e) {
    err << "pmask: " << e.what() << "\n";
    return kExitInput;
  } catch (const FormatError& e) {
    err << "pmask: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "pmask: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInput;
}

}  // namespace pmask
