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


#include "pmask/cyclic_eval.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "pmask/errors.hpp"
#include "pmask/parallel.hpp"

namespace pmask {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  if (o.k != k) throw ValidationError("confusion matrices differ in class count");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
  return *this;
}

ConfusionMatrix confusion(const PseudoMask& gt, const PseudoMask& pred, std::size_t num_classes) {
  if (num_classes == 0 || num_classes > 255) throw ValidationError("num_classes must lie in [1, 255]");
  if (gt.height() != pred.height() || gt.width() != pred.width()) {
    throw ValidationError("ground truth and prediction differ in size");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const std::size_t g = gt.labels[i];
    if (g == kIgnoreLabel) continue;
    const std::size_t p = pred.labels[i];
    if (g >= num_classes || p >= num_classes) {
      throw ValidationError("label " + std::to_string(g >= num_classes ? g : p) +
                            " >= num_classes " + std::to_string(num_classes));
    }
    ++cm.at(g, p);
  }
  return cm;
}

MiouResult miou(const ConfusionMatrix& cm) {
  MiouResult r;
  r.iou.resize(cm.k);
  double sum = 0.0;
  for (std::size_t c = 0; c < cm.k; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < cm.k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::uint64_t diag = cm.at(c, c);
    const std::uint64_t uni = row + col - diag;
    if (uni == 0) continue;
    const double v = static_cast<double>(diag) / static_cast<double>(uni);
    r.iou[c] = v;
    sum += v;
    ++r.present;
  }
  if (r.present == 0) throw EmptyEvaluation("no class present in ground truth or prediction");
  r.miou = sum / static_cast<double>(r.present);
  return r;
}

namespace {

const std::vector<std::string> kPngOnly{".png"};

ConfusionMatrix evaluate_stems(const std::map<std::string, fs::path>& pred,
                               const std::map<std::string, fs::path>& gt, std::size_t num_classes,
                               std::size_t jobs, bool allow_extra) {
  std::vector<std::string> missing;
  for (const auto& [stem, _] : gt) {
    if (!pred.count(stem)) missing.push_back("missing prediction: " + stem);
  }
  if (!allow_extra) {
    for (const auto& [stem, _] : pred) {
      if (!gt.count(stem)) missing.push_back("no ground truth: " + stem);
    }
  }
  if (!missing.empty()) {
    std::string msg = "stem mismatch";
    for (const auto& m : missing) msg += "\n  " + m;
    throw ValidationError(msg);
  }
  if (gt.empty()) throw ValidationError("no ground-truth masks");
  std::vector<const std::pair<const std::string, fs::path>*> items;
  for (const auto& kv : gt) items.push_back(&kv);
  std::vector<ConfusionMatrix> parts(items.size());
  parallel_for(items.size(), jobs, [&](std::size_t i) {
    const auto& [stem, gt_path] = *items[i];
    parts[i] = confusion(decode_mask_png(gt_path), decode_mask_png(pred.at(stem)), num_classes);
  });
  ConfusionMatrix total(num_classes);
  for (const auto& p : parts) total += p;
  return total;
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

}  // namespace

ConfusionMatrix evaluate_dirs(const fs::path& pred_dir, const fs::path& gt_dir,
                              std::size_t num_classes, std::size_t jobs) {
  return evaluate_stems(index_by_stem(pred_dir, kPngOnly), index_by_stem(gt_dir, kPngOnly),
                        num_classes, jobs, false);
}

void CommandPredictor::predict(const fs::path& images, const fs::path& out) {
  const std::string cmd = command_ + " --images " + shell_quote(images.string()) + " --out " +
                          shell_quote(out.string());
  const int status = std::system(cmd.c_str());
  if (status == -1) throw PredictorError("cannot launch predictor: " + command_);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw PredictorError("predictor exited with status " +
                         std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1) + ": " +
                         command_);
  }
}

void run_predictor(Predictor& predictor, const fs::path& images, const fs::path& out) {
  const auto inputs = index_by_stem(images, image_extensions());
  std::error_code ec;
  fs::remove_all(out, ec);
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string());
  predictor.predict(images, out);
  const auto outputs = index_by_stem(out, kPngOnly);
  std::string missing;
  for (const auto& [stem, _] : inputs) {
    if (!outputs.count(stem)) missing += " " + stem;
  }
  if (!missing.empty()) throw PredictorError("predictor wrote no mask for:" + missing);
}

bool should_update(const std::vector<HistoryEntry>& history, double new_miou, double eps) {
  std::optional<double> best;
  for (const auto& h : history) {
    if (h.val_miou && (!best || *h.val_miou > *best)) best = h.val_miou;
  }
  if (!best) return false;
  return new_miou > *best + eps;
}

void CycleConfig::validate() const {
  if (max_rounds < 0) throw ValidationError("cycle.max_rounds must be >= 0");
  if (!(eps >= 0.0)) throw ValidationError("cycle.eps must be >= 0");
  if (num_classes == 0 || num_classes > 255) {
    throw ValidationError("cycle.num_classes must lie in [1, 255]");
  }
}

fs::path state_path(const fs::path& work_dir) { return work_dir / "cycle_state.json"; }

namespace {

json entry_json(const HistoryEntry& h) {
  json j{{"round", h.round}, {"updated", h.updated}, {"baseline", h.baseline}};
  j["val_miou"] = h.val_miou ? json(*h.val_miou) : json(nullptr);
  return j;
}

}  // namespace

std::string manifest_to_json(const CycleManifest& m) {
  json j{{"round", m.round},
         {"updated", m.updated},
         {"pus_enabled", m.pus_enabled},
         {"mask_dir", m.mask_dir.string()}};
  j["val_miou"] = m.val_miou ? json(*m.val_miou) : json(nullptr);
  return j.dump();
}

std::string state_to_json(const CycleState& s) {
  json hist = json::array();
  for (const auto& h : s.history) hist.push_back(entry_json(h));
  json j{{"round", s.round}, {"current_masks", s.current_masks.string()}, {"history", hist}};
  return j.dump(2) + "\n";
}

CycleState state_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    CycleState s;
    s.round = j.at("round").get<int>();
    s.current_masks = j.at("current_masks").get<std::string>();
    for (const auto& h : j.at("history")) {
      HistoryEntry e;
      e.round = h.at("round").get<int>();
      e.updated = h.at("updated").get<bool>();
      e.baseline = h.value("baseline", false);
      if (!h.at("val_miou").is_null()) e.val_miou = h.at("val_miou").get<double>();
      s.history.push_back(e);
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("cycle state: ") + e.what());
  }
}

CycleState load_or_init_state(const fs::path& work_dir, const fs::path& initial_masks) {
  const fs::path p = state_path(work_dir);
  if (fs::exists(p)) return state_from_json(read_file(p));
  CycleState s;
  s.current_masks = initial_masks;
  return s;
}

CycleOutcome run_cycle(const CycleState& state, Predictor& predictor, const CyclePaths& paths,
                       const CycleConfig& cfg, const CommitHook& before_commit) {
  cfg.validate();
  CycleState s = state;
  std::error_code ec;
  fs::create_directories(paths.work_dir, ec);
  if (ec) throw IoError("cannot create " + paths.work_dir.string());

  std::optional<double> score;
  bool update = false;
  if (paths.val_gt) {
    const auto gt = index_by_stem(*paths.val_gt, kPngOnly);
    if (s.history.empty()) {
      const auto current = index_by_stem(s.current_masks, kPngOnly);
      bool covers = !gt.empty();
      for (const auto& [stem, _] : gt) covers = covers && current.count(stem);
      if (covers) {
        const auto cm = evaluate_stems(current, gt, cfg.num_classes, cfg.jobs, true);
        s.history.push_back({s.round, miou(cm).miou, false, true});
      }
    }
    const fs::path val_pred = paths.work_dir / "val_predictions";
    run_predictor(predictor, paths.val_images, val_pred);
    score = miou(evaluate_stems(index_by_stem(val_pred, kPngOnly), gt, cfg.num_classes, cfg.jobs,
                                false))
                .miou;
  } else if (cfg.policy == UpdatePolicy::kValidation) {
    throw ValidationError("validation ground truth is required unless updates are forced");
  }

  if (s.round < cfg.max_rounds) {
    update = cfg.policy == UpdatePolicy::kFixed || should_update(s.history, *score, cfg.eps);
  }
  s.history.push_back({s.round, score, update, false});

  if (update) {
    const int next = s.round + 1;
    const fs::path staging = paths.work_dir / ("staging_round_" + std::to_string(next));
    const fs::path target = paths.work_dir / ("round_" + std::to_string(next));
    run_predictor(predictor, paths.train_images, staging);
    if (before_commit) before_commit(staging);
    fs::remove_all(target, ec);
    fs::rename(staging, target, ec);
    if (ec) throw IoError("cannot move " + staging.string() + " to " + target.string());
    s.round = next;
    s.current_masks = target;
  }
  write_file_atomic(state_path(paths.work_dir), state_to_json(s));

  CycleManifest m{s.round, score, update, s.round == 0, s.current_masks};
  write_file_atomic(paths.work_dir / "manifest.json", manifest_to_json(m) + "\n");
  std::ofstream log(paths.work_dir / "manifests.jsonl", std::ios::app);
  log << manifest_to_json(m) << "\n";
  return {s, m};
}

}  // namespace pmask
