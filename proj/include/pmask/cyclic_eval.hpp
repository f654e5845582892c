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


#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pmask/tensor_io.hpp"

namespace pmask {

/// counts[g * k + p]: rows are ground truth, columns prediction.
struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::uint64_t> counts;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t num_classes)
      : k(num_classes), counts(num_classes * num_classes, 0) {}

  std::uint64_t& at(std::size_t g, std::size_t p) { return counts[g * k + p]; }
  std::uint64_t at(std::size_t g, std::size_t p) const { return counts[g * k + p]; }
  std::uint64_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Pixels whose ground truth is 255 are skipped. Any other label >= num_classes
/// in either mask throws ValidationError.
ConfusionMatrix confusion(const PseudoMask& gt, const PseudoMask& pred, std::size_t num_classes);

struct MiouResult {
  double miou = 0.0;
  std::vector<std::optional<double>> iou;  // nullopt for absent classes
  std::size_t present = 0;
};

/// Mean IoU over classes with a non-zero union. Throws EmptyEvaluation when
/// there is none.
MiouResult miou(const ConfusionMatrix& cm);

/// Confusion summed over every stem of gt_dir. Throws ValidationError listing
/// stems missing on either side.
ConfusionMatrix evaluate_dirs(const std::filesystem::path& pred_dir,
                              const std::filesystem::path& gt_dir, std::size_t num_classes,
                              std::size_t jobs = 1);

/// External model: writes `<out>/<stem>.png` for each image in `images`.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual void predict(const std::filesystem::path& images, const std::filesystem::path& out) = 0;
};

/// Runs `<command> --images <dir> --out <dir>` through the shell; a non-zero
/// exit status throws PredictorError.
class CommandPredictor : public Predictor {
 public:
  explicit CommandPredictor(std::string command) : command_(std::move(command)) {}
  void predict(const std::filesystem::path& images, const std::filesystem::path& out) override;

 private:
  std::string command_;
};

/// Runs the predictor into `out` (created fresh) and checks that a mask exists
/// for every image stem. Throws PredictorError otherwise.
void run_predictor(Predictor& predictor, const std::filesystem::path& images,
                   const std::filesystem::path& out);

struct HistoryEntry {
  int round = 0;
  std::optional<double> val_miou;
  bool updated = false;
  bool baseline = false;  // score of the current masks themselves
};

struct CycleState {
  int round = 0;
  std::filesystem::path current_masks;
  std::vector<HistoryEntry> history;
};

/// True iff new_miou beats every recorded score by more than eps.
bool should_update(const std::vector<HistoryEntry>& history, double new_miou, double eps = 0.0);

enum class UpdatePolicy {
  kValidation,  // swap on strict val improvement
  kFixed,       // swap every call until max_rounds, no val check
};

struct CycleConfig {
  int max_rounds = 2;
  double eps = 0.0;
  UpdatePolicy policy = UpdatePolicy::kValidation;
  std::size_t num_classes = 21;
  std::size_t jobs = 1;

  void validate() const;
};

struct CyclePaths {
  std::filesystem::path work_dir;  // holds round_<n>/, staging and state files
  std::filesystem::path train_images;
  std::filesystem::path val_images;
  std::optional<std::filesystem::path> val_gt;
};

/// {round, val_miou, updated, pus_enabled, mask_dir} for one call.
struct CycleManifest {
  int round = 0;
  std::optional<double> val_miou;
  bool updated = false;
  bool pus_enabled = false;
  std::filesystem::path mask_dir;
};

struct CycleOutcome {
  CycleState state;
  CycleManifest manifest;
};

/// Test hook run after the staged masks are complete and before they are
/// renamed into place.
using CommitHook = std::function<void(const std::filesystem::path& staging)>;

/// One cycle step. Under kValidation, val_gt is required. The first call also
/// scores the current masks on the val stems when they are present, as the
/// baseline to beat. On update the train predictions are staged, renamed to
/// work_dir/round_<n+1>, and the state file is rewritten atomically.
CycleOutcome run_cycle(const CycleState& state, Predictor& predictor, const CyclePaths& paths,
                       const CycleConfig& cfg, const CommitHook& before_commit = {});

std::string manifest_to_json(const CycleManifest& m);
std::string state_to_json(const CycleState& s);
CycleState state_from_json(const std::string& text);

/// work_dir/cycle_state.json.
std::filesystem::path state_path(const std::filesystem::path& work_dir);
/// Loads the state file when it exists, else starts at round 0 on `initial_masks`.
CycleState load_or_init_state(const std::filesystem::path& work_dir,
                              const std::filesystem::path& initial_masks);

}  // namespace pmask
