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

#include <filesystem>
#include <optional>
#include <string>

#include "pmask/cyclic_eval.hpp"
#include "pmask/dense_crf.hpp"
#include "pmask/mask_gen.hpp"
#include "pmask/multicrop.hpp"
#include "pmask/pus.hpp"

namespace pmask {

/// Optional dataset locations; relative entries resolve against the config
/// file's directory.
struct PathConfig {
  std::optional<std::filesystem::path> cams, images, masks, gt, out, work_dir;
  std::optional<std::filesystem::path> train_images, val_images, val_gt;
  std::optional<std::string> predictor;
};

struct RunConfig {
  int num_classes = 21;
  CrfParams crf;
  GenConfig gen;
  double base_alpha = 24.0;  // background exponent for the baseline (base) mask
  PusConfig pus;
  CropSpec multicrop;
  CycleConfig cycle;
  PathConfig paths;

  void validate() const;
};

/// Parses TOML text. Unknown sections or keys throw ValidationError; `base`
/// anchors relative paths.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// TOML text that parses back to `cfg` (paths omitted).
std::string dump_run_config(const RunConfig& cfg);

}  // namespace pmask
