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
#include <string>
#include <string_view>

#include "pmask/tensor.hpp"
#include "pmask/tensor_io.hpp"

namespace pmask {

/// Per-pixel losses with a validity mask (0 where the label is ignore).
struct LossMap {
  Grid<double> values;
  Grid<std::uint8_t> valid;

  LossMap() = default;
  /// Every pixel valid.
  explicit LossMap(Grid<double> v);
  LossMap(Grid<double> v, Grid<std::uint8_t> valid_mask);
  /// Valid where labels != 255.
  static LossMap from_labels(Grid<double> v, const PseudoMask& labels);

  std::size_t valid_count() const;
  /// Throws ValidationError on shape mismatch, NaN or negative valid entries.
  void validate() const;
};

enum class PusMode { kNone, kClamp, kPow, kIgnore };

PusMode parse_pus_mode(std::string_view s);
std::string_view pus_mode_name(PusMode m);

struct PusConfig {
  PusMode mode = PusMode::kClamp;
  double beta = 0.5;
  double kappa = 0.5;

  void validate() const;
};

/// min(L, kappa).
LossMap pus_clamp(const LossMap& l, double kappa);
/// L^kappa.
LossMap pus_pow(const LossMap& l, double kappa);
/// 0 where L >= kappa.
LossMap pus_ignore(const LossMap& l, double kappa);
/// Dispatch on mode; kNone returns the input.
LossMap pus_apply(const LossMap& l, PusMode mode, double kappa);

/// Mean over valid pixels.
double mean_valid(const LossMap& l);

struct PusResult {
  double loss = 0.0;
  double plain_mean = 0.0;
  bool gated = false;  // true when the transform was applied
};

/// Plain mean when it is >= beta, otherwise the mean of the transformed map.
/// Throws EmptyLoss when no pixel is valid.
PusResult pus_evaluate(const LossMap& l, const PusConfig& cfg);
double pus_loss(const LossMap& l, const PusConfig& cfg);

}  // namespace pmask
