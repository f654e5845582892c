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

#include <vector>

#include "pmask/cam_ops.hpp"
#include "pmask/dense_crf.hpp"
#include "pmask/tensor.hpp"
#include "pmask/tensor_io.hpp"

namespace pmask {

/// C×H×W binary class masks, aligned with class_ids.
struct ClassBinaryMasks {
  Volume<std::uint8_t> masks;
  std::vector<int> class_ids;
};

/// Share of each pixel in its class's masked activation total.
struct ProportionMap {
  Volume<double> p;
  std::vector<double> denominators;  // masked sum per class
  std::vector<bool> active;          // false when the denominator is zero
};

enum class TieBreak { kLowestClassId };

struct GenConfig {
  double alpha = 11.0;
  CvsConfig cvs;
  CrfParams crf;
  double fg_threshold = 0.05;
  TieBreak tie_break = TieBreak::kLowestClassId;
  bool strict_crf = false;  // use the exact backend when the image is small enough

  void validate() const;
};

/// normalize, unary with background, CRF, argmax.
PseudoMask baseline_mask(const CamTensor& cam, const RgbImage& img, const GenConfig& cfg);
/// Same as baseline_mask for an already normalized CAM.
PseudoMask baseline_mask_from_normalized(const NormalizedCam& norm, const RgbImage& img,
                                         const GenConfig& cfg);

/// Two-label CRF on (background, channel); 1 where the foreground posterior
/// exceeds cfg.fg_threshold.
Grid<std::uint8_t> class_binary_mask(const Grid<double>& smoothed_channel, const RgbImage& img,
                                     const GenConfig& cfg);

ProportionMap proportion_map(const NormalizedCam& norm, const ClassBinaryMasks& masks);

/// Per pixel, the masked class with the largest proportion; background when
/// no mask is set.
PseudoMask ppmg_assign(const ClassBinaryMasks& masks, const ProportionMap& p,
                       const std::vector<int>& class_ids);

/// Intermediate products of one generate_ppmg run.
struct PpmgTrace {
  NormalizedCam normalized;
  SmoothedCam smoothed;
  ClassBinaryMasks masks;
  ProportionMap proportions;
  PseudoMask mask;
};

PpmgTrace trace_ppmg(const CamTensor& cam, const RgbImage& img, const GenConfig& cfg);
PseudoMask generate_ppmg(const CamTensor& cam, const RgbImage& img, const GenConfig& cfg);

}  // namespace pmask
