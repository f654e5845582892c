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

#include <span>
#include <vector>

#include "pmask/tensor.hpp"
#include "pmask/tensor_io.hpp"

namespace pmask {

/// Min-max normalized CAM: every non-constant channel spans exactly [0, 1].
struct NormalizedCam {
  Volume<double> data;
  std::vector<int> class_ids;
};

/// Normalized CAM after per-channel exponent smoothing.
struct SmoothedCam {
  Volume<double> data;
  std::vector<int> class_ids;
  std::vector<double> exponents;  // one per channel
};

/// (C+1)×H×W scores; channel 0 is the synthesized background.
struct UnaryCam {
  Volume<double> data;
  std::vector<int> class_ids;  // for channels 1..C
};

struct CvsConfig {
  double t = 0.05;               // foreground threshold (strict)
  double s = 0.3;                // scale factor on the coefficient of variation
  double exponent_floor = 0.05;  // smallest exponent ever applied

  void validate() const;
};

/// Per channel (x - min) / (max - min). A constant channel maps to all zeros.
NormalizedCam normalize(const CamTensor& cam);

/// (1 - max_c norm[c])^alpha per pixel.
Grid<double> background_map(const NormalizedCam& norm, double alpha);
/// Background of a single channel, (1 - x)^alpha.
Grid<double> background_map(std::span<const double> channel, std::size_t height,
                            std::size_t width, double alpha);

UnaryCam assemble_unary(const NormalizedCam& norm, double alpha);

/// Values strictly greater than t, in scan order.
std::vector<double> foreground_values(std::span<const double> channel, double t);

/// Population standard deviation over mean. Throws DegenerateChannel when fg
/// is empty or has zero mean.
double coefficient_of_variation(std::span<const double> fg);

/// Exponent max(floor, 1 - s * c_v) for every channel; channels without
/// foreground get exponent 1.
std::vector<double> cvs_exponents(const NormalizedCam& norm, const CvsConfig& cfg);

SmoothedCam cvs_smooth(const NormalizedCam& norm, const CvsConfig& cfg);

}  // namespace pmask
