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


// Straight-line reference implementations used only by tests. They share no
// code with the library beyond the standard library.
#pragma once

#include <cstdint>
#include <vector>

namespace oracle {

struct CrfSettings {
  int iterations = 10;
  double w1 = 10.0, theta_alpha = 80.0, theta_beta = 13.0;
  double w2 = 3.0, theta_gamma = 3.0;
  double eps = 1e-8;
};

/// Mean-field marginals of the fully connected Potts CRF, written out as the
/// textbook double sum over pixel pairs and label pairs.
/// probs: K planes of H*W values; rgb: H*W*3 interleaved. Returns K planes.
std::vector<double> mean_field(const std::vector<double>& probs, const std::vector<std::uint8_t>& rgb,
                               int h, int w, int k, const CrfSettings& s);

struct PpmgSettings {
  double alpha = 11.0;
  double t = 0.05, scale = 0.3, exponent_floor = 0.05;
  double fg_threshold = 0.05;
  CrfSettings crf;
};

/// Every intermediate of one proportional generation run.
struct PpmgTrace {
  std::vector<double> normalized, smoothed, proportions;  // C planes
  std::vector<double> cv, exponent, denom;                // per class
  std::vector<std::uint8_t> masks;                        // C planes
  std::vector<std::uint8_t> labels;                       // H*W
};

PpmgTrace ppmg(const std::vector<double>& cam, const std::vector<int>& class_ids,
               const std::vector<std::uint8_t>& rgb, int h, int w, const PpmgSettings& s);

}  // namespace oracle
