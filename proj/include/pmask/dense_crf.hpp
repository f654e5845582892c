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

#include <cstddef>

#include "pmask/tensor.hpp"
#include "pmask/tensor_io.hpp"

namespace pmask {

/// Largest H*W accepted by the O((HW)^2) exact backend.
inline constexpr std::size_t kExactMaxPixels = 4096;

/// Position + color kernel: w1 * exp(-|dp|^2 / 2 theta_alpha^2 - |dI|^2 / 2 theta_beta^2).
struct AppearanceKernel {
  double weight = 10.0;
  double spatial_sigma = 80.0;
  double color_sigma = 13.0;
};

/// Position-only kernel: w2 * exp(-|dp|^2 / 2 theta_gamma^2).
struct SmoothnessKernel {
  double weight = 3.0;
  double spatial_sigma = 3.0;
};

/// Fully connected CRF with Potts compatibility.
struct CrfParams {
  int iterations = 10;
  AppearanceKernel appearance;
  SmoothnessKernel smoothness;
  double unary_eps = 1e-8;

  void validate() const;
};

struct CrfProblem {
  Volume<double> unary_probs;  // K×H×W probability-like scores
  RgbImage image;

  std::size_t labels() const { return unary_probs.channels(); }
  std::size_t pixels() const { return unary_probs.plane_size(); }
  void validate() const;
};

/// Mean-field marginals, K×H×W; every pixel column sums to one.
struct Posterior {
  Volume<double> q;

  /// Per-pixel index of the largest marginal; ties resolve to the lowest index.
  Grid<int> argmax() const;
};

/// -ln(clamp(p, eps, 1)).
Volume<double> build_unary(const Volume<double>& probs, double eps = 1e-8);

/// Reference backend: messages are explicit sums over every other pixel.
/// Throws SizeError when H*W exceeds kExactMaxPixels.
Posterior mean_field_exact(const CrfProblem& p, const CrfParams& params);

/// Accelerated backend: separable convolution for the smoothness kernel and
/// a permutohedral lattice for the appearance kernel.
Posterior mean_field_fast(const CrfProblem& p, const CrfParams& params);

/// build_unary + backend dispatch. The exact backend runs only when `strict`
/// is set and the image is within kExactMaxPixels.
Posterior crf_refine(const RgbImage& image, const Volume<double>& scores, const CrfParams& params,
                     bool strict = false);

}  // namespace pmask
