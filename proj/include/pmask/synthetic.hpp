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

#include <cmath>
#include <cstdint>
#include <random>

#include "pmask/dense_crf.hpp"

namespace pmask {

/// mt19937_64 with distribution code fixed here, so seeded streams are the
/// same under every standard library.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next() { return eng_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do r = eng_(); while (r >= limit);
    return r % n;
  }
  /// Standard normal, Box-Muller.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::mt19937_64 eng_;
};

/// Independent uniform unaries (normalized per pixel) and uniform colors.
CrfProblem random_crf_problem(std::size_t h, std::size_t w, std::size_t labels, std::uint64_t seed);

struct StructuredSpec {
  double min_color_separation = 60.0;  // between region mean colors
  double color_noise = 10.0;           // per-channel Gaussian sigma
  double unary_noise = 0.3;            // uniform noise added to the unaries
};

/// Voronoi partition with one region per label. Region colors are distinct
/// means plus Gaussian noise. Unaries favor the pixel's region label (0.5
/// against 0.25) plus uniform noise, normalized per pixel.
CrfProblem structured_crf_problem(std::size_t h, std::size_t w, std::size_t labels,
                                  std::uint64_t seed, const StructuredSpec& spec = {});

}  // namespace pmask
