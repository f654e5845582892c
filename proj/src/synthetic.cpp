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


#include "pmask/synthetic.hpp"

#include <algorithm>
#include <array>
#include <vector>

#include "pmask/errors.hpp"

namespace pmask {

namespace {

std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void normalize_columns(Volume<double>& v) {
  for (std::size_t i = 0; i < v.plane_size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < v.channels(); ++k) s += v.plane(k)[i];
    for (std::size_t k = 0; k < v.channels(); ++k) v.plane(k)[i] /= s;
  }
}

}  // namespace

CrfProblem random_crf_problem(std::size_t h, std::size_t w, std::size_t labels,
                              std::uint64_t seed) {
  if (h == 0 || w == 0 || labels < 2) throw ValidationError("bad synthetic problem shape");
  SeededRng rng(seed);
  CrfProblem p{Volume<double>(labels, h, w), RgbImage(h, w)};
  for (auto& px : p.image.pixels) px = static_cast<std::uint8_t>(rng.below(256));
  for (auto& u : p.unary_probs.storage()) u = rng.uniform(0.01, 1.0);
  normalize_columns(p.unary_probs);
  return p;
}

CrfProblem structured_crf_problem(std::size_t h, std::size_t w, std::size_t labels,
                                  std::uint64_t seed, const StructuredSpec& spec) {
  if (h == 0 || w == 0 || labels < 2) throw ValidationError("bad synthetic problem shape");
  SeededRng rng(seed);
  std::vector<double> cx(labels), cy(labels);
  std::vector<std::array<double, 3>> color(labels);
  for (std::size_t k = 0; k < labels; ++k) {
    cx[k] = rng.uniform() * static_cast<double>(w);
    cy[k] = rng.uniform() * static_cast<double>(h);
    for (int attempt = 0;; ++attempt) {
      for (auto& c : color[k]) c = static_cast<double>(rng.below(256));
      bool ok = true;
      for (std::size_t q = 0; q < k && ok; ++q) {
        double d = 0.0;
        for (int c = 0; c < 3; ++c) d += (color[k][c] - color[q][c]) * (color[k][c] - color[q][c]);
        ok = std::sqrt(d) >= spec.min_color_separation;
      }
      if (ok) break;
      if (attempt > 10000) throw ValidationError("cannot place separated region colors");
    }
  }
  CrfProblem p{Volume<double>(labels, h, w), RgbImage(h, w)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t best = 0;
      double bd = 0.0;
      for (std::size_t k = 0; k < labels; ++k) {
        const double dx = static_cast<double>(x) - cx[k], dy = static_cast<double>(y) - cy[k];
        const double d = dx * dx + dy * dy;
        if (k == 0 || d < bd) {
          bd = d;
          best = k;
        }
      }
      for (int c = 0; c < 3; ++c) {
        p.image.at(y, x, c) = to_u8(color[best][c] + spec.color_noise * rng.normal());
      }
      for (std::size_t k = 0; k < labels; ++k) {
        p.unary_probs(k, y, x) = (k == best ? 0.5 : 0.25) + spec.unary_noise * rng.uniform();
      }
    }
  }
  normalize_columns(p.unary_probs);
  return p;
}

}  // namespace pmask
