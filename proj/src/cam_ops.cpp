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

#include "pmask/cam_ops.hpp"

#include <algorithm>
#include <cmath>

#include "pmask/errors.hpp"
#include "pmask/numeric.hpp"

namespace pmask {

void CvsConfig::validate() const {
  if (!(t >= 0.0 && t < 1.0)) throw ValidationError("cvs.t must lie in [0, 1)");
  if (!(s >= 0.0)) throw ValidationError("cvs.s must be >= 0");
  if (!(exponent_floor > 0.0 && exponent_floor <= 1.0)) {
    throw ValidationError("cvs.exponent_floor must lie in (0, 1]");
  }
}

NormalizedCam normalize(const CamTensor& cam) {
  NormalizedCam out{Volume<double>(cam.channels(), cam.height(), cam.width()), cam.class_ids};
  for (std::size_t c = 0; c < cam.channels(); ++c) {
    auto src = cam.data.plane(c);
    auto dst = out.data.plane(c);
    const auto [lo, hi] = std::minmax_element(src.begin(), src.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) continue;  // constant channel stays zero
    const double base = *lo;
    std::transform(src.begin(), src.end(), dst.begin(),
                   [&](double x) { return (x - base) / range; });
  }
  return out;
}

Grid<double> background_map(std::span<const double> channel, std::size_t height,
                            std::size_t width, double alpha) {
  Grid<double> bg(height, width);
  for (std::size_t i = 0; i < channel.size(); ++i) bg[i] = std::pow(1.0 - channel[i], alpha);
  return bg;
}

Grid<double> background_map(const NormalizedCam& norm, double alpha) {
  const auto& v = norm.data;
  Grid<double> peak(v.height(), v.width(), 0.0);
  for (std::size_t c = 0; c < v.channels(); ++c) {
    auto p = v.plane(c);
    for (std::size_t i = 0; i < p.size(); ++i) peak[i] = std::max(peak[i], p[i]);
  }
  return background_map(peak.values(), v.height(), v.width(), alpha);
}

UnaryCam assemble_unary(const NormalizedCam& norm, double alpha) {
  const auto& v = norm.data;
  UnaryCam out{Volume<double>(v.channels() + 1, v.height(), v.width()), norm.class_ids};
  out.data.set_plane(0, background_map(norm, alpha));
  std::copy(v.storage().begin(), v.storage().end(), out.data.plane(1).begin());
  return out;
}

std::vector<double> foreground_values(std::span<const double> channel, double t) {
  std::vector<double> fg;
  std::copy_if(channel.begin(), channel.end(), std::back_inserter(fg),
               [t](double x) { return x > t; });
  return fg;
}

double coefficient_of_variation(std::span<const double> fg) {
  if (fg.empty()) throw DegenerateChannel("coefficient of variation of an empty set");
  const double mean = pairwise_mean(fg);
  if (!(mean > 0.0)) throw DegenerateChannel("coefficient of variation with zero mean");
  std::vector<double> sq(fg.size());
  std::transform(fg.begin(), fg.end(), sq.begin(), [mean](double x) {
    const double d = x - mean;
    return d * d;
  });
  return std::sqrt(pairwise_mean(sq)) / mean;
}

std::vector<double> cvs_exponents(const NormalizedCam& norm, const CvsConfig& cfg) {
  std::vector<double> exps(norm.data.channels(), 1.0);
  for (std::size_t c = 0; c < exps.size(); ++c) {
    const auto fg = foreground_values(norm.data.plane(c), cfg.t);
    if (fg.empty()) continue;
    const double cv = coefficient_of_variation(fg);
    exps[c] = std::max(cfg.exponent_floor, 1.0 - cfg.s * cv);
  }
  return exps;
}

SmoothedCam cvs_smooth(const NormalizedCam& norm, const CvsConfig& cfg) {
  cfg.validate();
  SmoothedCam out{norm.data, norm.class_ids, cvs_exponents(norm, cfg)};
  for (std::size_t c = 0; c < out.exponents.size(); ++c) {
    const double p = out.exponents[c];
    if (p == 1.0) continue;
    for (double& x : out.data.plane(c)) x = std::pow(x, p);
  }
  return out;
}

}  // namespace pmask
