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


#include "pmask/mask_gen.hpp"

#include <cmath>

#include "pmask/errors.hpp"
#include "pmask/numeric.hpp"

namespace pmask {

namespace {

void check_pair(std::size_t h, std::size_t w, const RgbImage& img) {
  if (img.height != h || img.width != w) {
    throw ValidationError("image is " + std::to_string(img.height) + "x" +
                          std::to_string(img.width) + ", CAM is " + std::to_string(h) + "x" +
                          std::to_string(w));
  }
}

std::uint8_t to_label(int class_id) { return static_cast<std::uint8_t>(class_id); }

}  // namespace

void GenConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("gen.alpha must be >= 0");
  if (!(fg_threshold >= 0.0 && fg_threshold < 1.0)) {
    throw ValidationError("gen.fg_threshold must lie in [0, 1)");
  }
  cvs.validate();
  crf.validate();
}

PseudoMask baseline_mask_from_normalized(const NormalizedCam& norm, const RgbImage& img,
                                         const GenConfig& cfg) {
  check_pair(norm.data.height(), norm.data.width(), img);
  const UnaryCam unary = assemble_unary(norm, cfg.alpha);
  const Posterior post = crf_refine(img, unary.data, cfg.crf, cfg.strict_crf);
  const Grid<int> best = post.argmax();
  PseudoMask out(best.height(), best.width());
  for (std::size_t i = 0; i < best.size(); ++i) {
    out.labels[i] = best[i] == 0 ? kBackgroundLabel : to_label(norm.class_ids[best[i] - 1]);
  }
  return out;
}

PseudoMask baseline_mask(const CamTensor& cam, const RgbImage& img, const GenConfig& cfg) {
  cam.validate();
  return baseline_mask_from_normalized(normalize(cam), img, cfg);
}

Grid<std::uint8_t> class_binary_mask(const Grid<double>& smoothed_channel, const RgbImage& img,
                                     const GenConfig& cfg) {
  const std::size_t h = smoothed_channel.height(), w = smoothed_channel.width();
  check_pair(h, w, img);
  Volume<double> scores(2, h, w);
  scores.set_plane(0, background_map(smoothed_channel.values(), h, w, cfg.alpha));
  scores.set_plane(1, smoothed_channel);
  const Posterior post = crf_refine(img, scores, cfg.crf, cfg.strict_crf);
  Grid<std::uint8_t> mask(h, w, 0);
  auto fg = post.q.plane(1);
  for (std::size_t i = 0; i < fg.size(); ++i) mask[i] = fg[i] > cfg.fg_threshold ? 1 : 0;
  return mask;
}

ProportionMap proportion_map(const NormalizedCam& norm, const ClassBinaryMasks& masks) {
  const auto& x = norm.data;
  const auto& m = masks.masks;
  if (m.channels() != x.channels() || !m.same_extent(x.height(), x.width())) {
    throw ValidationError("mask volume does not match the normalized CAM");
  }
  ProportionMap out{Volume<double>(x.channels(), x.height(), x.width(), 0.0),
                    std::vector<double>(x.channels(), 0.0),
                    std::vector<bool>(x.channels(), false)};
  std::vector<double> masked(x.plane_size());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    auto xv = x.plane(c);
    auto mv = m.plane(c);
    for (std::size_t i = 0; i < xv.size(); ++i) masked[i] = mv[i] ? xv[i] : 0.0;
    const double denom = pairwise_sum(std::span<const double>(masked));
    out.denominators[c] = denom;
    if (!(denom > 0.0)) continue;
    out.active[c] = true;
    auto pv = out.p.plane(c);
    for (std::size_t i = 0; i < xv.size(); ++i) pv[i] = xv[i] / denom;
  }
  return out;
}

PseudoMask ppmg_assign(const ClassBinaryMasks& masks, const ProportionMap& p,
                       const std::vector<int>& class_ids) {
  const auto& m = masks.masks;
  if (p.p.channels() != m.channels() || !p.p.same_extent(m.height(), m.width()) ||
      class_ids.size() != m.channels()) {
    throw ValidationError("masks, proportions and class ids disagree in shape");
  }
  PseudoMask out(m.height(), m.width());
  for (std::size_t i = 0; i < m.plane_size(); ++i) {
    int best = -1;
    double best_p = 0.0;
    for (std::size_t c = 0; c < m.channels(); ++c) {
      if (!m.plane(c)[i] || !p.active[c]) continue;
      const double v = p.p.plane(c)[i];
      const bool better = best < 0 || v > best_p ||
                          (v == best_p && class_ids[c] < class_ids[static_cast<std::size_t>(best)]);
      if (better) {
        best = static_cast<int>(c);
        best_p = v;
      }
    }
    if (best >= 0) out.labels[i] = to_label(class_ids[static_cast<std::size_t>(best)]);
  }
  return out;
}

PpmgTrace trace_ppmg(const CamTensor& cam, const RgbImage& img, const GenConfig& cfg) {
  cam.validate();
  check_pair(cam.height(), cam.width(), img);
  PpmgTrace tr;
  tr.normalized = normalize(cam);
  tr.smoothed = cvs_smooth(tr.normalized, cfg.cvs);
  tr.masks = {Volume<std::uint8_t>(cam.channels(), cam.height(), cam.width()), cam.class_ids};
  for (std::size_t c = 0; c < cam.channels(); ++c) {
    tr.masks.masks.set_plane(c, class_binary_mask(tr.smoothed.data.plane_grid(c), img, cfg));
  }
  tr.proportions = proportion_map(tr.normalized, tr.masks);
  tr.mask = ppmg_assign(tr.masks, tr.proportions, cam.class_ids);
  return tr;
}

PseudoMask generate_ppmg(const CamTensor& cam, const RgbImage& img, const GenConfig& cfg) {
  return trace_ppmg(cam, img, cfg).mask;
}

}  // namespace pmask
