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


#include "pmask/multicrop.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "pmask/errors.hpp"

namespace pmask {

std::vector<double> CropSpec::default_scales() {
  std::vector<double> s;
  for (int i = 0; i < 10; ++i) s.push_back(0.75 + 0.25 * i);
  return s;
}

void CropSpec::validate() const {
  if (scales.empty()) throw ValidationError("multicrop.scales is empty");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0) || !std::isfinite(scales[i])) {
      throw ValidationError("multicrop.scales must be positive");
    }
    if (i && !(scales[i] > scales[i - 1])) {
      throw ValidationError("multicrop.scales must be strictly ascending");
    }
  }
  if (crop_size == 0) throw ValidationError("multicrop.crop_size must be >= 1");
  if (stride == 0 || stride > crop_size) {
    throw ValidationError("multicrop.stride must lie in [1, crop_size]");
  }
  if (!(fg_cover_frac >= 0.0 && fg_cover_frac <= 1.0) ||
      !(crop_area_frac >= 0.0 && crop_area_frac <= 1.0)) {
    throw ValidationError("multicrop label fractions must lie in [0, 1]");
  }
}

std::size_t scaled_dim(std::size_t dim, double scale) {
  const double v = std::floor(static_cast<double>(dim) * scale + 0.5);
  return v < 1.0 ? 1 : static_cast<std::size_t>(v);
}

std::vector<std::size_t> window_starts(std::size_t length, std::size_t crop, std::size_t stride) {
  if (length <= crop) return {0};
  std::vector<std::size_t> starts;
  for (std::size_t s = 0;; s += stride) {
    if (s + crop >= length) {
      starts.push_back(length - crop);
      break;
    }
    starts.push_back(s);
  }
  return starts;
}

std::vector<CropProposal> generate_crops(std::size_t height, std::size_t width,
                                         const CropSpec& spec) {
  spec.validate();
  if (height == 0 || width == 0) throw ValidationError("image dims must be >= 1");
  std::vector<CropProposal> out;
  for (double scale : spec.scales) {
    const std::size_t rh = scaled_dim(height, scale), rw = scaled_dim(width, scale);
    const std::size_t ch = std::min(spec.crop_size, rh), cw = std::min(spec.crop_size, rw);
    for (std::size_t y : window_starts(rh, spec.crop_size, spec.stride)) {
      for (std::size_t x : window_starts(rw, spec.crop_size, spec.stride)) {
        out.push_back({scale, rh, rw, {x, y, x + cw, y + ch}, {}});
      }
    }
  }
  return out;
}

std::vector<int> label_crop(const CropProposal& crop, const PseudoMask& resized_base,
                            const CropSpec& spec) {
  if (resized_base.height() != crop.resized_height || resized_base.width() != crop.resized_width) {
    throw ValidationError("base mask is not at the crop's scale");
  }
  const Window& w = crop.window;
  if (w.x1 > resized_base.width() || w.y1 > resized_base.height() || w.area() == 0) {
    throw ValidationError("crop window outside the base mask");
  }
  std::array<std::size_t, 256> total{}, inside{};
  const auto& lab = resized_base.labels;
  for (std::size_t y = 0; y < lab.height(); ++y) {
    for (std::size_t x = 0; x < lab.width(); ++x) {
      const auto c = lab(y, x);
      ++total[c];
      if (x >= w.x0 && x < w.x1 && y >= w.y0 && y < w.y1) ++inside[c];
    }
  }
  std::vector<int> labels;
  const double area = static_cast<double>(w.area());
  for (int c = 1; c < kIgnoreLabel; ++c) {
    if (inside[c] == 0) continue;
    const double in = static_cast<double>(inside[c]);
    if (in / static_cast<double>(total[c]) > spec.fg_cover_frac || in / area > spec.crop_area_frac) {
      labels.push_back(c);
    }
  }
  return labels;
}

void label_crops(std::vector<CropProposal>& crops, const PseudoMask& base, const CropSpec& spec) {
  std::map<std::pair<std::size_t, std::size_t>, PseudoMask> cache;
  for (auto& crop : crops) {
    const auto key = std::make_pair(crop.resized_height, crop.resized_width);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, resize_nearest(base, key.first, key.second)).first;
    }
    crop.labels = label_crop(crop, it->second, spec);
  }
}

namespace {

std::size_t nearest_index(std::size_t i, std::size_t src, std::size_t dst) {
  const std::size_t j = (2 * i + 1) * src / (2 * dst);
  return std::min(j, src - 1);
}

/// Source coordinate of destination pixel i under pixel-center alignment.
double source_coord(std::size_t i, std::size_t src, std::size_t dst) {
  return (static_cast<double>(i) + 0.5) * static_cast<double>(src) / static_cast<double>(dst) - 0.5;
}

struct Tap {
  std::size_t i0, i1;
  double f;
};

Tap make_tap(double s, std::size_t n) {
  s = std::clamp(s, 0.0, static_cast<double>(n - 1));
  const auto i0 = static_cast<std::size_t>(std::floor(s));
  const std::size_t i1 = std::min(i0 + 1, n - 1);
  return {i0, i1, s - static_cast<double>(i0)};
}

double sample(std::span<const double> plane, std::size_t w, const Tap& ty, const Tap& tx) {
  const double a = plane[ty.i0 * w + tx.i0], b = plane[ty.i0 * w + tx.i1];
  const double c = plane[ty.i1 * w + tx.i0], d = plane[ty.i1 * w + tx.i1];
  const double top = a + (b - a) * tx.f;
  const double bot = c + (d - c) * tx.f;
  return top + (bot - top) * ty.f;
}

}  // namespace

PseudoMask resize_nearest(const PseudoMask& m, std::size_t height, std::size_t width) {
  if (m.height() == 0 || m.width() == 0) throw ValidationError("cannot resize an empty mask");
  PseudoMask out(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = nearest_index(y, m.height(), height);
    for (std::size_t x = 0; x < width; ++x) {
      out.labels(y, x) = m.labels(sy, nearest_index(x, m.width(), width));
    }
  }
  return out;
}

Volume<double> resize_bilinear(const Volume<double>& v, std::size_t height, std::size_t width) {
  if (v.height() == 0 || v.width() == 0) throw ValidationError("cannot resize an empty volume");
  Volume<double> out(v.channels(), height, width);
  std::vector<Tap> tx(width);
  for (std::size_t x = 0; x < width; ++x) tx[x] = make_tap(source_coord(x, v.width(), width), v.width());
  for (std::size_t y = 0; y < height; ++y) {
    const Tap ty = make_tap(source_coord(y, v.height(), height), v.height());
    for (std::size_t c = 0; c < v.channels(); ++c) {
      auto src = v.plane(c);
      for (std::size_t x = 0; x < width; ++x) out(c, y, x) = sample(src, v.width(), ty, tx[x]);
    }
  }
  return out;
}

RgbImage resize_bilinear(const RgbImage& img, std::size_t height, std::size_t width) {
  Volume<double> planar(3, img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) planar(c, y, x) = img.at(y, x, c);
    }
  }
  const Volume<double> r = resize_bilinear(planar, height, width);
  RgbImage out(height, width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        out.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(r(c, y, x)), 0L, 255L));
      }
    }
  }
  return out;
}

RgbImage crop_image(const RgbImage& resized, const Window& w) {
  if (w.x1 > resized.width || w.y1 > resized.height) throw ValidationError("window outside image");
  RgbImage out(w.height(), w.width());
  for (std::size_t y = 0; y < w.height(); ++y) {
    const auto* src = &resized.pixels[((w.y0 + y) * resized.width + w.x0) * 3];
    std::copy(src, src + w.width() * 3, &out.pixels[y * w.width() * 3]);
  }
  return out;
}

CamTensor fuse_crop_cams(const std::vector<std::pair<CropProposal, CamTensor>>& crops,
                         std::size_t target_height, std::size_t target_width) {
  if (crops.empty()) throw ValidationError("no crops to fuse");
  if (target_height == 0 || target_width == 0) throw ValidationError("target dims must be >= 1");
  std::set<int> universe;
  for (const auto& [prop, cam] : crops) {
    if (cam.height() != prop.window.height() || cam.width() != prop.window.width()) {
      throw ValidationError("crop CAM does not match its window");
    }
    if (cam.class_ids.size() != cam.channels()) throw ValidationError("crop CAM class ids");
    universe.insert(cam.class_ids.begin(), cam.class_ids.end());
  }
  const std::vector<int> ids(universe.begin(), universe.end());
  const std::size_t th = target_height, tw = target_width, plane = th * tw;
  Volume<double> acc(ids.size(), th, tw, 0.0);
  std::vector<std::uint32_t> count(plane, 0);

  for (const auto& [prop, cam] : crops) {
    const Window& w = prop.window;
    std::vector<std::size_t> slot(cam.channels());
    for (std::size_t c = 0; c < cam.channels(); ++c) {
      slot[c] = static_cast<std::size_t>(
          std::lower_bound(ids.begin(), ids.end(), cam.class_ids[c]) - ids.begin());
    }
    for (std::size_t y = 0; y < th; ++y) {
      const double ry = source_coord(y, prop.resized_height, th);
      if (ry + 0.5 < static_cast<double>(w.y0) || ry + 0.5 >= static_cast<double>(w.y1)) continue;
      const Tap ty = make_tap(ry - static_cast<double>(w.y0), w.height());
      for (std::size_t x = 0; x < tw; ++x) {
        const double rx = source_coord(x, prop.resized_width, tw);
        if (rx + 0.5 < static_cast<double>(w.x0) || rx + 0.5 >= static_cast<double>(w.x1)) {
          continue;
        }
        const Tap tx = make_tap(rx - static_cast<double>(w.x0), w.width());
        const std::size_t i = y * tw + x;
        ++count[i];
        for (std::size_t c = 0; c < cam.channels(); ++c) {
          acc.plane(slot[c])[i] += sample(cam.data.plane(c), w.width(), ty, tx);
        }
      }
    }
  }

  CamTensor out{Volume<double>(ids.size(), th, tw, 0.0), ids};
  for (std::size_t c = 0; c < ids.size(); ++c) {
    auto a = acc.plane(c);
    auto o = out.data.plane(c);
    for (std::size_t i = 0; i < plane; ++i) {
      if (count[i]) o[i] = a[i] / static_cast<double>(count[i]);
    }
  }
  return out;
}

std::vector<CropProposal> sample_crops(const std::vector<CropProposal>& crops, std::size_t count,
                                       std::uint64_t seed) {
  std::vector<std::size_t> order(crops.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  count = std::min(count, crops.size());
  // Partial Fisher-Yates with an explicit bounded draw, so the sequence does
  // not depend on the standard library's distribution implementation.
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t span = crops.size() - i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % span;
    std::uint64_t r;
    do r = rng(); while (r >= limit);
    std::swap(order[i], order[i + static_cast<std::size_t>(r % span)]);
  }
  std::vector<CropProposal> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(crops[order[i]]);
  return out;
}

}  // namespace pmask
