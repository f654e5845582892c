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
#include <utility>
#include <vector>

#include "pmask/tensor.hpp"
#include "pmask/tensor_io.hpp"

namespace pmask {

/// Half-open pixel rectangle [x0, x1) × [y0, y1).
struct Window {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  std::size_t width() const { return x1 - x0; }
  std::size_t height() const { return y1 - y0; }
  std::size_t area() const { return width() * height(); }
  friend bool operator==(const Window&, const Window&) = default;
};

struct CropSpec {
  std::vector<double> scales = default_scales();
  std::size_t crop_size = 448;
  std::size_t stride = 300;
  double fg_cover_frac = 0.10;
  double crop_area_frac = 0.10;

  /// 0.75, 1.0, ..., 3.0.
  static std::vector<double> default_scales();
  void validate() const;
};

struct CropProposal {
  double scale = 1.0;
  std::size_t resized_height = 0;
  std::size_t resized_width = 0;
  Window window;
  std::vector<int> labels;  // ascending
};

/// round(dim * scale), at least 1.
std::size_t scaled_dim(std::size_t dim, double scale);

/// Window start offsets along one axis; the last window is moved inward to
/// end at the border.
std::vector<std::size_t> window_starts(std::size_t length, std::size_t crop, std::size_t stride);

/// Every window of every scale, scales in spec order, then rows, then columns.
std::vector<CropProposal> generate_crops(std::size_t height, std::size_t width,
                                         const CropSpec& spec);

/// Classes whose pixels inside the window exceed fg_cover_frac of their total
/// in `resized_base`, or crop_area_frac of the window area.
std::vector<int> label_crop(const CropProposal& crop, const PseudoMask& resized_base,
                            const CropSpec& spec);

/// Resizes `base` to the crop's scale and labels every proposal.
void label_crops(std::vector<CropProposal>& crops, const PseudoMask& base, const CropSpec& spec);

/// Nearest-neighbour resize for label maps.
PseudoMask resize_nearest(const PseudoMask& m, std::size_t height, std::size_t width);
/// Bilinear resize with pixel-center alignment, per channel.
Volume<double> resize_bilinear(const Volume<double>& v, std::size_t height, std::size_t width);
RgbImage resize_bilinear(const RgbImage& img, std::size_t height, std::size_t width);

/// Pixels of the window, cut from an image already resized to the crop's scale.
RgbImage crop_image(const RgbImage& resized, const Window& w);

/// Averages crop CAMs in target coordinates. Each CAM must match its window
/// size; classes missing from a crop contribute zero there. Pixels no crop
/// covers stay zero. Output class ids are the sorted union.
CamTensor fuse_crop_cams(const std::vector<std::pair<CropProposal, CamTensor>>& crops,
                         std::size_t target_height, std::size_t target_width);

/// `count` distinct proposals drawn with a seeded generator; order follows the draw.
std::vector<CropProposal> sample_crops(const std::vector<CropProposal>& crops, std::size_t count,
                                       std::uint64_t seed);

}  // namespace pmask
