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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pmask/tensor.hpp"

namespace pmask {

inline constexpr std::uint8_t kBackgroundLabel = 0;
inline constexpr std::uint8_t kIgnoreLabel = 255;

/// C×H×W non-negative activations for the classes present in one image.
struct CamTensor {
  Volume<double> data;
  std::vector<int> class_ids;  // one per channel, in channel order

  std::size_t channels() const { return data.channels(); }
  std::size_t height() const { return data.height(); }
  std::size_t width() const { return data.width(); }

  /// Throws ValidationError unless every invariant holds. A positive
  /// num_classes additionally bounds class ids to [1, num_classes - 1].
  void validate(int num_classes = 0) const;
};

/// H×W 8-bit RGB image, interleaved.
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;  // (y * width + x) * 3 + channel

  RgbImage() = default;
  RgbImage(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(h * w * 3, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Single-label map: 0 background, class ids, 255 ignore.
struct PseudoMask {
  Grid<std::uint8_t> labels;

  PseudoMask() = default;
  PseudoMask(std::size_t h, std::size_t w, std::uint8_t fill = kBackgroundLabel)
      : labels(h, w, fill) {}
  std::size_t height() const { return labels.height(); }
  std::size_t width() const { return labels.width(); }
  friend bool operator==(const PseudoMask&, const PseudoMask&) = default;
};

using Palette = std::array<std::array<std::uint8_t, 3>, 256>;

/// The VOC segmentation colormap, generated by bit interleaving of the index.
const Palette& voc_palette();

/// Dense little-endian array read from an NPY file, widened to double.
struct NpyArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

NpyArray read_npy(const std::filesystem::path& path);
/// Writes NPY v1.0, dtype "<f4", C order.
void write_npy_f32(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
                   std::span<const double> data);

/// `<stem>.json` next to the NPY file.
std::filesystem::path sidecar_path(const std::filesystem::path& npy_path);

CamTensor load_cam_tensor(const std::filesystem::path& path);
/// Writes `path` (NPY float32) and its sidecar JSON. image_id defaults to the file stem.
void save_cam_tensor(const CamTensor& t, const std::filesystem::path& path,
                     std::optional<std::string> image_id = std::nullopt);

void encode_mask_png(const PseudoMask& m, const std::filesystem::path& path);
PseudoMask decode_mask_png(const std::filesystem::path& path);

/// PNG (any color type, converted to 8-bit RGB) or binary PPM (P6).
RgbImage load_image(const std::filesystem::path& path);
void save_image_png(const RgbImage& img, const std::filesystem::path& path);
void save_image_ppm(const RgbImage& img, const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

/// Regular files in `dir` whose extension (lower-cased) is one of `exts`,
/// keyed by stem. Throws IoError if `dir` is not a directory and
/// ValidationError if two files share a stem.
std::map<std::string, std::filesystem::path> index_by_stem(
    const std::filesystem::path& dir, const std::vector<std::string>& exts);

/// Extensions accepted by load_image.
const std::vector<std::string>& image_extensions();

}  // namespace pmask
