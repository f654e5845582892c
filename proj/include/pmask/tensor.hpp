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

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace pmask {

/// Dense row-major H×W array.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), data_(height * width, fill) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t y, std::size_t x) { return data_[y * width_ + x]; }
  const T& operator()(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool same_shape(const Grid& o) const { return height_ == o.height_ && width_ == o.width_; }
  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

/// Dense C×H×W array, channel-major. Each channel is a contiguous plane.
template <class T>
class Volume {
 public:
  Volume() = default;
  Volume(std::size_t channels, std::size_t height, std::size_t width, T fill = T{})
      : channels_(channels), height_(height), width_(width),
        data_(channels * height * width, fill) {}

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t plane_size() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }
  const T& operator()(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::span<T> plane(std::size_t c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const T> plane(std::size_t c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  Grid<T> plane_grid(std::size_t c) const {
    Grid<T> g(height_, width_);
    auto src = plane(c);
    std::copy(src.begin(), src.end(), g.storage().begin());
    return g;
  }
  void set_plane(std::size_t c, const Grid<T>& g) {
    std::copy(g.storage().begin(), g.storage().end(), plane(c).begin());
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  bool same_extent(std::size_t h, std::size_t w) const { return height_ == h && width_ == w; }
  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

}  // namespace pmask
