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

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "pmask/synthetic.hpp"
#include "pmask/tensor_io.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "pmask") {
    static std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline pmask::CamTensor random_cam(std::size_t c, std::size_t h, std::size_t w,
                                   std::uint64_t seed, double scale = 1.0) {
  pmask::SeededRng rng(seed);
  pmask::CamTensor t{pmask::Volume<double>(c, h, w), {}};
  for (auto& v : t.data.storage()) v = scale * rng.uniform();
  for (std::size_t i = 0; i < c; ++i) t.class_ids.push_back(static_cast<int>(i + 1));
  return t;
}

inline pmask::RgbImage random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  pmask::SeededRng rng(seed);
  pmask::RgbImage img(h, w);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

inline std::filesystem::path fixture_dir() { return PMASK_FIXTURE_DIR; }

}  // namespace testing
