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
#include <cstdint>
#include <span>
#include <vector>

namespace pmask {

/// Sparse permutohedral lattice for approximate Gaussian filtering in a
/// d-dimensional feature space (splat, blur along the d+1 lattice axes,
/// slice). Features are expected pre-scaled so the target kernel is
/// exp(-|f_i - f_j|^2 / 2).
///
/// The output approximates the Gaussian sum up to a global gain; callers
/// that need absolute magnitudes calibrate it (see dense_crf).
class PermutohedralLattice {
 public:
  /// features: n rows of `dims` values, row-major.
  PermutohedralLattice(std::span<const double> features, std::size_t dims, std::size_t n);

  /// in/out: n rows of value_dims values, row-major. in and out may alias.
  void filter(std::span<const double> in, std::size_t value_dims, std::span<double> out) const;

  std::size_t dims() const { return dims_; }
  std::size_t points() const { return n_; }
  std::size_t vertices() const { return vertices_; }

 private:
  std::size_t dims_;
  std::size_t n_;
  std::size_t vertices_ = 0;
  std::vector<std::uint32_t> offsets_;   // n * (dims + 1) vertex indices
  std::vector<double> weights_;          // n * (dims + 1) barycentric weights
  std::vector<std::uint32_t> neighbors_; // (dims + 1) * vertices * 2; vertices_ == absent
};

}  // namespace pmask
