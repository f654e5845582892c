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

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmask/simd/kernels.hpp"

namespace pmask::simd {
namespace {

void accumulate_gaussian_ref(std::size_t n, std::size_t dims, const double* const* features,
                             const double* center, double weight, double* out) {
  for (std::size_t j = 0; j < n; ++j) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const double diff = features[d][j] - center[d];
      d2 += diff * diff;
    }
    out[j] += weight * std::exp(-0.5 * d2);
  }
}

double dot_ref(std::size_t n, const double* a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_ref(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void blur_combine_ref(std::size_t n, const double* center, const double* left,
                      const double* right, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = center[i] + 0.5 * (left[i] + right[i]);
}

void softmax_neg_ref(std::size_t labels, std::size_t n, const double* energy, double* q) {
  for (std::size_t i = 0; i < n; ++i) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < labels; ++l) hi = std::max(hi, -energy[l * n + i]);
    double total = 0.0;
    for (std::size_t l = 0; l < labels; ++l) {
      const double e = std::exp(-energy[l * n + i] - hi);
      q[l * n + i] = e;
      total += e;
    }
    const double inv = 1.0 / total;
    for (std::size_t l = 0; l < labels; ++l) q[l * n + i] *= inv;
  }
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{Isa::kScalar,       "scalar", accumulate_gaussian_ref, dot_ref,
                         axpy_ref,           blur_combine_ref, softmax_neg_ref};
  return k;
}

}  // namespace pmask::simd
