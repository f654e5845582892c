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
#include <string_view>
#include <vector>

namespace pmask::simd {

enum class Isa { kScalar, kAvx2 };

/// Table of data-parallel inner loops. Every entry has a scalar reference
/// implementation; vector variants must agree with it to rounding.
struct Kernels {
  Isa isa;
  const char* name;

  /// out[j] += weight * exp(-0.5 * sum_d (features[d][j] - center[d])^2)
  void (*accumulate_gaussian)(std::size_t n, std::size_t dims, const double* const* features,
                              const double* center, double weight, double* out);

  double (*dot)(std::size_t n, const double* a, const double* b);

  /// y += a * x
  void (*axpy)(std::size_t n, double a, const double* x, double* y);

  /// out = center + 0.5 * (left + right)
  void (*blur_combine)(std::size_t n, const double* center, const double* left,
                       const double* right, double* out);

  /// Per-column softmax of the negated energies. `energy` and `q` hold
  /// `labels` planes of n values each.
  void (*softmax_neg)(std::size_t labels, std::size_t n, const double* energy, double* q);
};

const Kernels& scalar_kernels();

/// Null when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const Kernels* avx2_kernels();

/// Every kernel table usable on this machine, scalar first.
std::vector<const Kernels*> available_kernels();

/// The table selected at first use: the widest supported ISA, unless the
/// PMASK_SIMD environment variable names one ("scalar", "avx2").
const Kernels& active_kernels();

/// Overrides the runtime choice. Returns false if the ISA is unavailable.
bool select_isa(Isa isa);

std::string_view isa_name(Isa isa);

}  // namespace pmask::simd
