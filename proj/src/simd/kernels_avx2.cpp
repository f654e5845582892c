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

// Compiled with -mavx2 -mfma. Nothing here may run before the dispatcher has
// confirmed CPU support.
#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmask/simd/kernels.hpp"

namespace pmask::simd {
namespace {

// exp(x) for x <= 709, 4 lanes. Cody-Waite reduction to |r| <= ln2/2 and a
// degree-13 Taylor polynomial; below the normal range returns 0.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.39);
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(0.693145751953125), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212e-6), r);

  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  const __m128i ni = _mm256_cvtpd_epi32(n);
  __m256i bits = _mm256_add_epi64(_mm256_cvtepi32_epi64(ni), _mm256_set1_epi64x(1023));
  bits = _mm256_slli_epi64(bits, 52);
  const __m256d scaled = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
  return _mm256_andnot_pd(underflow, scaled);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void accumulate_gaussian_avx2(std::size_t n, std::size_t dims, const double* const* features,
                              const double* center, double weight, double* out) {
  const __m256d w = _mm256_set1_pd(weight);
  const __m256d mhalf = _mm256_set1_pd(-0.5);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d d2 = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dims; ++d) {
      const __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(features[d] + j), _mm256_set1_pd(center[d]));
      d2 = _mm256_fmadd_pd(diff, diff, d2);
    }
    const __m256d e = exp_pd(_mm256_mul_pd(mhalf, d2));
    _mm256_storeu_pd(out + j, _mm256_fmadd_pd(w, e, _mm256_loadu_pd(out + j)));
  }
  for (; j < n; ++j) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const double diff = features[d][j] - center[d];
      d2 += diff * diff;
    }
    out[j] += weight * std::exp(-0.5 * d2);
  }
}

double dot_avx2(std::size_t n, const double* a, const double* b) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void blur_combine_avx2(std::size_t n, const double* center, const double* left,
                       const double* right, double* out) {
  const __m256d half = _mm256_set1_pd(0.5);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d s = _mm256_add_pd(_mm256_loadu_pd(left + i), _mm256_loadu_pd(right + i));
    _mm256_storeu_pd(out + i, _mm256_fmadd_pd(half, s, _mm256_loadu_pd(center + i)));
  }
  for (; i < n; ++i) out[i] = center[i] + 0.5 * (left[i] + right[i]);
}

void softmax_neg_avx2(std::size_t labels, std::size_t n, const double* energy, double* q) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d hi = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    for (std::size_t l = 0; l < labels; ++l) {
      const __m256d neg = _mm256_sub_pd(_mm256_setzero_pd(), _mm256_loadu_pd(energy + l * n + i));
      hi = _mm256_max_pd(hi, neg);
    }
    __m256d total = _mm256_setzero_pd();
    for (std::size_t l = 0; l < labels; ++l) {
      const __m256d arg =
          _mm256_sub_pd(_mm256_sub_pd(_mm256_setzero_pd(), _mm256_loadu_pd(energy + l * n + i)), hi);
      const __m256d e = exp_pd(arg);
      _mm256_storeu_pd(q + l * n + i, e);
      total = _mm256_add_pd(total, e);
    }
    const __m256d inv = _mm256_div_pd(_mm256_set1_pd(1.0), total);
    for (std::size_t l = 0; l < labels; ++l) {
      _mm256_storeu_pd(q + l * n + i, _mm256_mul_pd(_mm256_loadu_pd(q + l * n + i), inv));
    }
  }
  for (; i < n; ++i) {
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

extern const Kernels kAvx2Kernels;
const Kernels kAvx2Kernels{Isa::kAvx2, "avx2",           accumulate_gaussian_avx2, dot_avx2,
                           axpy_avx2,  blur_combine_avx2, softmax_neg_avx2};

}  // namespace pmask::simd
