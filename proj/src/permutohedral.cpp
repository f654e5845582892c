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

#include "pmask/permutohedral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "pmask/simd/kernels.hpp"

namespace pmask {
namespace {

// Open-addressing table from integer lattice keys to dense vertex indices.
class KeyTable {
 public:
  KeyTable(std::size_t key_size, std::size_t expected)
      : key_size_(key_size), slots_(std::bit_ceil(std::max<std::size_t>(16, expected * 2)), kEmpty) {
    keys_.reserve(expected * key_size);
  }

  std::size_t size() const { return keys_.size() / key_size_; }
  const std::int32_t* key(std::size_t i) const { return keys_.data() + i * key_size_; }

  /// Index of `k`, inserting it when `create` is set; kEmpty if absent.
  std::uint32_t find(const std::int32_t* k, bool create) {
    if (create && size() * 2 >= slots_.size()) grow();
    std::size_t h = hash(k) & (slots_.size() - 1);
    while (true) {
      const std::uint32_t idx = slots_[h];
      if (idx == kEmpty) {
        if (!create) return kEmpty;
        const auto fresh = static_cast<std::uint32_t>(size());
        keys_.insert(keys_.end(), k, k + key_size_);
        slots_[h] = fresh;
        return fresh;
      }
      if (std::equal(k, k + key_size_, key(idx))) return idx;
      h = (h + 1) & (slots_.size() - 1);
    }
  }

  static constexpr std::uint32_t kEmpty = 0xffffffffu;

 private:
  std::size_t hash(const std::int32_t* k) const {
    std::size_t h = 0;
    for (std::size_t i = 0; i < key_size_; ++i) {
      h += static_cast<std::size_t>(static_cast<std::uint32_t>(k[i]));
      h *= 2531011u;
    }
    return h ^ (h >> 29);
  }

  void grow() {
    std::vector<std::uint32_t> fresh(slots_.size() * 2, kEmpty);
    for (std::size_t i = 0; i < size(); ++i) {
      std::size_t h = hash(key(i)) & (fresh.size() - 1);
      while (fresh[h] != kEmpty) h = (h + 1) & (fresh.size() - 1);
      fresh[h] = static_cast<std::uint32_t>(i);
    }
    slots_.swap(fresh);
  }

  std::size_t key_size_;
  std::vector<std::uint32_t> slots_;
  std::vector<std::int32_t> keys_;
};

}  // namespace

PermutohedralLattice::PermutohedralLattice(std::span<const double> features, std::size_t dims,
                                           std::size_t n)
    : dims_(dims), n_(n) {
  if (dims == 0) throw std::invalid_argument("lattice needs at least one feature dimension");
  if (features.size() != dims * n) throw std::invalid_argument("feature array size mismatch");
  const std::size_t d = dims;
  const int d1 = static_cast<int>(d + 1);

  // Embedding onto the hyperplane sum(x) = 0, scaled so the lattice blur
  // approximates a unit-variance Gaussian in feature units.
  const double inv_std = std::sqrt(2.0 / 3.0) * static_cast<double>(d + 1);
  std::vector<double> scale(d);
  for (std::size_t i = 0; i < d; ++i) {
    scale[i] = inv_std / std::sqrt(static_cast<double>((i + 1) * (i + 2)));
  }
  // canonical[r * (d+1) + j]: coordinates of the remainder-r simplex vertex.
  std::vector<int> canonical((d + 1) * (d + 1));
  for (int r = 0; r <= static_cast<int>(d); ++r) {
    for (int j = 0; j <= static_cast<int>(d) - r; ++j) canonical[r * d1 + j] = r;
    for (int j = static_cast<int>(d) - r + 1; j <= static_cast<int>(d); ++j) {
      canonical[r * d1 + j] = r - d1;
    }
  }

  KeyTable table(d, n * (d + 1));
  offsets_.resize(n * (d + 1));
  weights_.resize(n * (d + 1));
  std::vector<double> elevated(d + 1);
  std::vector<int> rem0(d + 1), rank(d + 1);
  std::vector<double> bary(d + 2);
  std::vector<std::int32_t> key(d);

  for (std::size_t k = 0; k < n; ++k) {
    const double* f = features.data() + k * d;
    double sm = 0.0;
    for (std::size_t j = d; j > 0; --j) {
      const double cf = f[j - 1] * scale[j - 1];
      elevated[j] = sm - static_cast<double>(j) * cf;
      sm += cf;
    }
    elevated[0] = sm;

    // Nearest remainder-0 lattice point.
    int sum = 0;
    for (std::size_t i = 0; i <= d; ++i) {
      const int rd = static_cast<int>(std::round(elevated[i] / d1));
      rem0[i] = rd * d1;
      sum += rd;
    }
    // Rank of each coordinate of the residual, descending.
    std::fill(rank.begin(), rank.end(), 0);
    for (std::size_t i = 0; i < d; ++i) {
      const double di = elevated[i] - rem0[i];
      for (std::size_t j = i + 1; j <= d; ++j) {
        if (di < elevated[j] - rem0[j]) ++rank[i]; else ++rank[j];
      }
    }
    // Project back onto the plane if rounding left it.
    for (std::size_t i = 0; i <= d; ++i) {
      rank[i] += sum;
      if (rank[i] < 0) {
        rank[i] += d1;
        rem0[i] += d1;
      } else if (rank[i] > static_cast<int>(d)) {
        rank[i] -= d1;
        rem0[i] -= d1;
      }
    }
    std::fill(bary.begin(), bary.end(), 0.0);
    for (std::size_t i = 0; i <= d; ++i) {
      const double v = (elevated[i] - rem0[i]) / d1;
      bary[d - rank[i]] += v;
      bary[d - rank[i] + 1] -= v;
    }
    bary[0] += 1.0 + bary[d + 1];

    for (std::size_t r = 0; r <= d; ++r) {
      for (std::size_t i = 0; i < d; ++i) key[i] = rem0[i] + canonical[r * d1 + rank[i]];
      offsets_[k * (d + 1) + r] = table.find(key.data(), true);
      weights_[k * (d + 1) + r] = bary[r];
    }
  }

  vertices_ = table.size();
  const auto absent = static_cast<std::uint32_t>(vertices_);
  neighbors_.assign((d + 1) * vertices_ * 2, absent);
  std::vector<std::int32_t> n1(d + 1), n2(d + 1);
  for (std::size_t j = 0; j <= d; ++j) {
    for (std::size_t i = 0; i < vertices_; ++i) {
      const std::int32_t* kk = table.key(i);
      for (std::size_t q = 0; q < d; ++q) {
        n1[q] = kk[q] - 1;
        n2[q] = kk[q] + 1;
      }
      if (j < d) {
        n1[j] = kk[j] + static_cast<std::int32_t>(d);
        n2[j] = kk[j] - static_cast<std::int32_t>(d);
      }
      const std::uint32_t a = table.find(n1.data(), false);
      const std::uint32_t b = table.find(n2.data(), false);
      neighbors_[(j * vertices_ + i) * 2 + 0] = a == KeyTable::kEmpty ? absent : a;
      neighbors_[(j * vertices_ + i) * 2 + 1] = b == KeyTable::kEmpty ? absent : b;
    }
  }
}

void PermutohedralLattice::filter(std::span<const double> in, std::size_t value_dims,
                                  std::span<double> out) const {
  if (in.size() != n_ * value_dims || out.size() != n_ * value_dims) {
    throw std::invalid_argument("lattice filter size mismatch");
  }
  const auto& kern = simd::active_kernels();
  const std::size_t d1 = dims_ + 1;
  const std::size_t vd = value_dims;
  // One extra zero row stands in for absent neighbors.
  std::vector<double> values((vertices_ + 1) * vd, 0.0);
  std::vector<double> scratch((vertices_ + 1) * vd, 0.0);

  for (std::size_t k = 0; k < n_; ++k) {
    const double* src = in.data() + k * vd;
    for (std::size_t r = 0; r < d1; ++r) {
      kern.axpy(vd, weights_[k * d1 + r], src, values.data() + offsets_[k * d1 + r] * vd);
    }
  }

  for (std::size_t j = 0; j < d1; ++j) {
    const std::uint32_t* nb = neighbors_.data() + j * vertices_ * 2;
    for (std::size_t i = 0; i < vertices_; ++i) {
      kern.blur_combine(vd, values.data() + i * vd, values.data() + nb[2 * i] * vd,
                        values.data() + nb[2 * i + 1] * vd, scratch.data() + i * vd);
    }
    values.swap(scratch);
  }

  for (std::size_t k = 0; k < n_; ++k) {
    double* dst = out.data() + k * vd;
    std::fill(dst, dst + vd, 0.0);
    for (std::size_t r = 0; r < d1; ++r) {
      kern.axpy(vd, weights_[k * d1 + r], values.data() + offsets_[k * d1 + r] * vd, dst);
    }
  }
}

}  // namespace pmask
