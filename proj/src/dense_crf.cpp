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

#include "pmask/dense_crf.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "pmask/errors.hpp"
#include "pmask/permutohedral.hpp"
#include "pmask/simd/kernels.hpp"

namespace pmask {

void CrfParams::validate() const {
  if (iterations < 0) throw ValidationError("crf.iterations must be >= 0");
  if (appearance.weight < 0.0 || smoothness.weight < 0.0) {
    throw ValidationError("crf kernel weights must be >= 0");
  }
  if (!(appearance.spatial_sigma > 0.0) || !(appearance.color_sigma > 0.0) ||
      !(smoothness.spatial_sigma > 0.0)) {
    throw ValidationError("crf kernel sigmas must be > 0");
  }
  if (!(unary_eps > 0.0 && unary_eps <= 1.0)) throw ValidationError("crf.unary_eps must lie in (0, 1]");
}

void CrfProblem::validate() const {
  if (unary_probs.channels() == 0 || unary_probs.plane_size() == 0) {
    throw ValidationError("CRF problem needs at least one label and one pixel");
  }
  if (image.height != unary_probs.height() || image.width != unary_probs.width()) {
    throw ValidationError("CRF image and scores differ in size");
  }
  for (double v : unary_probs.values()) {
    if (!std::isfinite(v)) throw ValidationError("CRF scores must be finite");
  }
}

Grid<int> Posterior::argmax() const {
  Grid<int> out(q.height(), q.width(), 0);
  const std::size_t n = q.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    double best = q.plane(0)[i];
    for (std::size_t l = 1; l < q.channels(); ++l) {
      const double v = q.plane(l)[i];
      if (v > best) {
        best = v;
        out[i] = static_cast<int>(l);
      }
    }
  }
  return out;
}

Volume<double> build_unary(const Volume<double>& probs, double eps) {
  Volume<double> u = probs;
  for (double& v : u.values()) v = -std::log(std::clamp(v, eps, 1.0));
  return u;
}

namespace {

// Writes m[l][i] = sum_{j != i} k(i, j) q[l][j] for the combined kernel.
using MessageFn = std::function<void(const Volume<double>& q, Volume<double>& msg)>;

Posterior run_mean_field(const CrfProblem& p, const CrfParams& params, const MessageFn& messages) {
  const auto& kern = simd::active_kernels();
  const Volume<double> unary = build_unary(p.unary_probs, params.unary_eps);
  const std::size_t labels = unary.channels();
  const std::size_t n = unary.plane_size();

  Posterior post{Volume<double>(labels, unary.height(), unary.width())};
  kern.softmax_neg(labels, n, unary.storage().data(), post.q.storage().data());

  const bool pairwise = params.appearance.weight > 0.0 || params.smoothness.weight > 0.0;
  if (!pairwise || n == 1) return post;

  Volume<double> msg(labels, unary.height(), unary.width());
  Volume<double> energy(labels, unary.height(), unary.width());
  for (int it = 0; it < params.iterations; ++it) {
    messages(post.q, msg);
    // Potts: sum_{l' != l} m(l') = M - m(l); the per-pixel constant M cancels
    // in the normalization.
    const auto& u = unary.storage();
    const auto& m = msg.storage();
    auto& e = energy.storage();
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = u[i] - m[i];
    kern.softmax_neg(labels, n, e.data(), post.q.storage().data());
  }
  return post;
}

struct ScaledFeatures {
  std::vector<double> appearance;  // 5 planes of n
  std::vector<double> smoothness;  // 2 planes of n
};

ScaledFeatures scaled_features(const CrfProblem& p, const CrfParams& params) {
  const std::size_t h = p.image.height, w = p.image.width, n = h * w;
  ScaledFeatures f{std::vector<double>(5 * n), std::vector<double>(2 * n)};
  const double sa = params.appearance.spatial_sigma;
  const double sb = params.appearance.color_sigma;
  const double sg = params.smoothness.spatial_sigma;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      f.appearance[0 * n + i] = static_cast<double>(x) / sa;
      f.appearance[1 * n + i] = static_cast<double>(y) / sa;
      for (std::size_t c = 0; c < 3; ++c) {
        f.appearance[(2 + c) * n + i] = static_cast<double>(p.image.at(y, x, c)) / sb;
      }
      f.smoothness[0 * n + i] = static_cast<double>(x) / sg;
      f.smoothness[1 * n + i] = static_cast<double>(y) / sg;
    }
  }
  return f;
}

}  // namespace

Posterior mean_field_exact(const CrfProblem& p, const CrfParams& params) {
  p.validate();
  params.validate();
  const std::size_t n = p.pixels();
  if (n > kExactMaxPixels) {
    throw SizeError("exact CRF backend limited to " + std::to_string(kExactMaxPixels) +
                    " pixels, got " + std::to_string(n));
  }
  const ScaledFeatures f = scaled_features(p, params);
  const double* app[5];
  const double* smo[2];
  for (std::size_t d = 0; d < 5; ++d) app[d] = f.appearance.data() + d * n;
  for (std::size_t d = 0; d < 2; ++d) smo[d] = f.smoothness.data() + d * n;
  const double w1 = params.appearance.weight;
  const double w2 = params.smoothness.weight;

  std::vector<double> row(n);
  return run_mean_field(p, params, [&](const Volume<double>& q, Volume<double>& msg) {
    const auto& kern = simd::active_kernels();
    double center[5];
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(row.begin(), row.end(), 0.0);
      if (w1 > 0.0) {
        for (std::size_t d = 0; d < 5; ++d) center[d] = app[d][i];
        kern.accumulate_gaussian(n, 5, app, center, w1, row.data());
      }
      if (w2 > 0.0) {
        for (std::size_t d = 0; d < 2; ++d) center[d] = smo[d][i];
        kern.accumulate_gaussian(n, 2, smo, center, w2, row.data());
      }
      row[i] = 0.0;
      for (std::size_t l = 0; l < q.channels(); ++l) {
        msg.plane(l)[i] = kern.dot(n, row.data(), q.plane(l).data());
      }
    }
  });
}

namespace {

// out += weight * (G * plane), G the 2-D Gaussian of std sigma (pixels),
// evaluated separably and truncated at 8 sigma. The self term is included.
void gaussian_blur_accumulate(std::span<const double> plane, std::size_t h, std::size_t w,
                              double sigma, double weight, std::span<double> out,
                              std::vector<double>& tmp) {
  const auto& kern = simd::active_kernels();
  const auto reach = static_cast<std::ptrdiff_t>(std::ceil(8.0 * sigma));
  const std::ptrdiff_t rx = std::min<std::ptrdiff_t>(reach, static_cast<std::ptrdiff_t>(w) - 1);
  const std::ptrdiff_t ry = std::min<std::ptrdiff_t>(reach, static_cast<std::ptrdiff_t>(h) - 1);
  const std::ptrdiff_t r = std::max(rx, ry);
  std::vector<double> taps(2 * r + 1);
  for (std::ptrdiff_t t = -r; t <= r; ++t) {
    taps[t + r] = std::exp(-0.5 * static_cast<double>(t * t) / (sigma * sigma));
  }
  tmp.assign(h * w, 0.0);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const auto H = static_cast<std::ptrdiff_t>(h);
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    const double* src = plane.data() + y * W;
    double* dst = tmp.data() + y * W;
    for (std::ptrdiff_t t = -rx; t <= rx; ++t) {
      const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -t);
      const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(W, W - t);
      if (x1 > x0) kern.axpy(static_cast<std::size_t>(x1 - x0), taps[t + r], src + x0 + t, dst + x0);
    }
  }
  for (std::ptrdiff_t y = 0; y < H; ++y) {
    double* dst = out.data() + y * W;
    for (std::ptrdiff_t t = -ry; t <= ry; ++t) {
      const std::ptrdiff_t yy = y + t;
      if (yy < 0 || yy >= H) continue;
      kern.axpy(w, weight * taps[t + r], tmp.data() + yy * W, dst);
    }
  }
}

}  // namespace

Posterior mean_field_fast(const CrfProblem& p, const CrfParams& params) {
  p.validate();
  params.validate();
  const std::size_t h = p.image.height, w = p.image.width, n = h * w;
  const std::size_t labels = p.labels();
  const double w1 = params.appearance.weight;
  const double w2 = params.smoothness.weight;
  if ((w1 == 0.0 && w2 == 0.0) || params.iterations == 0 || n == 1) {
    return run_mean_field(p, params, {});
  }

  const ScaledFeatures f = scaled_features(p, params);
  std::vector<double> rows(n * 5);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < 5; ++d) rows[i * 5 + d] = f.appearance[d * n + i];
  }
  std::optional<PermutohedralLattice> lattice;
  double gain = 1.0;
  if (w1 > 0.0) {
    lattice.emplace(rows, 5, n);
    // The lattice response is proportional to the Gaussian sum only up to a
    // global factor. Fit that factor against exact sums at probe pixels.
    const std::vector<double> ones(n, 1.0);
    std::vector<double> response(n);
    lattice->filter(ones, 1, response);
    const std::size_t probes = std::min<std::size_t>(n, 256);
    const double* app[5];
    for (std::size_t d = 0; d < 5; ++d) app[d] = f.appearance.data() + d * n;
    const auto& kern = simd::active_kernels();
    std::vector<double> row(n);
    double exact_total = 0.0, lattice_total = 0.0;
    for (std::size_t k = 0; k < probes; ++k) {
      const std::size_t i = (k * n) / probes;
      double center[5];
      for (std::size_t d = 0; d < 5; ++d) center[d] = app[d][i];
      std::fill(row.begin(), row.end(), 0.0);
      kern.accumulate_gaussian(n, 5, app, center, 1.0, row.data());
      exact_total += kern.dot(n, row.data(), ones.data());
      lattice_total += response[i];
    }
    gain = lattice_total > 0.0 ? exact_total / lattice_total : 0.0;
  }

  std::vector<double> packed(n * labels), filtered(n * labels), tmp;
  return run_mean_field(p, params, [&](const Volume<double>& q, Volume<double>& msg) {
    std::fill(msg.storage().begin(), msg.storage().end(), 0.0);
    if (w2 > 0.0) {
      for (std::size_t l = 0; l < labels; ++l) {
        gaussian_blur_accumulate(q.plane(l), h, w, params.smoothness.spatial_sigma, w2,
                                 msg.plane(l), tmp);
      }
    }
    if (lattice) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < labels; ++l) packed[i * labels + l] = q.plane(l)[i];
      }
      lattice->filter(packed, labels, filtered);
      for (std::size_t l = 0; l < labels; ++l) {
        auto m = msg.plane(l);
        for (std::size_t i = 0; i < n; ++i) m[i] += w1 * gain * filtered[i * labels + l];
      }
    }
    // Remove the self contribution k(i, i) = w1 + w2.
    for (std::size_t l = 0; l < labels; ++l) {
      auto m = msg.plane(l);
      auto ql = q.plane(l);
      for (std::size_t i = 0; i < n; ++i) m[i] -= (w1 + w2) * ql[i];
    }
  });
}

Posterior crf_refine(const RgbImage& image, const Volume<double>& scores, const CrfParams& params,
                     bool strict) {
  CrfProblem p{scores, image};
  if (strict && p.pixels() <= kExactMaxPixels) return mean_field_exact(p, params);
  return mean_field_fast(p, params);
}

}  // namespace pmask
