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


#include "pmask/pus.hpp"

#include <cmath>
#include <vector>

#include "pmask/errors.hpp"
#include "pmask/numeric.hpp"

namespace pmask {

LossMap::LossMap(Grid<double> v) : values(std::move(v)) {
  valid = Grid<std::uint8_t>(values.height(), values.width(), 1);
}

LossMap::LossMap(Grid<double> v, Grid<std::uint8_t> valid_mask)
    : values(std::move(v)), valid(std::move(valid_mask)) {}

LossMap LossMap::from_labels(Grid<double> v, const PseudoMask& labels) {
  Grid<std::uint8_t> ok(labels.height(), labels.width(), 0);
  for (std::size_t i = 0; i < ok.size(); ++i) ok[i] = labels.labels[i] != kIgnoreLabel;
  return LossMap(std::move(v), std::move(ok));
}

std::size_t LossMap::valid_count() const {
  std::size_t n = 0;
  for (auto b : valid.values()) n += b != 0;
  return n;
}

void LossMap::validate() const {
  if (values.height() != valid.height() || values.width() != valid.width()) {
    throw ValidationError("loss map and valid mask differ in shape");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!valid[i]) continue;
    if (!std::isfinite(values[i]) || values[i] < 0.0) {
      throw ValidationError("loss values must be finite and >= 0");
    }
  }
}

PusMode parse_pus_mode(std::string_view s) {
  if (s == "none") return PusMode::kNone;
  if (s == "clamp") return PusMode::kClamp;
  if (s == "pow") return PusMode::kPow;
  if (s == "ignore") return PusMode::kIgnore;
  throw ValidationError("unknown pus mode '" + std::string(s) + "'");
}

std::string_view pus_mode_name(PusMode m) {
  switch (m) {
    case PusMode::kNone: return "none";
    case PusMode::kClamp: return "clamp";
    case PusMode::kPow: return "pow";
    case PusMode::kIgnore: return "ignore";
  }
  return "none";
}

void PusConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("pus.beta must be >= 0");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ValidationError("pus.kappa must be > 0");
}

namespace {

template <class F>
LossMap map_valid(const LossMap& l, F f) {
  LossMap out(Grid<double>(l.values.height(), l.values.width(), 0.0), l.valid);
  for (std::size_t i = 0; i < l.values.size(); ++i) {
    if (l.valid[i]) out.values[i] = f(l.values[i]);
  }
  return out;
}

}  // namespace

LossMap pus_clamp(const LossMap& l, double kappa) {
  return map_valid(l, [kappa](double x) { return x < kappa ? x : kappa; });
}

LossMap pus_pow(const LossMap& l, double kappa) {
  return map_valid(l, [kappa](double x) { return std::pow(x, kappa); });
}

LossMap pus_ignore(const LossMap& l, double kappa) {
  return map_valid(l, [kappa](double x) { return x >= kappa ? 0.0 : x; });
}

LossMap pus_apply(const LossMap& l, PusMode mode, double kappa) {
  switch (mode) {
    case PusMode::kClamp: return pus_clamp(l, kappa);
    case PusMode::kPow: return pus_pow(l, kappa);
    case PusMode::kIgnore: return pus_ignore(l, kappa);
    case PusMode::kNone: break;
  }
  return map_valid(l, [](double x) { return x; });
}

double mean_valid(const LossMap& l) {
  std::vector<double> v;
  v.reserve(l.values.size());
  for (std::size_t i = 0; i < l.values.size(); ++i) {
    if (l.valid[i]) v.push_back(l.values[i]);
  }
  if (v.empty()) throw EmptyLoss("loss map has no valid pixel");
  return pairwise_mean(std::span<const double>(v));
}

PusResult pus_evaluate(const LossMap& l, const PusConfig& cfg) {
  cfg.validate();
  l.validate();
  PusResult r;
  r.plain_mean = mean_valid(l);
  r.loss = r.plain_mean;
  if (cfg.mode == PusMode::kNone || r.plain_mean >= cfg.beta) return r;
  r.gated = true;
  r.loss = mean_valid(pus_apply(l, cfg.mode, cfg.kappa));
  return r;
}

double pus_loss(const LossMap& l, const PusConfig& cfg) { return pus_evaluate(l, cfg).loss; }

}  // namespace pmask
