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


#include "pmask/config.hpp"

#include <set>
#include <sstream>

#include <toml.hpp>

#include "pmask/errors.hpp"

namespace pmask {

namespace fs = std::filesystem;

namespace {

/// Reads keys out of one table and remembers which were consumed.
class Section {
 public:
  Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

  bool present() const { return t_ != nullptr; }

  template <class T>
  void get(const char* key, T& dst) {
    if (!t_) return;
    const toml::node* n = t_->get(key);
    if (!n) return;
    seen_.insert(key);
    if constexpr (std::is_same_v<T, bool>) {
      auto v = n->value<bool>();
      if (!v) fail(key, "a boolean");
      dst = *v;
    } else if constexpr (std::is_integral_v<T>) {
      auto v = n->value<std::int64_t>();
      if (!v || !n->is_integer()) fail(key, "an integer");
      if (*v < 0 && std::is_unsigned_v<T>) fail(key, "a non-negative integer");
      dst = static_cast<T>(*v);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!n->is_number()) fail(key, "a number");
      dst = *n->value<double>();
    } else {
      auto v = n->value<std::string>();
      if (!v) fail(key, "a string");
      dst = *v;
    }
  }

  void get_scales(const char* key, std::vector<double>& dst) {
    if (!t_) return;
    const toml::node* n = t_->get(key);
    if (!n) return;
    seen_.insert(key);
    const auto* arr = n->as_array();
    if (!arr) fail(key, "an array of numbers");
    dst.clear();
    for (const auto& e : *arr) {
      if (!e.is_number()) fail(key, "an array of numbers");
      dst.push_back(*e.value<double>());
    }
  }

  void get_path(const char* key, std::optional<fs::path>& dst, const fs::path& base) {
    std::string s;
    if (!t_ || !t_->get(key)) return;
    get(key, s);
    fs::path p(s);
    dst = p.is_absolute() || base.empty() ? p : base / p;
  }

  /// Subtables allowed under this section.
  void allow_table(const char* key) { seen_.insert(key); }

  void finish() const {
    if (!t_) return;
    for (const auto& [k, _] : *t_) {
      if (!seen_.count(std::string(k.str()))) {
        throw ValidationError("unknown config key '" + qualified(std::string(k.str())) + "'");
      }
    }
  }

  const toml::table* sub(const char* key) const {
    if (!t_) return nullptr;
    const toml::node* n = t_->get(key);
    if (!n) return nullptr;
    if (!n->is_table()) throw ValidationError("config key '" + qualified(key) + "' must be a table");
    return n->as_table();
  }

 private:
  std::string qualified(const std::string& key) const {
    return name_.empty() ? key : name_ + "." + key;
  }

  [[noreturn]] void fail(const char* key, const char* what) const {
    throw ValidationError("config key '" + qualified(key) + "' must be " + what);
  }

  const toml::table* t_;
  std::string name_;
  std::set<std::string> seen_;
};

void read_crf(Section& s, CrfParams& p) {
  s.get("iterations", p.iterations);
  s.get("w1", p.appearance.weight);
  s.get("theta_alpha", p.appearance.spatial_sigma);
  s.get("theta_beta", p.appearance.color_sigma);
  s.get("w2", p.smoothness.weight);
  s.get("theta_gamma", p.smoothness.spatial_sigma);
  s.get("unary_eps", p.unary_eps);
  s.finish();
}

}  // namespace

void RunConfig::validate() const {
  if (num_classes < 2 || num_classes > 255) throw ValidationError("num_classes must lie in [2, 255]");
  crf.validate();
  gen.validate();
  if (!(base_alpha >= 0.0)) throw ValidationError("gen.base_alpha must be >= 0");
  pus.validate();
  multicrop.validate();
  cycle.validate();
}

RunConfig parse_run_config(const std::string& text, const fs::path& base) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config: " << e.description() << " at line " << e.source().begin.line;
    throw FormatError(msg.str());
  }
  RunConfig cfg;
  Section top(&root, "");
  top.get("num_classes", cfg.num_classes);
  for (const char* t : {"crf", "gen", "pus", "multicrop", "cycle", "paths"}) top.allow_table(t);
  top.finish();

  Section crf(top.sub("crf"), "crf");
  read_crf(crf, cfg.crf);
  cfg.gen.crf = cfg.crf;

  Section gen(top.sub("gen"), "gen");
  gen.get("alpha", cfg.gen.alpha);
  gen.get("base_alpha", cfg.base_alpha);
  gen.get("fg_threshold", cfg.gen.fg_threshold);
  std::string tie = "lowest-class-id";
  gen.get("tie_break", tie);
  if (tie != "lowest-class-id") {
    throw ValidationError("gen.tie_break must be \"lowest-class-id\"");
  }
  gen.allow_table("cvs");
  gen.allow_table("crf");
  gen.finish();
  Section cvs(gen.sub("cvs"), "gen.cvs");
  cvs.get("t", cfg.gen.cvs.t);
  cvs.get("s", cfg.gen.cvs.s);
  cvs.get("exponent_floor", cfg.gen.cvs.exponent_floor);
  cvs.finish();
  Section gcrf(gen.sub("crf"), "gen.crf");
  read_crf(gcrf, cfg.gen.crf);

  Section pus(top.sub("pus"), "pus");
  std::string mode(pus_mode_name(cfg.pus.mode));
  pus.get("mode", mode);
  cfg.pus.mode = parse_pus_mode(mode);
  pus.get("beta", cfg.pus.beta);
  cfg.pus.kappa = cfg.pus.beta;
  pus.get("kappa", cfg.pus.kappa);
  pus.finish();

  Section mc(top.sub("multicrop"), "multicrop");
  mc.get_scales("scales", cfg.multicrop.scales);
  mc.get("crop_size", cfg.multicrop.crop_size);
  mc.get("stride", cfg.multicrop.stride);
  mc.get("fg_cover_frac", cfg.multicrop.fg_cover_frac);
  mc.get("crop_area_frac", cfg.multicrop.crop_area_frac);
  mc.finish();

  Section cy(top.sub("cycle"), "cycle");
  cy.get("max_rounds", cfg.cycle.max_rounds);
  cy.get("eps", cfg.cycle.eps);
  std::string policy = "validation";
  cy.get("policy", policy);
  if (policy == "validation") cfg.cycle.policy = UpdatePolicy::kValidation;
  else if (policy == "fixed") cfg.cycle.policy = UpdatePolicy::kFixed;
  else throw ValidationError("cycle.policy must be \"validation\" or \"fixed\"");
  cy.finish();
  cfg.cycle.num_classes = static_cast<std::size_t>(cfg.num_classes);

  Section paths(top.sub("paths"), "paths");
  auto& p = cfg.paths;
  paths.get_path("cams", p.cams, base);
  paths.get_path("images", p.images, base);
  paths.get_path("masks", p.masks, base);
  paths.get_path("gt", p.gt, base);
  paths.get_path("out", p.out, base);
  paths.get_path("work_dir", p.work_dir, base);
  paths.get_path("train_images", p.train_images, base);
  paths.get_path("val_images", p.val_images, base);
  paths.get_path("val_gt", p.val_gt, base);
  std::string pred;
  if (paths.present() && top.sub("paths")->get("predictor")) {
    paths.get("predictor", pred);
    p.predictor = pred;
  }
  paths.finish();

  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  const std::string text = read_file(path);
  return parse_run_config(text, fs::absolute(path).parent_path());
}

std::string dump_run_config(const RunConfig& cfg) {
  auto crf_table = [](const CrfParams& p) {
    return toml::table{{"iterations", p.iterations},
                       {"w1", p.appearance.weight},
                       {"theta_alpha", p.appearance.spatial_sigma},
                       {"theta_beta", p.appearance.color_sigma},
                       {"w2", p.smoothness.weight},
                       {"theta_gamma", p.smoothness.spatial_sigma},
                       {"unary_eps", p.unary_eps}};
  };
  toml::array scales;
  for (double s : cfg.multicrop.scales) scales.push_back(s);
  toml::table root{
      {"num_classes", cfg.num_classes},
      {"crf", crf_table(cfg.crf)},
      {"gen",
       toml::table{{"alpha", cfg.gen.alpha},
                   {"base_alpha", cfg.base_alpha},
                   {"fg_threshold", cfg.gen.fg_threshold},
                   {"tie_break", "lowest-class-id"},
                   {"cvs", toml::table{{"t", cfg.gen.cvs.t},
                                       {"s", cfg.gen.cvs.s},
                                       {"exponent_floor", cfg.gen.cvs.exponent_floor}}},
                   {"crf", crf_table(cfg.gen.crf)}}},
      {"pus", toml::table{{"mode", std::string(pus_mode_name(cfg.pus.mode))},
                          {"beta", cfg.pus.beta},
                          {"kappa", cfg.pus.kappa}}},
      {"multicrop", toml::table{{"scales", scales},
                                {"crop_size", static_cast<std::int64_t>(cfg.multicrop.crop_size)},
                                {"stride", static_cast<std::int64_t>(cfg.multicrop.stride)},
                                {"fg_cover_frac", cfg.multicrop.fg_cover_frac},
                                {"crop_area_frac", cfg.multicrop.crop_area_frac}}},
      {"cycle", toml::table{{"max_rounds", cfg.cycle.max_rounds},
                            {"eps", cfg.cycle.eps},
                            {"policy", cfg.cycle.policy == UpdatePolicy::kFixed ? "fixed"
                                                                                : "validation"}}}};
  std::ostringstream out;
  out << root << "\n";
  return out.str();
}

}  // namespace pmask
