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

#include <atomic>
#include <cstdlib>
#include <string>

#include "pmask/simd/kernels.hpp"

namespace pmask::simd {

#if defined(PMASK_HAVE_AVX2)
extern const Kernels kAvx2Kernels;
#endif

namespace {

bool cpu_has_avx2() {
#if defined(PMASK_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels* initial_choice() {
  const Kernels* best = avx2_kernels();
  if (const char* env = std::getenv("PMASK_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && best) return best;
  }
  return best ? best : &scalar_kernels();
}

std::atomic<const Kernels*>& active_slot() {
  static std::atomic<const Kernels*> slot{initial_choice()};
  return slot;
}

}  // namespace

const Kernels* avx2_kernels() {
#if defined(PMASK_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &kAvx2Kernels : nullptr;
#else
  return nullptr;
#endif
}

std::vector<const Kernels*> available_kernels() {
  std::vector<const Kernels*> out{&scalar_kernels()};
  if (const Kernels* k = avx2_kernels()) out.push_back(k);
  return out;
}

const Kernels& active_kernels() { return *active_slot().load(std::memory_order_acquire); }

bool select_isa(Isa isa) {
  const Kernels* k = isa == Isa::kScalar ? &scalar_kernels() : avx2_kernels();
  if (!k) return false;
  active_slot().store(k, std::memory_order_release);
  return true;
}

std::string_view isa_name(Isa isa) { return isa == Isa::kScalar ? "scalar" : "avx2"; }

}  // namespace pmask::simd
