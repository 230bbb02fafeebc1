// Copyright 2026 The FedFair Authors
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
#include <atomic>
#include <cassert>
#include <cstdlib>
#include <cstring>

#include "fedfair/kernels/kernels.hpp"

namespace fedfair::kernels {
namespace {

std::atomic<int> g_active{-1};

Isa initial_isa() {
  const char* env = std::getenv("FEDFAIR_SIMD");
  if (env != nullptr && std::strcmp(env, "scalar") == 0) return Isa::kScalar;
  return detect_isa();
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("popcnt");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(__aarch64__) || defined(_M_ARM64)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa detect_isa() {
  if (isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  if (isa_supported(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

Isa active_isa() {
  int v = g_active.load(std::memory_order_relaxed);
  if (v < 0) {
    v = static_cast<int>(initial_isa());
    int expected = -1;
    if (!g_active.compare_exchange_strong(expected, v)) v = expected;
  }
  return static_cast<Isa>(v);
}

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) isa = Isa::kScalar;
  g_active.store(static_cast<int>(isa), std::memory_order_relaxed);
}

void axpy(std::span<float> y, std::span<const float> x, float w) {
  assert(y.size() == x.size());
  switch (active_isa()) {
    case Isa::kAvx2:
      avx2::axpy(y.data(), x.data(), w, y.size());
      return;
    case Isa::kNeon:
      neon::axpy(y.data(), x.data(), w, y.size());
      return;
    case Isa::kScalar:
      break;
  }
  scalar::axpy(y.data(), x.data(), w, y.size());
}

namespace {

using CountFn = std::size_t (*)(const float*, const float*, float, std::size_t);

CountFn count_fn() {
  switch (active_isa()) {
    case Isa::kAvx2:
      return &avx2::count_diff_ge;
    case Isa::kNeon:
      return &neon::count_diff_ge;
    case Isa::kScalar:
      break;
  }
  return &scalar::count_diff_ge;
}

}  // namespace

std::size_t count_diff_ge(std::span<const float> a, std::span<const float> b,
                          float threshold) {
  assert(a.size() == b.size());
  return count_fn()(a.data(), b.data(), threshold, a.size());
}

std::size_t count_diff_ge_capped(std::span<const float> a,
                                 std::span<const float> b, float threshold,
                                 std::size_t limit) {
  assert(a.size() == b.size());
  const CountFn fn = count_fn();
  std::size_t count = 0;
  for (std::size_t j = 0; j < a.size() && count < limit; j += kCapBlock) {
    const std::size_t len = std::min(kCapBlock, a.size() - j);
    count += fn(a.data() + j, b.data() + j, threshold, len);
  }
  return count;
}

}  // namespace fedfair::kernels
