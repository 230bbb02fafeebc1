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

#pragma once

// Data-parallel inner loops of the Monte-Carlo engine.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2 (x86-64) or NEON (aarch64) variant. The vector variants
// are bit-identical to the scalar ones: all arithmetic is single-precision
// IEEE with no fused multiply-add, and counts are exact integers.

#include <cstddef>
#include <span>
#include <string_view>

namespace fedfair::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

/// Best ISA supported by the running CPU.
Isa detect_isa();

/// ISA currently used by the dispatching entry points. Defaults to
/// detect_isa(), or kScalar when FEDFAIR_SIMD=scalar is set in the
/// environment at first use.
Isa active_isa();

/// Force a specific ISA (tests and benchmarks). Requesting an ISA the CPU
/// does not support falls back to kScalar.
void set_active_isa(Isa isa);

bool isa_supported(Isa isa);

// y[j] += w * x[j]
void axpy(std::span<float> y, std::span<const float> x, float w);

// Number of j with a[j] - b[j] >= threshold.
std::size_t count_diff_ge(std::span<const float> a, std::span<const float> b,
                          float threshold);

/// Like count_diff_ge, but stops early once the running count reaches
/// `limit`; returns the count so far (which is then >= limit). Work is done
/// in fixed blocks so the early-exit point is ISA-independent.
std::size_t count_diff_ge_capped(std::span<const float> a,
                                 std::span<const float> b, float threshold,
                                 std::size_t limit);

namespace scalar {
void axpy(float* y, const float* x, float w, std::size_t n);
std::size_t count_diff_ge(const float* a, const float* b, float threshold,
                          std::size_t n);
}  // namespace scalar

namespace avx2 {
void axpy(float* y, const float* x, float w, std::size_t n);
std::size_t count_diff_ge(const float* a, const float* b, float threshold,
                          std::size_t n);
}  // namespace avx2

namespace neon {
void axpy(float* y, const float* x, float w, std::size_t n);
std::size_t count_diff_ge(const float* a, const float* b, float threshold,
                          std::size_t n);
}  // namespace neon

/// Block size used by count_diff_ge_capped between limit checks.
inline constexpr std::size_t kCapBlock = 64;

}  // namespace fedfair::kernels
