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

#include "fedfair/kernels/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define FEDFAIR_HAVE_X86 1
#else
#define FEDFAIR_HAVE_X86 0
#endif

namespace fedfair::kernels::avx2 {

#if FEDFAIR_HAVE_X86

// Compiled with a function-level target so the rest of the library keeps the
// baseline ISA; callers must check isa_supported(Isa::kAvx2) first.

__attribute__((target("avx2"))) void axpy(float* y, const float* x, float w,
                                          std::size_t n) {
  const __m256 wv = _mm256_set1_ps(w);
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    const __m256 xv = _mm256_loadu_ps(x + j);
    const __m256 yv = _mm256_loadu_ps(y + j);
    // mul then add, never fused, to match the scalar rounding
    const __m256 prod = _mm256_mul_ps(wv, xv);
    _mm256_storeu_ps(y + j, _mm256_add_ps(yv, prod));
  }
  scalar::axpy(y + j, x + j, w, n - j);
}

__attribute__((target("avx2,popcnt"))) std::size_t count_diff_ge(
    const float* a, const float* b, float threshold, std::size_t n) {
  const __m256 tv = _mm256_set1_ps(threshold);
  std::size_t count = 0;
  std::size_t j = 0;
  for (; j + 32 <= n; j += 32) {
    const __m256 d0 =
        _mm256_sub_ps(_mm256_loadu_ps(a + j), _mm256_loadu_ps(b + j));
    const __m256 d1 = _mm256_sub_ps(_mm256_loadu_ps(a + j + 8),
                                    _mm256_loadu_ps(b + j + 8));
    const __m256 d2 = _mm256_sub_ps(_mm256_loadu_ps(a + j + 16),
                                    _mm256_loadu_ps(b + j + 16));
    const __m256 d3 = _mm256_sub_ps(_mm256_loadu_ps(a + j + 24),
                                    _mm256_loadu_ps(b + j + 24));
    const unsigned m0 = static_cast<unsigned>(
        _mm256_movemask_ps(_mm256_cmp_ps(d0, tv, _CMP_GE_OQ)));
    const unsigned m1 = static_cast<unsigned>(
        _mm256_movemask_ps(_mm256_cmp_ps(d1, tv, _CMP_GE_OQ)));
    const unsigned m2 = static_cast<unsigned>(
        _mm256_movemask_ps(_mm256_cmp_ps(d2, tv, _CMP_GE_OQ)));
    const unsigned m3 = static_cast<unsigned>(
        _mm256_movemask_ps(_mm256_cmp_ps(d3, tv, _CMP_GE_OQ)));
    count += static_cast<std::size_t>(
        _mm_popcnt_u32(m0 | (m1 << 8) | (m2 << 16) | (m3 << 24)));
  }
  for (; j + 8 <= n; j += 8) {
    const __m256 d =
        _mm256_sub_ps(_mm256_loadu_ps(a + j), _mm256_loadu_ps(b + j));
    count += static_cast<std::size_t>(_mm_popcnt_u32(static_cast<unsigned>(
        _mm256_movemask_ps(_mm256_cmp_ps(d, tv, _CMP_GE_OQ)))));
  }
  return count + scalar::count_diff_ge(a + j, b + j, threshold, n - j);
}

#else

void axpy(float* y, const float* x, float w, std::size_t n) {
  scalar::axpy(y, x, w, n);
}

std::size_t count_diff_ge(const float* a, const float* b, float threshold,
                          std::size_t n) {
  return scalar::count_diff_ge(a, b, threshold, n);
}

#endif

}  // namespace fedfair::kernels::avx2
