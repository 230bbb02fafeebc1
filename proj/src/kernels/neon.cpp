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

#if defined(__aarch64__) || defined(_M_ARM64)
#include <arm_neon.h>
#define FEDFAIR_HAVE_NEON 1
#else
#define FEDFAIR_HAVE_NEON 0
#endif

namespace fedfair::kernels::neon {

#if FEDFAIR_HAVE_NEON

void axpy(float* y, const float* x, float w, std::size_t n) {
  const float32x4_t wv = vdupq_n_f32(w);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    // vmulq + vaddq, not vfmaq, to round like the scalar path
    const float32x4_t prod = vmulq_f32(wv, vld1q_f32(x + j));
    vst1q_f32(y + j, vaddq_f32(vld1q_f32(y + j), prod));
  }
  scalar::axpy(y + j, x + j, w, n - j);
}

std::size_t count_diff_ge(const float* a, const float* b, float threshold,
                          std::size_t n) {
  const float32x4_t tv = vdupq_n_f32(threshold);
  uint32x4_t acc = vdupq_n_u32(0);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const float32x4_t d = vsubq_f32(vld1q_f32(a + j), vld1q_f32(b + j));
    // mask lanes are all-ones; shifting right by 31 leaves 1 per hit
    acc = vaddq_u32(acc, vshrq_n_u32(vcgeq_f32(d, tv), 31));
  }
  std::size_t count = vaddvq_u32(acc);
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

}  // namespace fedfair::kernels::neon
