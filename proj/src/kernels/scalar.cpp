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

namespace fedfair::kernels::scalar {

void axpy(float* y, const float* x, float w, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    const float prod = w * x[j];
    y[j] = y[j] + prod;
  }
}

std::size_t count_diff_ge(const float* a, const float* b, float threshold,
                          std::size_t n) {
  std::size_t count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const float d = a[j] - b[j];
    count += d >= threshold ? 1 : 0;
  }
  return count;
}

}  // namespace fedfair::kernels::scalar
