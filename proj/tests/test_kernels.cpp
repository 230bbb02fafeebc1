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

#include <doctest.h>

#include <cstring>
#include <vector>

#include "fedfair/kernels/kernels.hpp"
#include "fedfair/rng.hpp"

using namespace fedfair;
namespace k = fedfair::kernels;

namespace {

std::vector<float> random_floats(RngStream& rng, std::size_t n) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform());
  return v;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

std::size_t naive_count(const std::vector<float>& a, const std::vector<float>& b, float thr) {
  std::size_t c = 0;
  for (std::size_t j = 0; j < a.size(); ++j) c += (a[j] - b[j] >= thr) ? 1 : 0;
  return c;
}

struct IsaGuard {
  k::Isa saved = k::active_isa();
  ~IsaGuard() { k::set_active_isa(saved); }
};

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  RngStream rng(11, 0);
  for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 63u, 64u, 65u, 1000u}) {
    auto y = random_floats(rng, n);
    const auto x = random_floats(rng, n);
    auto expect = y;
    for (std::size_t j = 0; j < n; ++j) {
      const float p = 0.37f * x[j];
      expect[j] = expect[j] + p;
    }
    k::scalar::axpy(y.data(), x.data(), 0.37f, n);
    CHECK(same_bits(y, expect));
    CHECK(k::scalar::count_diff_ge(y.data(), x.data(), 0.1f, n) == naive_count(y, x, 0.1f));
  }
}

TEST_CASE("every supported ISA is bit-identical to scalar") {
  IsaGuard guard;
  RngStream rng(12, 0);
  for (k::Isa isa : {k::Isa::kScalar, k::Isa::kAvx2, k::Isa::kNeon}) {
    if (!k::isa_supported(isa)) continue;
    CAPTURE(k::isa_name(isa));
    for (std::size_t n : {0u, 3u, 8u, 17u, 64u, 129u, 1000u, 4097u}) {
      const auto y0 = random_floats(rng, n);
      const auto x = random_floats(rng, n);
      const auto b = random_floats(rng, n);
      const float w = static_cast<float>(rng.uniform());
      k::set_active_isa(k::Isa::kScalar);
      auto ref = y0;
      k::axpy(ref, x, w);
      const std::size_t ref_count = k::count_diff_ge(ref, b, 0.05f);
      k::set_active_isa(isa);
      auto got = y0;
      k::axpy(got, x, w);
      CHECK(same_bits(got, ref));
      CHECK(k::count_diff_ge(got, b, 0.05f) == ref_count);
      CHECK(ref_count == naive_count(ref, b, 0.05f));
    }
  }
}

TEST_CASE("capped count is exact below the limit and at least the limit otherwise") {
  RngStream rng(13, 0);
  const auto a = random_floats(rng, 1000);
  const auto b = random_floats(rng, 1000);
  const std::size_t full = naive_count(a, b, 0.0f);
  for (std::size_t limit : {std::size_t{0}, std::size_t{1}, full / 2, full, full + 1, std::size_t{5000}}) {
    const std::size_t got = k::count_diff_ge_capped(a, b, 0.0f, limit);
    if (full < limit) {
      CHECK(got == full);
    } else {
      CHECK(got >= limit);
      CHECK(got <= full);
    }
  }
}

TEST_CASE("ties at the threshold count as hits") {
  const std::vector<float> a{0.5f, 0.25f, 1.0f};
  const std::vector<float> b{0.25f, 0.25f, 0.0f};
  CHECK(k::count_diff_ge(a, b, 0.25f) == 2);
  CHECK(k::count_diff_ge(a, b, 0.0f) == 3);
  CHECK(k::count_diff_ge(a, b, 1.0f) == 1);
}
