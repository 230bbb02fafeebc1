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

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedfair/error.hpp"
#include "fedfair/rng.hpp"
#include "fedfair/sketch.hpp"

using namespace fedfair;

namespace {

std::vector<double> uniform_values(RngStream& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform();
  return v;
}

// Number of values whose bucket is at most `bucket`, by direct counting.
std::uint64_t bucket_rank_oracle(const std::vector<double>& v, std::uint32_t bucket, int bits) {
  std::uint64_t c = 0;
  for (double x : v) c += quantize(x, bits) <= bucket ? 1 : 0;
  return c;
}

std::uint64_t le_count(const std::vector<double>& v, double t) {
  return static_cast<std::uint64_t>(std::count_if(v.begin(), v.end(), [&](double x) { return x <= t; }));
}

double max_bucket_error(const QuantileSketch& s, const std::vector<double>& v) {
  double worst = 0.0;
  for (std::uint32_t b = 0; b < s.universe_size(); ++b) {
    const double d = std::abs(static_cast<double>(s.rank_of_bucket(b)) -
                              static_cast<double>(bucket_rank_oracle(v, b, s.universe_bits())));
    worst = std::max(worst, d);
  }
  return worst;
}

}  // namespace

TEST_CASE("quantize boundaries") {
  CHECK(quantize(0.0, 7) == 0);
  CHECK(quantize(1.0, 7) == 127);
  CHECK(quantize(0.5, 7) == 64);
  CHECK(quantize(0.5 - 1e-12, 7) == 63);
}

TEST_CASE("bucket upper edge separates buckets") {
  for (std::uint32_t b = 0; b < 128; ++b) {
    const double t = bucket_upper_edge(b, 7);
    CHECK(quantize(t, 7) == b);
    if (b + 1 < 128) CHECK(quantize(std::nextafter(t, 2.0), 7) == b + 1);
  }
  CHECK(bucket_upper_edge(127, 7) == 1.0);
}

TEST_CASE("empty and singleton sketches") {
  const SketchParams p{7, 300};
  const auto empty = QuantileSketch::build({}, p);
  CHECK(empty.total() == 0);
  CHECK(empty.nodes().empty());
  CHECK(approx_rank(empty, 0.3) == 0);
  CHECK_THROWS_AS(approx_quantile(empty, 0.5), Error);

  const std::vector<double> one{0.5};
  const auto s = QuantileSketch::build(one, p);
  CHECK(approx_rank(s, 0.5) == 1);
  CHECK(approx_rank(s, 0.7) == 1);
  const double q = approx_quantile(s, 0.5);
  CHECK(quantize(q, 7) == quantize(0.5, 7));
}

TEST_CASE("scores outside the unit interval are rejected") {
  const std::vector<double> bad{0.2, 1.5};
  CHECK_THROWS_AS(QuantileSketch::build(bad, SketchParams{}), Error);
}

TEST_CASE("rank error on uniform data stays within epsilon n") {
  RngStream rng(31, 0);
  const SketchParams p{7, 300};
  const auto v = uniform_values(rng, 1000);
  const auto s = QuantileSketch::build(v, p);
  CHECK(s.satisfies_invariants());
  CHECK(max_bucket_error(s, v) <= epsilon_bound(p) * 1000.0);
  for (int j = 0; j < 100; ++j) {
    const double t = rng.uniform();
    const double exact = static_cast<double>(le_count(v, t));
    const double bucket_slack = static_cast<double>(bucket_rank_oracle(v, quantize(t, 7), 7)) - exact;
    CHECK(std::abs(static_cast<double>(approx_rank(s, t)) - exact) <= epsilon_bound(p) * 1000.0 + bucket_slack);
  }
}

TEST_CASE("500 values against a sort-based rank") {
  RngStream rng(32, 0);
  const auto v = uniform_values(rng, 500);
  const auto s = QuantileSketch::build(v, SketchParams{7, 300});
  CHECK(max_bucket_error(s, v) <= 7.0 / 300.0 * 500.0);
}

TEST_CASE("small sets are represented exactly") {
  RngStream rng(33, 0);
  const auto v = uniform_values(rng, 250);
  const auto s = QuantileSketch::build(v, SketchParams{7, 300});
  CHECK(max_bucket_error(s, v) == 0.0);
}

TEST_CASE("merge identity, commutativity and pooled accuracy") {
  RngStream rng(34, 0);
  const SketchParams p{7, 300};
  const auto va = uniform_values(rng, 700);
  const auto vb = uniform_values(rng, 900);
  const auto a = QuantileSketch::build(va, p);
  const auto b = QuantileSketch::build(vb, p);
  const auto e = QuantileSketch::build({}, p);
  const auto ae = merge(a, e);
  const auto ab = merge(a, b);
  const auto ba = merge(b, a);
  for (std::uint32_t k = 0; k < a.universe_size(); ++k) {
    CHECK(ae.rank_of_bucket(k) == a.rank_of_bucket(k));
    CHECK(ab.rank_of_bucket(k) == ba.rank_of_bucket(k));
  }
  CHECK(ab.total() == 1600);

  std::vector<QuantileSketch> parts;
  std::vector<double> pooled;
  for (int i = 0; i < 10; ++i) {
    const auto v = uniform_values(rng, 100);
    pooled.insert(pooled.end(), v.begin(), v.end());
    parts.push_back(QuantileSketch::build(v, p));
  }
  const auto merged = merge_all(parts);
  CHECK(merged.total() == 1000);
  CHECK(merged.satisfies_invariants());
  CHECK(max_bucket_error(merged, pooled) <= epsilon_bound(p) * 1000.0);
}

TEST_CASE("merge associativity in query results") {
  RngStream rng(35, 0);
  const SketchParams p{7, 100};
  std::vector<std::vector<double>> v;
  std::vector<QuantileSketch> s;
  for (int i = 0; i < 3; ++i) {
    v.push_back(uniform_values(rng, 400 + 300 * i));
    s.push_back(QuantileSketch::build(v.back(), p));
  }
  const auto left = merge(merge(s[0], s[1]), s[2]);
  const auto right = merge(s[0], merge(s[1], s[2]));
  const double bound = 2.0 * epsilon_bound(p) * static_cast<double>(left.total());
  for (std::uint32_t k = 0; k < left.universe_size(); ++k) {
    CHECK(std::abs(static_cast<double>(left.rank_of_bucket(k)) - static_cast<double>(right.rank_of_bucket(k))) <=
          bound);
  }
}

TEST_CASE("incompatible sketches do not merge") {
  const auto a = QuantileSketch::build({}, SketchParams{7, 300});
  const auto b = QuantileSketch::build({}, SketchParams{8, 300});
  try {
    merge(a, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSketchIncompatible);
  }
}

TEST_CASE("quantile of uniform data") {
  RngStream rng(36, 0);
  const auto v = uniform_values(rng, 1000);
  const auto s = QuantileSketch::build(v, SketchParams{7, 300});
  const double t = approx_quantile(s, 0.9);
  const std::uint32_t bucket = quantize(t, 7);
  const double in_bucket = static_cast<double>(bucket_rank_oracle(v, bucket, 7)) -
                           static_cast<double>(bucket == 0 ? 0 : bucket_rank_oracle(v, bucket - 1, 7));
  const double r = static_cast<double>(le_count(v, t));
  CHECK(r >= 900.0 - 1000.0 * 7.0 / 300.0 - in_bucket);
  CHECK(r <= 900.0 + 1000.0 * 7.0 / 300.0 + in_bucket);

  const double top = approx_quantile(s, 1.0);
  const double vmax = *std::max_element(v.begin(), v.end());
  CHECK(quantize(top, 7) == quantize(vmax, 7));
}

TEST_CASE("epsilon bound values") {
  CHECK(epsilon_bound(SketchParams{7, 300}) == doctest::Approx(7.0 / 300.0));
  CHECK(epsilon_bound(SketchParams{10, 150}) == doctest::Approx(0.0667).epsilon(1e-3));
  CHECK(epsilon_bound(SketchParams{1, 1}) == 1.0);
}

TEST_CASE("exhaustive rank error, monotonicity and totals on varied sets") {
  RngStream rng(37, 0);
  for (std::size_t n : {1u, 10u, 299u, 301u, 2000u, 10000u}) {
    for (const SketchParams& p : {SketchParams{7, 300}, SketchParams{10, 150}, SketchParams{4, 20}}) {
      std::vector<double> v = uniform_values(rng, n);
      // a skewed half to exercise deep compression
      for (std::size_t j = 0; j < n / 2; ++j) v[j] = v[j] * v[j] * v[j];
      const auto s = QuantileSketch::build(v, p);
      CAPTURE(n);
      CHECK(s.total() == n);
      CHECK(s.satisfies_invariants());
      CHECK(max_bucket_error(s, v) <= epsilon_bound(p) * static_cast<double>(n));
      const auto table = s.rank_table();
      CHECK(table.back() == n);
      for (std::size_t k = 1; k < table.size(); ++k) CHECK(table[k] >= table[k - 1]);
      for (std::uint32_t k = 0; k < s.universe_size(); ++k) CHECK(table[k] == s.rank_of_bucket(k));
    }
  }
}

TEST_CASE("deserialization validates nodes") {
  const SketchParams p{3, 10};
  CHECK_NOTHROW(QuantileSketch(p, 3, {{8, 1}, {15, 2}}));
  CHECK_THROWS_AS(QuantileSketch(p, 4, {{8, 1}, {15, 2}}), Error);
  CHECK_THROWS_AS(QuantileSketch(p, 1, {{16, 1}}), Error);
  CHECK_THROWS_AS(QuantileSketch(p, 1, {{0, 1}}), Error);
}
