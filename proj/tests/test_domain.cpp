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

#include "fedfair/domain.hpp"
#include "fedfair/error.hpp"
#include "fedfair/rng.hpp"

using namespace fedfair;

namespace {

ClientBundle bundle_with_counts(int client, std::map<StratumKey, int> counts) {
  std::vector<ScoredSample> samples;
  for (const auto& [key, n] : counts) {
    for (int j = 0; j < n; ++j) samples.push_back({0, key.y, key.a, 0.5});
  }
  auto b = make_bundles(samples, 1, 2, SketchParams{}, true).front();
  b.client = client;
  return b;
}

}  // namespace

TEST_CASE("group probabilities are direct frequencies") {
  const auto b = bundle_with_counts(0, {{{0, 0}, 2}, {{1, 0}, 2}, {{0, 1}, 3}, {{1, 1}, 3}});
  const auto p = estimate_group_probs(std::span(&b, 1));
  CHECK(p.p_a[0][0] == doctest::Approx(0.4));
  CHECK(p.p_a[0][1] == doctest::Approx(0.6));
  CHECK(p.p_Y_a[0][0] == doctest::Approx(0.5));
  CHECK(p.p_Y_a[0][1] == doctest::Approx(0.5));
}

TEST_CASE("degenerate label frequencies") {
  const auto b = bundle_with_counts(0, {{{0, 0}, 1}, {{1, 1}, 1}});
  const auto p = estimate_group_probs(std::span(&b, 1));
  CHECK(p.p_Y_a[0][0] == 0.0);
  CHECK(p.p_Y_a[0][1] == 1.0);
}

TEST_CASE("empty group signals empty-stratum in strict mode only") {
  const auto b = bundle_with_counts(0, {{{0, 0}, 3}, {{1, 0}, 1}});
  try {
    estimate_group_probs(std::span(&b, 1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyStratum);
  }
  const auto lenient = estimate_group_probs(std::span(&b, 1), false);
  CHECK(lenient.p_a[0][1] == 0.0);
  CHECK(lenient.p_Y_a[0][1] == 0.0);
}

TEST_CASE("group probability estimates concentrate on the truth") {
  RngStream rng(21, 0);
  int hits = 0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<ScoredSample> s;
    for (int j = 0; j < 1000; ++j) {
      const int a = rng.uniform() < 0.3 ? 0 : 1;
      const int y = a == 0 ? (rng.uniform() < 0.7 ? 1 : 0) : (rng.uniform() < 0.5 ? 1 : 0);
      s.push_back({0, y, a, rng.uniform()});
    }
    const auto b = make_bundles(s, 1, 2, SketchParams{}, false);
    const auto p = estimate_group_probs(b);
    if (std::abs(p.p_a[0][0] - 0.3) <= 0.05 && std::abs(p.p_Y_a[0][0] - 0.7) <= 0.05) ++hits;
  }
  // 95% nominal rate, less three binomial standard errors at 200 repetitions
  CHECK(hits >= 181);
}

TEST_CASE("mixture weights are proportional to client counts") {
  std::vector<ClientBundle> bs{bundle_with_counts(0, {{{0, 0}, 10}, {{1, 0}, 5}, {{0, 1}, 10}, {{1, 1}, 15}}),
                               bundle_with_counts(1, {{{0, 0}, 20}, {{1, 0}, 5}, {{0, 1}, 20}, {{1, 1}, 15}})};
  const auto w = estimate_mixture_weights(bs);
  CHECK(w.pi[0] == doctest::Approx(0.4));
  CHECK(w.pi[1] == doctest::Approx(0.6));
  CHECK(w.pi_stratum.at({1, 0})[0] == doctest::Approx(0.5));
  CHECK(w.pi_stratum.at({1, 0})[1] == doctest::Approx(0.5));
  for (const auto& [key, v] : w.pi_stratum) {
    double s = 0.0;
    for (double x : v) s += x;
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("single client has unit weights") {
  const auto b = bundle_with_counts(0, {{{0, 0}, 1}, {{1, 0}, 2}, {{0, 1}, 3}, {{1, 1}, 4}});
  const auto w = estimate_mixture_weights(std::span(&b, 1));
  CHECK(w.pi[0] == 1.0);
  for (const auto& [key, v] : w.pi_stratum) CHECK(v[0] == 1.0);
}

TEST_CASE("a stratum empty on every client is rejected") {
  const auto b = bundle_with_counts(0, {{{0, 0}, 1}, {{1, 0}, 2}, {{0, 1}, 3}});
  CHECK_THROWS_AS(estimate_mixture_weights(std::span(&b, 1)), Error);
}

TEST_CASE("group probabilities ignore sample order") {
  RngStream rng(22, 0);
  std::vector<ScoredSample> s;
  for (int j = 0; j < 300; ++j) {
    s.push_back({static_cast<int>(rng.uniform_int(0, 2)), static_cast<int>(rng.uniform_int(0, 1)),
                 static_cast<int>(rng.uniform_int(0, 1)), rng.uniform()});
  }
  const auto p1 = estimate_group_probs(make_bundles(s, 3, 2, SketchParams{}, true));
  std::shuffle(s.begin(), s.end(), rng.engine());
  const auto b2 = make_bundles(s, 3, 2, SketchParams{}, true);
  const auto p2 = estimate_group_probs(b2);
  CHECK(p1.p_a == p2.p_a);
  CHECK(p1.p_Y_a == p2.p_Y_a);
  CHECK(make_bundles(s, 3, 2, SketchParams{}, true) == b2);
}

TEST_CASE("sample validation") {
  CHECK_NOTHROW(validate_sample({0, 1, 1, 1.0}, 1, 2));
  CHECK_THROWS_AS(validate_sample({0, 2, 0, 0.5}, 1, 2), Error);
  CHECK_THROWS_AS(validate_sample({1, 0, 0, 0.5}, 1, 2), Error);
  CHECK_THROWS_AS(validate_sample({0, 0, 2, 0.5}, 1, 2), Error);
  CHECK_THROWS_AS(validate_sample({0, 0, 0, 1.5}, 1, 2), Error);
  CHECK_THROWS_AS(validate_sample({0, 0, 0, -0.1}, 1, 2), Error);
}

TEST_CASE("notion names round trip") {
  for (Notion n : {Notion::kDEOO, Notion::kDEO, Notion::kDDP, Notion::kDPE, Notion::kDEA, Notion::kDEOOM}) {
    CHECK(parse_notion(notion_name(n)) == n);
  }
  CHECK_THROWS_AS(parse_notion("dp"), Error);
}

TEST_CASE("fairness spec validation") {
  FairnessSpec s;
  CHECK_NOTHROW(s.validate());
  s.beta = 1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s.beta = 0.9;
  s.alpha = {0.0};
  CHECK_THROWS_AS(s.validate(), Error);
  s.alpha = {0.1};
  s.notion = Notion::kDEO;
  CHECK_THROWS_AS(s.validate(), Error);
  s.alpha = {0.1, 0.2};
  CHECK_NOTHROW(s.validate());
}
