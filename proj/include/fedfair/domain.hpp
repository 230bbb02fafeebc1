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

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedfair/sketch.hpp"

namespace fedfair {

struct StratumKey {
  int y = 0;
  int a = 0;

  auto operator<=>(const StratumKey&) const = default;
};

std::string to_string(StratumKey key);

struct ScoredSample {
  int client = 0;
  int y = 0;
  int a = 0;
  double score = 0.0;

  bool operator==(const ScoredSample&) const = default;
};

/// Rejects labels or scores outside their ranges.
void validate_sample(const ScoredSample& s, int num_clients, int num_groups);

/// What one client uploads: per-stratum counts and sketches, and the sorted
/// scores themselves when running in exact mode.
struct ClientBundle {
  int client = 0;
  int num_groups = 2;
  std::map<StratumKey, std::uint64_t> counts;
  std::map<StratumKey, QuantileSketch> sketches;
  std::optional<std::map<StratumKey, std::vector<double>>> sorted_scores;

  std::uint64_t count(StratumKey key) const;
  std::uint64_t total() const;
  const QuantileSketch& sketch(StratumKey key) const;
  /// Empty span when the stratum is empty; throws if exact data is absent.
  std::span<const double> scores(StratumKey key) const;
  bool has_exact() const noexcept { return sorted_scores.has_value(); }

  /// Throws invalid-argument if counts, sketches and scores disagree.
  void validate() const;

  bool operator==(const ClientBundle&) const = default;
};

/// Groups samples by client and stratum. Every client 0..num_clients-1 gets a
/// bundle with all 2*num_groups strata present, possibly empty.
std::vector<ClientBundle> make_bundles(std::span<const ScoredSample> samples,
                                       int num_clients, int num_groups,
                                       SketchParams params, bool keep_exact);

int num_groups_of(std::span<const ClientBundle> bundles);

struct MixtureWeights {
  std::vector<double> pi;
  std::map<StratumKey, std::vector<double>> pi_stratum;
};

/// pi_i = n_i/n and pi_i^{y,a} = n_i^{y,a}/n^{y,a}. Throws
/// empty-global-stratum when some n^{y,a} is zero.
MixtureWeights estimate_mixture_weights(std::span<const ClientBundle> bundles);

/// Per-client plug-in frequencies indexed [client][group].
struct GroupProbabilities {
  std::vector<std::vector<double>> p_a;
  std::vector<std::vector<double>> p_Y_a;
};

/// Strict mode throws empty-stratum for a client with no samples in some
/// group. Lenient mode records p_Y_a = 0 there instead.
GroupProbabilities estimate_group_probs(std::span<const ClientBundle> bundles,
                                        bool strict = true);

/// Mixture-level probabilities: p_a = sum_i pi_i p_a^i and
/// p_{Y,a} = sum_i pi_i p_a^i p_{Y,a}^i / p_a.
struct AggregateProbs {
  std::vector<double> p_a;
  std::vector<double> p_Y_a;

  double joint(int y, int a) const {
    return p_a[a] * (y == 1 ? p_Y_a[a] : 1.0 - p_Y_a[a]);
  }
};

AggregateProbs aggregate_probs(const GroupProbabilities& probs,
                               std::span<const double> pi);

enum class Notion { kDEOO, kDEO, kDDP, kDPE, kDEA, kDEOOM };

std::string_view notion_name(Notion n);
Notion parse_notion(std::string_view text);

struct FairnessSpec {
  Notion notion = Notion::kDEOO;
  std::vector<double> alpha{0.1};
  double beta = 0.95;
  int mc_samples = 1000;
  double epsilon = 0.0;

  void validate() const;
};

}  // namespace fedfair
