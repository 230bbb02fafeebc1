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

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedfair/domain.hpp"
#include "fedfair/orderstat.hpp"
#include "fedfair/rng.hpp"

namespace fedfair {

enum class RankMode { kExact, kSketch };

std::string_view rank_mode_name(RankMode m);
RankMode parse_rank_mode(std::string_view text);

/// A decision threshold; the classifier predicts 1 when score > value.
/// In sketch mode the threshold is the upper edge of `bucket`.
struct Threshold {
  double value = 0.0;
  int bucket = -1;

  bool operator==(const Threshold&) const = default;
};

struct ClampedRanks {
  std::vector<int> M;
  std::vector<int> m;
};

/// M_i = min(ceil(k_i + eps n_i), n_i + 1), m_i = max(ceil(k_i - eps n_i), 0).
ClampedRanks clamp_ranks(std::span<const int> local_ranks,
                         std::span<const int> sizes, double epsilon);

/// Ranks actually fed to the upper and lower mixtures of a bound.
/// The upper one is min(floor(k + eps n) + 1, n + 1), which is never below
/// clamp_ranks' M nor below k + 1.
int bound_upper_rank(int k, int n, double epsilon);
int bound_lower_rank(int k, int n, double epsilon);

/// Count of the client's stratum elements <= t (bucket count in sketch mode).
std::uint64_t local_rank(const ClientBundle& bundle, StratumKey key,
                         const Threshold& t, RankMode mode);

/// Sorted view over one stratum, or over several strata pooled, across all
/// clients. Global rank k in 1..total() names the threshold t_(k).
class StratumIndex {
 public:
  StratumIndex(std::span<const ClientBundle> bundles,
               std::vector<StratumKey> keys, RankMode mode);

  int total() const noexcept { return total_; }
  std::size_t clients() const noexcept { return sizes_.size(); }
  std::span<const int> sizes() const noexcept { return sizes_; }
  std::span<const double> weights() const noexcept { return weights_; }
  RankMode mode() const noexcept { return mode_; }

  Threshold threshold(int k) const;
  std::span<const Threshold> thresholds() const noexcept { return thresholds_; }
  std::span<const int> local_ranks(int k) const;
  int rank_of(std::size_t client, const Threshold& t) const;
  std::vector<int> ranks_of(const Threshold& t) const;

 private:
  RankMode mode_;
  int bits_ = 0;
  int total_ = 0;
  std::vector<StratumKey> keys_;
  std::vector<int> sizes_;
  std::vector<double> weights_;
  // exact mode
  std::vector<double> pooled_;
  std::vector<std::vector<std::vector<double>>> scores_;  // [client][key]
  // sketch mode
  std::vector<std::uint64_t> merged_table_;
  std::vector<std::vector<std::vector<std::uint64_t>>> tables_;  // [client][key]
  std::vector<Threshold> thresholds_;  // index k-1
  std::vector<int> local_;             // (k-1) * clients + i
};

/// Local ranks of the global rank-k threshold of one stratum.
std::vector<int> local_ranks_of_global(std::span<const ClientBundle> bundles,
                                       StratumKey stratum, int k_global,
                                       RankMode mode);

/// Inputs of one group's side of a bound: local ranks with the stratum
/// sizes and mixture weights they refer to.
struct GroupRanks {
  std::vector<int> local;
  std::vector<int> sizes;
  std::vector<double> weights;
};

struct BoundResult {
  double L = 0.0;
  std::vector<double> h_terms;
  std::vector<double> h_std_errors;
};

/// Stream roles for the draw tables. Table streams are derived from the
/// caller's rng as rng.derive({role, group}).derive({client}).
enum class DrawRole : std::uint64_t { kReference = 1, kCross = 2 };

RngStream draw_stream(const RngStream& rng, DrawRole role, int group);

BoundResult bound_deoo(const GroupRanks& g0, const GroupRanks& g1,
                       double alpha, double epsilon, int mc,
                       const RngStream& rng);
/// ref_* are the positive-label strata, cross_* the negative-label strata
/// ranked at the same thresholds.
BoundResult bound_deo(const GroupRanks& ref0, const GroupRanks& ref1,
                      const GroupRanks& cross0, const GroupRanks& cross1,
                      double alpha1, double alpha2, double epsilon, int mc,
                      const RngStream& rng);
/// Pooled per-group strata.
BoundResult bound_ddp(const GroupRanks& pooled0, const GroupRanks& pooled1,
                      double alpha, double epsilon, int mc,
                      const RngStream& rng);
/// Negative-label strata.
BoundResult bound_dpe(const GroupRanks& neg0, const GroupRanks& neg1,
                      double alpha, double epsilon, int mc,
                      const RngStream& rng);
/// p_Y holds P(Y=1 | A=a) for a = 0, 1.
BoundResult bound_dea(const GroupRanks& ref0, const GroupRanks& ref1,
                      const GroupRanks& cross0, const GroupRanks& cross1,
                      std::span<const double> p_Y, double alpha,
                      double epsilon, int mc, const RngStream& rng);
/// groups[0] is the reference group.
BoundResult bound_deoom(std::span<const GroupRanks> groups, double alpha,
                        double epsilon, int mc, const RngStream& rng);

struct RankCandidate {
  std::vector<int> global_ranks;              // [group]
  std::vector<std::vector<int>> local_ranks;  // [group][client]
  double L_value = 0.0;
  std::vector<double> h_terms;
  std::vector<double> h_std_errors;

  /// |sum of even-index terms - sum of odd-index terms|; terms come in
  /// directed pairs.
  double asymmetry() const;
};

enum class SearchMode { kFullGrid, kMuRestricted };

struct SearchStrategy {
  SearchMode mode = SearchMode::kFullGrid;
};

std::string_view search_mode_name(SearchMode m);
SearchMode parse_search_mode(std::string_view text);

struct SearchStats {
  std::uint64_t grid_size = 0;
  std::uint64_t cells_evaluated = 0;
  std::uint64_t accepted = 0;
  std::uint64_t mu_fallbacks = 0;
  std::string diagnostic;
};

/// Group-0 rank whose threshold is nearest the value implied by the group-1
/// threshold; ties go to the smaller rank. nullopt when the implied value is
/// undefined (zero denominator or outside (0,1)).
std::optional<int> mu_map(double t1, std::span<const Threshold> group0,
                          const AggregateProbs& agg);
std::optional<double> mu_threshold(double t1, const AggregateProbs& agg);

/// Rank bookkeeping shared by certification and selection: the ranked
/// strata of every (y, a), the per-group sets whose global ranks index the
/// candidate thresholds, and the plug-in weights and probabilities.
class RankContext {
 public:
  RankContext(std::span<const ClientBundle> bundles, Notion notion,
              RankMode mode);

  Notion notion() const noexcept { return notion_; }
  RankMode mode() const noexcept { return mode_; }
  int num_groups() const noexcept { return groups_; }
  std::size_t num_clients() const noexcept { return clients_; }
  int universe_bits() const noexcept { return bits_; }

  /// Ranked set whose global ranks index the candidate thresholds of group
  /// g: the positive strata, the negative strata (dpe) or both pooled (ddp).
  const StratumIndex& defining(int g) const;
  /// Single stratum (y, g).
  const StratumIndex& stratum(int y, int g) const;
  const MixtureWeights& weights() const noexcept { return weights_; }
  const GroupProbabilities& probs() const noexcept { return probs_; }
  const AggregateProbs& aggregates() const noexcept { return agg_; }

  Threshold threshold(int g, int k) const { return defining(g).threshold(k); }
  std::uint64_t grid_size() const;

 private:
  Notion notion_;
  RankMode mode_;
  int groups_ = 0;
  std::size_t clients_ = 0;
  int bits_ = 0;
  std::vector<StratumIndex> strata_;  // y * groups + g
  std::vector<StratumIndex> pooled_;
  MixtureWeights weights_;
  GroupProbabilities probs_;
  AggregateProbs agg_;
};

/// Candidate construction for one dataset and one fairness spec. Draw tables
/// are built once, so every bound evaluated through the engine shares common
/// random numbers.
class CertifyEngine {
 public:
  CertifyEngine(std::span<const ClientBundle> bundles, FairnessSpec spec,
                RankMode mode, const RngStream& rng);
  ~CertifyEngine();
  CertifyEngine(CertifyEngine&&) noexcept;
  CertifyEngine& operator=(CertifyEngine&&) noexcept;

  const FairnessSpec& spec() const noexcept;
  const RankContext& context() const noexcept;

  /// L and h-terms at one rank tuple.
  BoundResult evaluate(std::span<const int> global_ranks);
  std::optional<int> mu(int k1) const;

  /// Calls sink for every accepted candidate in grid order (last group's
  /// rank outermost).
  SearchStats for_each_candidate(
      SearchStrategy search,
      const std::function<void(const RankCandidate&)>& sink);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<RankCandidate> build_candidate_set(
    std::span<const ClientBundle> bundles, const FairnessSpec& spec,
    RankMode mode, SearchStrategy search, const RngStream& rng,
    SearchStats* stats = nullptr);

}  // namespace fedfair
