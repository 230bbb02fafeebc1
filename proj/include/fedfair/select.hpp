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

#include <optional>
#include <span>
#include <vector>

#include "fedfair/certify.hpp"
#include "fedfair/domain.hpp"

namespace fedfair {

/// Dense per-(client, y, a) integer table; used for stratum sizes and for
/// the local ranks of one threshold per group.
class StratumTable {
 public:
  StratumTable() = default;
  StratumTable(std::size_t clients, int groups)
      : clients_(clients), groups_(groups), v_(clients * 2 * static_cast<std::size_t>(groups), 0) {}

  std::size_t clients() const noexcept { return clients_; }
  int groups() const noexcept { return groups_; }
  int& at(std::size_t client, int y, int a) { return v_[index(client, y, a)]; }
  int at(std::size_t client, int y, int a) const { return v_[index(client, y, a)]; }

  bool operator==(const StratumTable&) const = default;

 private:
  std::size_t index(std::size_t client, int y, int a) const {
    return (client * 2 + static_cast<std::size_t>(y)) * static_cast<std::size_t>(groups_) +
           static_cast<std::size_t>(a);
  }
  std::size_t clients_ = 0;
  int groups_ = 0;
  std::vector<int> v_;
};

StratumTable stratum_sizes(std::span<const ClientBundle> bundles);

/// Local ranks of each group's threshold in every stratum of that group.
StratumTable threshold_ranks(std::span<const ClientBundle> bundles,
                             std::span<const Threshold> thresholds,
                             RankMode mode);

/// Ranks k_i^{0,a} of each group's threshold inside the negative-label
/// strata; result indexed [group][client].
std::vector<std::vector<int>> cross_ranks(std::span<const ClientBundle> bundles,
                                          std::span<const Threshold> thresholds,
                                          RankMode mode);

struct LabelShiftTarget {
  std::vector<double> p_a_target;
  std::vector<double> p_Y_a_target;

  void validate(int groups) const;
};

/// Multipliers w^{y,a} for the error terms, indexed [y][a].
struct ShiftWeights {
  std::vector<double> w[2];

  static ShiftWeights identity(int groups);
};

/// w^{1,a} = pT_a pT_{Y,a} / (p_a p_{Y,a}) and w^{0,a} likewise with
/// 1 - p_{Y,a}. Throws shift-undefined on a zero training denominator.
ShiftWeights label_shift_weights(const AggregateProbs& training,
                                 const LabelShiftTarget& target);

/// Contribution of group a to the plug-in error estimate.
double group_error_term(int a, const StratumTable& ranks,
                        const StratumTable& sizes, std::span<const double> pi,
                        const GroupProbabilities& probs,
                        const ShiftWeights& w);

double estimate_error(const StratumTable& ranks, const StratumTable& sizes,
                      std::span<const double> pi,
                      const GroupProbabilities& probs);
double estimate_error_multigroup(const StratumTable& ranks,
                                 const StratumTable& sizes,
                                 std::span<const double> pi,
                                 const GroupProbabilities& probs);
double estimate_error_label_shift(const StratumTable& ranks,
                                  const StratumTable& sizes,
                                  std::span<const double> pi,
                                  const GroupProbabilities& probs,
                                  const AggregateProbs& training,
                                  const LabelShiftTarget& target);

/// e = (2 floor(eps n) + 1) / (2 (n + 1)).
double rank_slack(int n, double epsilon);

double theta_bound(const StratumTable& sizes, std::span<const double> pi,
                   const GroupProbabilities& probs, double epsilon,
                   const ShiftWeights& w);
double theta_bound(const StratumTable& sizes, std::span<const double> pi,
                   const GroupProbabilities& probs, double epsilon);

struct SelectionResult {
  RankCandidate chosen;
  std::vector<Threshold> thresholds;
  double est_error = 0.0;
  double theta = 0.0;
  StratumTable ranks;  // local ranks of the chosen thresholds, all strata
  std::vector<std::vector<int>> cross_ranks;  // [group][client], y = 0
  double bucket_width = 0.0;                  // 0 in exact mode
};

/// Picks the candidate with the smallest error estimate; ties go to the
/// smaller h-term asymmetry, then to the lexicographically smaller ranks.
/// Per-group error terms are cached, so offering many candidates is cheap.
class Selector {
 public:
  Selector(const RankContext& ctx, double epsilon,
           std::optional<LabelShiftTarget> target = std::nullopt);

  double error_of(std::span<const int> global_ranks);
  void offer(const RankCandidate& c);
  bool empty() const noexcept { return !best_.has_value(); }
  std::size_t offered() const noexcept { return offered_; }
  /// Throws no-certified-classifier when nothing was offered.
  SelectionResult result() const;

 private:
  const RankContext* ctx_;
  double epsilon_;
  ShiftWeights weights_;
  StratumTable sizes_;
  std::vector<std::vector<double>> cache_;  // [group][k], NaN = unset
  std::optional<RankCandidate> best_;
  double best_error_ = 0.0;
  std::size_t offered_ = 0;
};

SelectionResult select_optimal(std::span<const RankCandidate> candidates,
                               const RankContext& ctx, double epsilon,
                               std::optional<LabelShiftTarget> target = std::nullopt);

}  // namespace fedfair
