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

#include "fedfair/select.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedfair/error.hpp"

namespace fedfair {

StratumTable stratum_sizes(std::span<const ClientBundle> bundles) {
  const int groups = num_groups_of(bundles);
  StratumTable t(bundles.size(), groups);
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    for (int y = 0; y <= 1; ++y) {
      for (int a = 0; a < groups; ++a) t.at(i, y, a) = static_cast<int>(bundles[i].count({y, a}));
    }
  }
  return t;
}

StratumTable threshold_ranks(std::span<const ClientBundle> bundles,
                             std::span<const Threshold> thresholds, RankMode mode) {
  const int groups = num_groups_of(bundles);
  if (thresholds.size() != static_cast<std::size_t>(groups)) {
    throw Error(ErrorCode::kInvalidArgument, "need one threshold per group");
  }
  StratumTable t(bundles.size(), groups);
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    for (int y = 0; y <= 1; ++y) {
      for (int a = 0; a < groups; ++a) {
        t.at(i, y, a) = static_cast<int>(local_rank(bundles[i], {y, a}, thresholds[a], mode));
      }
    }
  }
  return t;
}

std::vector<std::vector<int>> cross_ranks(std::span<const ClientBundle> bundles,
                                          std::span<const Threshold> thresholds,
                                          RankMode mode) {
  const StratumTable t = threshold_ranks(bundles, thresholds, mode);
  std::vector<std::vector<int>> out(static_cast<std::size_t>(t.groups()),
                                    std::vector<int>(t.clients()));
  for (int a = 0; a < t.groups(); ++a) {
    for (std::size_t i = 0; i < t.clients(); ++i) out[a][i] = t.at(i, 0, a);
  }
  return out;
}

void LabelShiftTarget::validate(int groups) const {
  if (p_a_target.size() != static_cast<std::size_t>(groups) ||
      p_Y_a_target.size() != static_cast<std::size_t>(groups)) {
    throw Error(ErrorCode::kInvalidArgument, "label-shift target needs one entry per group");
  }
  double sum = 0.0;
  for (int a = 0; a < groups; ++a) {
    if (!(p_a_target[a] >= 0.0 && p_a_target[a] <= 1.0) ||
        !(p_Y_a_target[a] >= 0.0 && p_Y_a_target[a] <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "label-shift target entries must be in [0,1]");
    }
    sum += p_a_target[a];
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "label-shift p_a_target must sum to 1");
  }
}

ShiftWeights ShiftWeights::identity(int groups) {
  ShiftWeights w;
  w.w[0].assign(static_cast<std::size_t>(groups), 1.0);
  w.w[1].assign(static_cast<std::size_t>(groups), 1.0);
  return w;
}

ShiftWeights label_shift_weights(const AggregateProbs& training,
                                 const LabelShiftTarget& target) {
  const int groups = static_cast<int>(training.p_a.size());
  target.validate(groups);
  ShiftWeights w;
  for (int y = 0; y <= 1; ++y) {
    w.w[y].resize(static_cast<std::size_t>(groups));
    for (int a = 0; a < groups; ++a) {
      const double py = y == 1 ? training.p_Y_a[a] : 1.0 - training.p_Y_a[a];
      const double pty = y == 1 ? target.p_Y_a_target[a] : 1.0 - target.p_Y_a_target[a];
      const double den = training.p_a[a] * py;
      if (!(den > 0.0)) {
        throw Error(ErrorCode::kShiftUndefined,
                    "training probability of " + to_string(StratumKey{y, a}) + " is zero");
      }
      w.w[y][a] = target.p_a_target[a] * pty / den;
    }
  }
  return w;
}

double group_error_term(int a, const StratumTable& ranks, const StratumTable& sizes,
                        std::span<const double> pi, const GroupProbabilities& probs,
                        const ShiftWeights& w) {
  double sum = 0.0;
  for (std::size_t i = 0; i < sizes.clients(); ++i) {
    const double pa = probs.p_a[i][a];
    const double py = probs.p_Y_a[i][a];
    const int n1 = sizes.at(i, 1, a);
    const int n0 = sizes.at(i, 0, a);
    double term = 0.0;
    if (n1 > 0) {
      const double frac = (ranks.at(i, 1, a) + 0.5) / (n1 + 1.0);
      term += frac * (pa * py) * w.w[1][a];
    }
    if (n0 > 0) {
      const double frac = (n0 + 0.5 - ranks.at(i, 0, a)) / (n0 + 1.0);
      term += frac * (pa * (1.0 - py)) * w.w[0][a];
    }
    sum += pi[i] * term;
  }
  return sum;
}

namespace {

double error_sum(const StratumTable& ranks, const StratumTable& sizes,
                 std::span<const double> pi, const GroupProbabilities& probs,
                 const ShiftWeights& w) {
  double total = 0.0;
  for (int a = 0; a < sizes.groups(); ++a) total += group_error_term(a, ranks, sizes, pi, probs, w);
  return total;
}

}  // namespace

double estimate_error(const StratumTable& ranks, const StratumTable& sizes,
                      std::span<const double> pi, const GroupProbabilities& probs) {
  return error_sum(ranks, sizes, pi, probs, ShiftWeights::identity(sizes.groups()));
}

double estimate_error_multigroup(const StratumTable& ranks, const StratumTable& sizes,
                                 std::span<const double> pi,
                                 const GroupProbabilities& probs) {
  return error_sum(ranks, sizes, pi, probs, ShiftWeights::identity(sizes.groups()));
}

double estimate_error_label_shift(const StratumTable& ranks, const StratumTable& sizes,
                                  std::span<const double> pi,
                                  const GroupProbabilities& probs,
                                  const AggregateProbs& training,
                                  const LabelShiftTarget& target) {
  return error_sum(ranks, sizes, pi, probs, label_shift_weights(training, target));
}

double rank_slack(int n, double epsilon) {
  const double f = std::floor(epsilon * n);
  return (2.0 * f + 1.0) / (2.0 * (n + 1.0));
}

double theta_bound(const StratumTable& sizes, std::span<const double> pi,
                   const GroupProbabilities& probs, double epsilon, const ShiftWeights& w) {
  double theta = 0.0;
  for (std::size_t i = 0; i < sizes.clients(); ++i) {
    double inner = 0.0;
    for (int a = 0; a < sizes.groups(); ++a) {
      const double pa = probs.p_a[i][a];
      const double py = probs.p_Y_a[i][a];
      const int n1 = sizes.at(i, 1, a);
      const int n0 = sizes.at(i, 0, a);
      if (n1 > 0) inner += rank_slack(n1, epsilon) * (pa * py) * w.w[1][a];
      if (n0 > 0) inner += rank_slack(n0, epsilon) * (pa * (1.0 - py)) * w.w[0][a];
    }
    theta += pi[i] * inner;
  }
  return theta;
}

double theta_bound(const StratumTable& sizes, std::span<const double> pi,
                   const GroupProbabilities& probs, double epsilon) {
  return theta_bound(sizes, pi, probs, epsilon, ShiftWeights::identity(sizes.groups()));
}

// --- selection ------------------------------------------------------------

namespace {

StratumTable sizes_of(const RankContext& ctx) {
  StratumTable t(ctx.num_clients(), ctx.num_groups());
  for (int y = 0; y <= 1; ++y) {
    for (int a = 0; a < ctx.num_groups(); ++a) {
      const auto s = ctx.stratum(y, a).sizes();
      for (std::size_t i = 0; i < ctx.num_clients(); ++i) t.at(i, y, a) = s[i];
    }
  }
  return t;
}

void fill_group(const RankContext& ctx, int g, const Threshold& t, StratumTable& out) {
  for (int y = 0; y <= 1; ++y) {
    const StratumIndex& idx = ctx.stratum(y, g);
    for (std::size_t i = 0; i < ctx.num_clients(); ++i) out.at(i, y, g) = idx.rank_of(i, t);
  }
}

}  // namespace

Selector::Selector(const RankContext& ctx, double epsilon,
                   std::optional<LabelShiftTarget> target)
    : ctx_(&ctx),
      epsilon_(epsilon),
      weights_(target ? label_shift_weights(ctx.aggregates(), *target)
                      : ShiftWeights::identity(ctx.num_groups())),
      sizes_(sizes_of(ctx)) {
  cache_.resize(static_cast<std::size_t>(ctx.num_groups()));
  for (int g = 0; g < ctx.num_groups(); ++g) {
    cache_[g].assign(static_cast<std::size_t>(ctx.defining(g).total()) + 1,
                     std::numeric_limits<double>::quiet_NaN());
  }
}

double Selector::error_of(std::span<const int> global_ranks) {
  const RankContext& ctx = *ctx_;
  double total = 0.0;
  StratumTable scratch;
  for (int g = 0; g < ctx.num_groups(); ++g) {
    const int k = global_ranks[g];
    double& slot = cache_[g].at(static_cast<std::size_t>(k));
    if (std::isnan(slot)) {
      if (scratch.clients() == 0) scratch = StratumTable(ctx.num_clients(), ctx.num_groups());
      fill_group(ctx, g, ctx.threshold(g, k), scratch);
      slot = group_error_term(g, scratch, sizes_, ctx.weights().pi, ctx.probs(), weights_);
    }
    total += slot;
  }
  return total;
}

void Selector::offer(const RankCandidate& c) {
  ++offered_;
  const double err = error_of(c.global_ranks);
  bool better = !best_;
  if (!better) {
    if (err != best_error_) {
      better = err < best_error_;
    } else {
      const double a = c.asymmetry();
      const double b = best_->asymmetry();
      better = a != b ? a < b : c.global_ranks < best_->global_ranks;
    }
  }
  if (better) {
    best_ = c;
    best_error_ = err;
  }
}

SelectionResult Selector::result() const {
  if (!best_) {
    throw Error(ErrorCode::kNoCertifiedClassifier,
                "the candidate set is empty; no threshold pair is certified at this alpha and beta");
  }
  const RankContext& ctx = *ctx_;
  SelectionResult r;
  r.chosen = *best_;
  r.est_error = best_error_;
  r.ranks = StratumTable(ctx.num_clients(), ctx.num_groups());
  for (int g = 0; g < ctx.num_groups(); ++g) {
    r.thresholds.push_back(ctx.threshold(g, best_->global_ranks[g]));
    fill_group(ctx, g, r.thresholds.back(), r.ranks);
  }
  r.cross_ranks.assign(static_cast<std::size_t>(ctx.num_groups()),
                       std::vector<int>(ctx.num_clients()));
  for (int g = 0; g < ctx.num_groups(); ++g) {
    for (std::size_t i = 0; i < ctx.num_clients(); ++i) r.cross_ranks[g][i] = r.ranks.at(i, 0, g);
  }
  r.theta = theta_bound(sizes_, ctx.weights().pi, ctx.probs(), epsilon_, weights_);
  r.bucket_width = ctx.mode() == RankMode::kSketch ? std::ldexp(1.0, -ctx.universe_bits()) : 0.0;
  return r;
}

SelectionResult select_optimal(std::span<const RankCandidate> candidates,
                               const RankContext& ctx, double epsilon,
                               std::optional<LabelShiftTarget> target) {
  Selector sel(ctx, epsilon, std::move(target));
  for (const RankCandidate& c : candidates) sel.offer(c);
  return sel.result();
}

}  // namespace fedfair
