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

#include "fedfair/certify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "fedfair/error.hpp"
#include "fedfair/kernels/kernels.hpp"

namespace fedfair {

std::string_view rank_mode_name(RankMode m) {
  return m == RankMode::kExact ? "exact" : "sketch";
}

RankMode parse_rank_mode(std::string_view text) {
  if (text == "exact") return RankMode::kExact;
  if (text == "sketch") return RankMode::kSketch;
  throw Error(ErrorCode::kInvalidArgument, "unknown mode '" + std::string(text) + "'");
}

std::string_view search_mode_name(SearchMode m) {
  return m == SearchMode::kFullGrid ? "full-grid" : "mu-restricted";
}

SearchMode parse_search_mode(std::string_view text) {
  if (text == "full-grid") return SearchMode::kFullGrid;
  if (text == "mu-restricted") return SearchMode::kMuRestricted;
  throw Error(ErrorCode::kInvalidArgument, "unknown search mode '" + std::string(text) + "'");
}

ClampedRanks clamp_ranks(std::span<const int> local_ranks,
                         std::span<const int> sizes, double epsilon) {
  ClampedRanks out;
  out.M.resize(local_ranks.size());
  out.m.resize(local_ranks.size());
  for (std::size_t i = 0; i < local_ranks.size(); ++i) {
    const double k = local_ranks[i];
    const double en = epsilon * sizes[i];
    out.M[i] = std::min(static_cast<int>(std::ceil(k + en)), sizes[i] + 1);
    out.m[i] = std::max(static_cast<int>(std::ceil(k - en)), 0);
  }
  return out;
}

int bound_upper_rank(int k, int n, double epsilon) {
  const double shifted = std::floor(static_cast<double>(k) + epsilon * n);
  return std::min(static_cast<int>(shifted) + 1, n + 1);
}

int bound_lower_rank(int k, int n, double epsilon) {
  const double shifted = std::ceil(static_cast<double>(k) - epsilon * n);
  return std::clamp(static_cast<int>(shifted), 0, n);
}

std::uint64_t local_rank(const ClientBundle& bundle, StratumKey key,
                         const Threshold& t, RankMode mode) {
  if (bundle.count(key) == 0) return 0;
  if (mode == RankMode::kExact) {
    const auto s = bundle.scores(key);
    return static_cast<std::uint64_t>(std::upper_bound(s.begin(), s.end(), t.value) - s.begin());
  }
  const QuantileSketch& sk = bundle.sketch(key);
  const std::uint32_t b =
      t.bucket >= 0 ? static_cast<std::uint32_t>(t.bucket) : quantize(t.value, sk.universe_bits());
  return sk.rank_of_bucket(b);
}

// --- StratumIndex ---------------------------------------------------------

StratumIndex::StratumIndex(std::span<const ClientBundle> bundles,
                           std::vector<StratumKey> keys, RankMode mode)
    : mode_(mode), keys_(std::move(keys)) {
  if (bundles.empty()) throw Error(ErrorCode::kInvalidArgument, "no client bundles");
  const std::size_t s = bundles.size();
  sizes_.assign(s, 0);
  for (std::size_t i = 0; i < s; ++i) {
    for (StratumKey key : keys_) sizes_[i] += static_cast<int>(bundles[i].count(key));
    total_ += sizes_[i];
  }
  if (total_ == 0) {
    std::string names;
    for (StratumKey key : keys_) names += to_string(key);
    throw Error(ErrorCode::kEmptyGlobalStratum, "no client holds samples in " + names);
  }
  weights_.resize(s);
  for (std::size_t i = 0; i < s; ++i) {
    weights_[i] = static_cast<double>(sizes_[i]) / static_cast<double>(total_);
  }

  thresholds_.resize(static_cast<std::size_t>(total_));
  if (mode_ == RankMode::kExact) {
    scores_.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
      for (StratumKey key : keys_) {
        const auto sc = bundles[i].scores(key);
        scores_[i].emplace_back(sc.begin(), sc.end());
        pooled_.insert(pooled_.end(), sc.begin(), sc.end());
      }
    }
    std::sort(pooled_.begin(), pooled_.end());
    for (int k = 1; k <= total_; ++k) thresholds_[k - 1] = {pooled_[k - 1], -1};
  } else {
    std::vector<QuantileSketch> all;
    tables_.resize(s);
    for (std::size_t i = 0; i < s; ++i) {
      for (StratumKey key : keys_) {
        const QuantileSketch& sk = bundles[i].sketch(key);
        tables_[i].push_back(sk.rank_table());
        all.push_back(sk);
      }
    }
    const QuantileSketch merged = merge_all(all);
    bits_ = merged.universe_bits();
    merged_table_ = merged.rank_table();
    std::uint32_t b = 0;
    for (int k = 1; k <= total_; ++k) {
      while (merged_table_[b] < static_cast<std::uint64_t>(k)) ++b;
      thresholds_[k - 1] = {bucket_upper_edge(b, bits_), static_cast<int>(b)};
    }
  }

  local_.resize(static_cast<std::size_t>(total_) * s);
  for (int k = 1; k <= total_; ++k) {
    for (std::size_t i = 0; i < s; ++i) {
      local_[static_cast<std::size_t>(k - 1) * s + i] = rank_of(i, thresholds_[k - 1]);
    }
  }
}

Threshold StratumIndex::threshold(int k) const {
  if (k < 1 || k > total_) {
    throw Error(ErrorCode::kInvalidArgument,
                "global rank " + std::to_string(k) + " outside [1," + std::to_string(total_) + "]");
  }
  return thresholds_[k - 1];
}

std::span<const int> StratumIndex::local_ranks(int k) const {
  if (k < 1 || k > total_) {
    throw Error(ErrorCode::kInvalidArgument,
                "global rank " + std::to_string(k) + " outside [1," + std::to_string(total_) + "]");
  }
  const std::size_t s = sizes_.size();
  return std::span<const int>(local_).subspan(static_cast<std::size_t>(k - 1) * s, s);
}

int StratumIndex::rank_of(std::size_t client, const Threshold& t) const {
  int r = 0;
  if (mode_ == RankMode::kExact) {
    for (const auto& sc : scores_[client]) {
      r += static_cast<int>(std::upper_bound(sc.begin(), sc.end(), t.value) - sc.begin());
    }
    return r;
  }
  const std::uint32_t b =
      t.bucket >= 0 ? static_cast<std::uint32_t>(t.bucket) : quantize(t.value, bits_);
  for (const auto& table : tables_[client]) r += static_cast<int>(table[b]);
  return r;
}

std::vector<int> StratumIndex::ranks_of(const Threshold& t) const {
  std::vector<int> out(sizes_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rank_of(i, t);
  return out;
}

std::vector<int> local_ranks_of_global(std::span<const ClientBundle> bundles,
                                       StratumKey stratum, int k_global,
                                       RankMode mode) {
  const StratumIndex idx(bundles, {stratum}, mode);
  const auto r = idx.local_ranks(k_global);
  return {r.begin(), r.end()};
}

// --- standalone bounds ----------------------------------------------------

RngStream draw_stream(const RngStream& rng, DrawRole role, int group) {
  return rng.derive({static_cast<std::uint64_t>(role), static_cast<std::uint64_t>(group)});
}

namespace {

std::vector<int> shifted_ranks(const GroupRanks& g, double epsilon, bool upper) {
  std::vector<int> r(g.local.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = upper ? bound_upper_rank(g.local[i], g.sizes[i], epsilon)
                 : bound_lower_rank(g.local[i], g.sizes[i], epsilon);
  }
  return r;
}

void check_group(const GroupRanks& g) {
  if (g.local.size() != g.sizes.size() || g.local.size() != g.weights.size()) {
    throw Error(ErrorCode::kInvalidArgument, "group ranks, sizes and weights differ in length");
  }
  for (std::size_t i = 0; i < g.local.size(); ++i) {
    if (g.local[i] < 0 || g.local[i] > g.sizes[i]) {
      throw Error(ErrorCode::kInvalidArgument,
                  "local rank " + std::to_string(g.local[i]) + " outside [0," +
                      std::to_string(g.sizes[i]) + "]");
    }
  }
}

struct SideDraws {
  std::vector<float> up;
  std::vector<float> lo;
};

SideDraws side_draws(const GroupRanks& g, double epsilon, int mc,
                     const RngStream& rng, DrawRole role, int group) {
  check_group(g);
  const MixtureSampler s(g.sizes, g.weights, mc, draw_stream(rng, role, group));
  return {s.mixture(shifted_ranks(g, epsilon, true)),
          s.mixture(shifted_ranks(g, epsilon, false))};
}

void add_term(BoundResult& r, const HEstimate& h) {
  r.h_terms.push_back(h.value);
  r.h_std_errors.push_back(h.std_error);
  r.L += h.value;
}

// q * cross - p * ref, rounded in float like the engine
std::vector<float> dea_combine(std::span<const float> cross, std::span<const float> ref,
                               double p) {
  const auto pf = static_cast<float>(p);
  const auto qf = static_cast<float>(1.0 - p);
  std::vector<float> out(cross.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    const float a = qf * cross[j];
    const float b = pf * ref[j];
    out[j] = a - b;
  }
  return out;
}

void validate_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "alpha must be in (0,1)");
  }
}

}  // namespace

BoundResult bound_deoo(const GroupRanks& g0, const GroupRanks& g1,
                       double alpha, double epsilon, int mc,
                       const RngStream& rng) {
  validate_alpha(alpha);
  const SideDraws d0 = side_draws(g0, epsilon, mc, rng, DrawRole::kReference, 0);
  const SideDraws d1 = side_draws(g1, epsilon, mc, rng, DrawRole::kReference, 1);
  BoundResult r;
  add_term(r, h_from_draws(d0.up, d1.lo, alpha));
  add_term(r, h_from_draws(d1.up, d0.lo, alpha));
  return r;
}

BoundResult bound_deo(const GroupRanks& ref0, const GroupRanks& ref1,
                      const GroupRanks& cross0, const GroupRanks& cross1,
                      double alpha1, double alpha2, double epsilon, int mc,
                      const RngStream& rng) {
  validate_alpha(alpha1);
  validate_alpha(alpha2);
  const SideDraws d0 = side_draws(ref0, epsilon, mc, rng, DrawRole::kReference, 0);
  const SideDraws d1 = side_draws(ref1, epsilon, mc, rng, DrawRole::kReference, 1);
  const SideDraws c0 = side_draws(cross0, epsilon, mc, rng, DrawRole::kCross, 0);
  const SideDraws c1 = side_draws(cross1, epsilon, mc, rng, DrawRole::kCross, 1);
  BoundResult r;
  add_term(r, h_from_draws(d0.up, d1.lo, alpha1));
  add_term(r, h_from_draws(d1.up, d0.lo, alpha1));
  add_term(r, h_from_draws(c0.up, c1.lo, alpha2));
  add_term(r, h_from_draws(c1.up, c0.lo, alpha2));
  return r;
}

BoundResult bound_ddp(const GroupRanks& pooled0, const GroupRanks& pooled1,
                      double alpha, double epsilon, int mc,
                      const RngStream& rng) {
  return bound_deoo(pooled0, pooled1, alpha, epsilon, mc, rng);
}

BoundResult bound_dpe(const GroupRanks& neg0, const GroupRanks& neg1,
                      double alpha, double epsilon, int mc,
                      const RngStream& rng) {
  return bound_deoo(neg0, neg1, alpha, epsilon, mc, rng);
}

BoundResult bound_dea(const GroupRanks& ref0, const GroupRanks& ref1,
                      const GroupRanks& cross0, const GroupRanks& cross1,
                      std::span<const double> p_Y, double alpha,
                      double epsilon, int mc, const RngStream& rng) {
  validate_alpha(alpha);
  if (p_Y.size() != 2) throw Error(ErrorCode::kInvalidArgument, "dea needs two group rates");
  const SideDraws d0 = side_draws(ref0, epsilon, mc, rng, DrawRole::kReference, 0);
  const SideDraws d1 = side_draws(ref1, epsilon, mc, rng, DrawRole::kReference, 1);
  const SideDraws c0 = side_draws(cross0, epsilon, mc, rng, DrawRole::kCross, 0);
  const SideDraws c1 = side_draws(cross1, epsilon, mc, rng, DrawRole::kCross, 1);
  const double p0 = p_Y[0];
  const double p1 = p_Y[1];
  BoundResult r;
  add_term(r, h_from_draws(dea_combine(c1.up, d1.lo, p1), dea_combine(c0.lo, d0.up, p0),
                           alpha - p1 + p0));
  add_term(r, h_from_draws(dea_combine(c0.up, d0.lo, p0), dea_combine(c1.lo, d1.up, p1),
                           alpha - p0 + p1));
  return r;
}

BoundResult bound_deoom(std::span<const GroupRanks> groups, double alpha,
                        double epsilon, int mc, const RngStream& rng) {
  validate_alpha(alpha);
  if (groups.size() < 2) throw Error(ErrorCode::kInvalidArgument, "deoom needs at least two groups");
  std::vector<SideDraws> d;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    d.push_back(side_draws(groups[g], epsilon, mc, rng, DrawRole::kReference, static_cast<int>(g)));
  }
  BoundResult r;
  for (std::size_t a = 1; a < groups.size(); ++a) {
    add_term(r, h_from_draws(d[0].up, d[a].lo, alpha));
    add_term(r, h_from_draws(d[a].up, d[0].lo, alpha));
  }
  return r;
}

double RankCandidate::asymmetry() const {
  double even = 0.0;
  double odd = 0.0;
  for (std::size_t t = 0; t < h_terms.size(); ++t) (t % 2 == 0 ? even : odd) += h_terms[t];
  return std::abs(even - odd);
}

// --- mu map ---------------------------------------------------------------

std::optional<double> mu_threshold(double t1, const AggregateProbs& agg) {
  if (agg.p_a.size() < 2) return std::nullopt;
  if (!(t1 > 0.0 && t1 < 1.0)) return std::nullopt;
  const double x0 = agg.p_a[0] * agg.p_Y_a[0];
  const double x1 = agg.p_a[1] * agg.p_Y_a[1];
  if (x0 <= 1e-12 || x1 <= 1e-12) return std::nullopt;
  const double den = 2.0 * x0 + 2.0 * x1 - x1 / t1;
  if (den <= 1e-12) return std::nullopt;
  const double t0 = x0 / den;
  if (!(t0 > 0.0 && t0 < 1.0)) return std::nullopt;
  return t0;
}

std::optional<int> mu_map(double t1, std::span<const Threshold> group0,
                          const AggregateProbs& agg) {
  const auto t0 = mu_threshold(t1, agg);
  if (!t0 || group0.empty()) return std::nullopt;
  const auto less = [](const Threshold& a, double v) { return a.value < v; };
  const auto first_of = [&](double v) {
    return static_cast<int>(std::lower_bound(group0.begin(), group0.end(), v, less) - group0.begin());
  };
  const int above = first_of(*t0);  // first index with value >= t0
  if (above == 0) return 1;
  const int n = static_cast<int>(group0.size());
  const int below = first_of(group0[above - 1].value);  // smallest index of that value
  if (above == n) return below + 1;
  const double d_below = *t0 - group0[below].value;
  const double d_above = group0[above].value - *t0;
  return (d_below <= d_above ? below : above) + 1;
}

// --- engine ---------------------------------------------------------------

namespace {

enum VecKind : int { kRefUp, kRefLo, kCrossUp, kCrossLo, kDeaPos, kDeaNeg, kNumKinds };

struct Term {
  VecKind a;
  int ga;
  VecKind b;
  int gb;
  double threshold;
};

}  // namespace

RankContext::RankContext(std::span<const ClientBundle> bundles, Notion notion,
                         RankMode mode)
    : notion_(notion), mode_(mode) {
  groups_ = num_groups_of(bundles);
  clients_ = bundles.size();
  if (notion_ != Notion::kDEOOM && groups_ != 2) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(notion_name(notion_)) + " needs exactly two groups, data has " +
                    std::to_string(groups_));
  }
  for (const ClientBundle& b : bundles) b.validate();
  bits_ = bundles.front().sketch({1, 0}).universe_bits();
  weights_ = estimate_mixture_weights(bundles);
  probs_ = estimate_group_probs(bundles, false);
  agg_ = aggregate_probs(probs_, weights_.pi);
  for (int y = 0; y <= 1; ++y) {
    for (int g = 0; g < groups_; ++g) {
      strata_.emplace_back(bundles, std::vector<StratumKey>{{y, g}}, mode_);
    }
  }
  if (notion_ == Notion::kDDP) {
    for (int g = 0; g < groups_; ++g) {
      pooled_.emplace_back(bundles, std::vector<StratumKey>{{0, g}, {1, g}}, mode_);
    }
  }
}

const StratumIndex& RankContext::defining(int g) const {
  switch (notion_) {
    case Notion::kDDP:
      return pooled_.at(static_cast<std::size_t>(g));
    case Notion::kDPE:
      return stratum(0, g);
    default:
      return stratum(1, g);
  }
}

const StratumIndex& RankContext::stratum(int y, int g) const {
  if (g < 0 || g >= groups_ || y < 0 || y > 1) {
    throw Error(ErrorCode::kInvalidArgument, "stratum out of range");
  }
  return strata_[static_cast<std::size_t>(y * groups_ + g)];
}

std::uint64_t RankContext::grid_size() const {
  std::uint64_t n = 1;
  for (int g = 0; g < groups_; ++g) n *= static_cast<std::uint64_t>(defining(g).total());
  return n;
}

struct CertifyEngine::Impl {
  FairnessSpec spec;
  RankContext ctx;
  RngStream rng;
  int groups = 0;
  std::size_t clients = 0;
  std::vector<const StratumIndex*> def;
  std::vector<MixtureSampler> ref;
  std::vector<MixtureSampler> cross;
  std::vector<std::vector<int>> cross_ranks;  // [g][(k-1)*S + i]
  std::vector<Term> terms;
  bool monotone = true;
  // cache[kind][g][k]
  std::vector<std::vector<std::vector<std::vector<float>>>> cache;

  Impl(std::span<const ClientBundle> bundles, FairnessSpec s, RankMode m, const RngStream& r)
      : spec((s.validate(), std::move(s))), ctx(bundles, spec.notion, m), rng(r) {
    groups = ctx.num_groups();
    clients = ctx.num_clients();
    for (int g = 0; g < groups; ++g) def.push_back(&ctx.defining(g));
    const AggregateProbs& agg = ctx.aggregates();

    const bool needs_cross = spec.notion == Notion::kDEO || spec.notion == Notion::kDEA;
    for (int g = 0; g < groups; ++g) {
      const StratumIndex& d = *def[g];
      ref.emplace_back(d.sizes(), std::vector<double>(d.weights().begin(), d.weights().end()),
                       spec.mc_samples, draw_stream(rng, DrawRole::kReference, g));
      if (needs_cross) {
        const StratumIndex& c = ctx.stratum(0, g);
        cross.emplace_back(c.sizes(), std::vector<double>(c.weights().begin(), c.weights().end()),
                           spec.mc_samples, draw_stream(rng, DrawRole::kCross, g));
        std::vector<int> cr(static_cast<std::size_t>(d.total()) * clients);
        for (int k = 1; k <= d.total(); ++k) {
          const Threshold t = d.threshold(k);
          for (std::size_t i = 0; i < clients; ++i) {
            cr[static_cast<std::size_t>(k - 1) * clients + i] = c.rank_of(i, t);
          }
        }
        cross_ranks.push_back(std::move(cr));
      }
    }

    const double a1 = spec.alpha[0];
    switch (spec.notion) {
      case Notion::kDEOO:
      case Notion::kDDP:
      case Notion::kDPE:
        terms = {{kRefUp, 0, kRefLo, 1, a1}, {kRefUp, 1, kRefLo, 0, a1}};
        break;
      case Notion::kDEO: {
        const double a2 = spec.alpha[1];
        terms = {{kRefUp, 0, kRefLo, 1, a1},
                 {kRefUp, 1, kRefLo, 0, a1},
                 {kCrossUp, 0, kCrossLo, 1, a2},
                 {kCrossUp, 1, kCrossLo, 0, a2}};
        break;
      }
      case Notion::kDEA: {
        const double p0 = agg.p_Y_a[0];
        const double p1 = agg.p_Y_a[1];
        terms = {{kDeaPos, 1, kDeaNeg, 0, a1 - p1 + p0}, {kDeaPos, 0, kDeaNeg, 1, a1 - p0 + p1}};
        monotone = false;
        break;
      }
      case Notion::kDEOOM:
        for (int a = 1; a < groups; ++a) {
          terms.push_back({kRefUp, 0, kRefLo, a, a1});
          terms.push_back({kRefUp, a, kRefLo, 0, a1});
        }
        break;
    }

    cache.resize(kNumKinds);
    for (auto& per_kind : cache) {
      per_kind.resize(groups);
      for (int g = 0; g < groups; ++g) per_kind[g].resize(static_cast<std::size_t>(def[g]->total()) + 1);
    }
  }

  std::span<const int> cross_local(int g, int k) const {
    return std::span<const int>(cross_ranks[g]).subspan(static_cast<std::size_t>(k - 1) * clients, clients);
  }

  std::vector<int> shifted(std::span<const int> local, std::span<const int> sizes, bool upper) const {
    std::vector<int> r(local.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = upper ? bound_upper_rank(local[i], sizes[i], spec.epsilon)
                   : bound_lower_rank(local[i], sizes[i], spec.epsilon);
    }
    return r;
  }

  const std::vector<float>& vec(VecKind kind, int g, int k) {
    std::vector<float>& slot = cache[kind][g][k];
    if (!slot.empty()) return slot;
    const StratumIndex& d = *def[g];
    switch (kind) {
      case kRefUp:
      case kRefLo:
        slot = ref[g].mixture(shifted(d.local_ranks(k), d.sizes(), kind == kRefUp));
        break;
      case kCrossUp:
      case kCrossLo:
        slot = cross[g].mixture(shifted(cross_local(g, k), ctx.stratum(0, g).sizes(), kind == kCrossUp));
        break;
      case kDeaPos:
        slot = dea_combine(vec(kCrossUp, g, k), vec(kRefLo, g, k), ctx.aggregates().p_Y_a[g]);
        break;
      case kDeaNeg:
        slot = dea_combine(vec(kCrossLo, g, k), vec(kRefUp, g, k), ctx.aggregates().p_Y_a[g]);
        break;
      case kNumKinds:
        break;
    }
    return slot;
  }

  std::span<const float> term_a(const Term& t, std::span<const int> ranks) {
    return vec(t.a, t.ga, ranks[t.ga]);
  }
  std::span<const float> term_b(const Term& t, std::span<const int> ranks) {
    return vec(t.b, t.gb, ranks[t.gb]);
  }

  HEstimate term_h(const Term& t, std::span<const int> ranks) {
    return h_from_draws(term_a(t, ranks), term_b(t, ranks), t.threshold);
  }

  double budget() const { return 1.0 - spec.beta; }

  static std::size_t count_limit(double remaining, int mc) {
    if (remaining <= 0.0) return 0;
    return static_cast<std::size_t>(std::floor(remaining * mc)) + 2;
  }

  // True when the single term is below 1 - beta.
  bool term_passes(const Term& t, std::span<const int> ranks) {
    const std::size_t lim = count_limit(budget(), spec.mc_samples);
    const std::size_t c = kernels::count_diff_ge_capped(term_a(t, ranks), term_b(t, ranks),
                                                        static_cast<float>(t.threshold), lim);
    if (c >= lim) return false;
    return static_cast<double>(c) / spec.mc_samples < budget();
  }

  // Full evaluation with early rejection; fills result only when accepted.
  bool evaluate_cell(std::span<const int> ranks, BoundResult& out) {
    out.L = 0.0;
    out.h_terms.clear();
    out.h_std_errors.clear();
    for (const Term& t : terms) {
      const std::size_t lim = count_limit(budget() - out.L, spec.mc_samples);
      if (lim == 0) return false;
      const std::size_t c = kernels::count_diff_ge_capped(term_a(t, ranks), term_b(t, ranks),
                                                          static_cast<float>(t.threshold), lim);
      if (c >= lim) return false;
      const double h = static_cast<double>(c) / spec.mc_samples;
      out.h_terms.push_back(h);
      out.h_std_errors.push_back(binomial_std_error(h, spec.mc_samples));
      out.L += h;
      if (!(out.L < budget())) return false;
    }
    return true;
  }

  RankCandidate make_candidate(std::span<const int> ranks, BoundResult&& r) const {
    RankCandidate c;
    c.global_ranks.assign(ranks.begin(), ranks.end());
    c.local_ranks.resize(groups);
    for (int g = 0; g < groups; ++g) {
      const auto l = def[g]->local_ranks(ranks[g]);
      c.local_ranks[g].assign(l.begin(), l.end());
    }
    c.L_value = r.L;
    c.h_terms = std::move(r.h_terms);
    c.h_std_errors = std::move(r.h_std_errors);
    return c;
  }

  std::optional<int> mu(int k1) const {
    return mu_map(def[1]->threshold(k1).value, def[0]->thresholds(), ctx.aggregates());
  }

  SearchStats search_two(SearchStrategy search, const std::function<void(const RankCandidate&)>& sink) {
    SearchStats st;
    const int n0 = def[0]->total();
    const int n1 = def[1]->total();
    st.grid_size = static_cast<std::uint64_t>(n0) * static_cast<std::uint64_t>(n1);
    bool use_mu = search.mode == SearchMode::kMuRestricted;
    if (use_mu && spec.notion != Notion::kDEOO) {
      use_mu = false;
      st.diagnostic = "mu-restricted search is defined for deoo; evaluated the full grid";
    }
    std::array<int, 2> ranks{};
    BoundResult r;
    const auto try_cell = [&](int k0, int k1) {
      ranks = {k0, k1};
      ++st.cells_evaluated;
      if (evaluate_cell(ranks, r)) {
        ++st.accepted;
        sink(make_candidate(ranks, std::move(r)));
      }
    };
    for (int k1 = 1; k1 <= n1; ++k1) {
      if (use_mu) {
        if (const auto k0 = mu(k1)) {
          try_cell(*k0, k1);
          continue;
        }
        ++st.mu_fallbacks;
      }
      int lo = 1;
      int hi = n0;
      bool empty = false;
      if (monotone) {
        for (const Term& t : terms) {
          const auto passes = [&](int k0) {
            ranks = {k0, k1};
            ++st.cells_evaluated;
            return term_passes(t, ranks);
          };
          if (t.ga == 0) {
            // nondecreasing in k0
            if (!passes(lo)) {
              empty = true;
              break;
            }
            int l = lo;
            int h = hi;
            while (l < h) {
              const int mid = l + (h - l + 1) / 2;
              if (passes(mid)) {
                l = mid;
              } else {
                h = mid - 1;
              }
            }
            hi = l;
          } else if (t.gb == 0) {
            if (!passes(hi)) {
              empty = true;
              break;
            }
            int l = lo;
            int h = hi;
            while (l < h) {
              const int mid = l + (h - l) / 2;
              if (passes(mid)) {
                h = mid;
              } else {
                l = mid + 1;
              }
            }
            lo = l;
          }
        }
      }
      if (empty) continue;
      for (int k0 = lo; k0 <= hi; ++k0) try_cell(k0, k1);
    }
    return st;
  }

  SearchStats search_multi(const std::function<void(const RankCandidate&)>& sink) {
    SearchStats st;
    st.grid_size = 1;
    for (int g = 0; g < groups; ++g) st.grid_size *= static_cast<std::uint64_t>(def[g]->total());
    const int mc = spec.mc_samples;
    struct Option {
      int k;
      double h_minus;  // term (ref0 up - ref_a lo)
      double h_plus;   // term (ref_a up - ref0 lo)
    };
    std::vector<RankCandidate> found;
    std::vector<int> ranks(groups, 1);
    std::vector<std::vector<Option>> options(groups);
    for (int k0 = 1; k0 <= def[0]->total(); ++k0) {
      ranks[0] = k0;
      bool feasible = true;
      for (int a = 1; a < groups && feasible; ++a) {
        const Term& t_minus = terms[2 * (a - 1)];
        const Term& t_plus = terms[2 * (a - 1) + 1];
        const auto passes = [&](const Term& t, int ka) {
          ranks[a] = ka;
          ++st.cells_evaluated;
          return term_passes(t, ranks);
        };
        int lo = 1;
        int hi = def[a]->total();
        // t_minus falls with k_a, t_plus rises
        if (!passes(t_minus, hi) || !passes(t_plus, lo)) {
          feasible = false;
          break;
        }
        int l = lo;
        int h = hi;
        while (l < h) {
          const int mid = l + (h - l) / 2;
          if (passes(t_minus, mid)) {
            h = mid;
          } else {
            l = mid + 1;
          }
        }
        lo = l;
        l = lo;
        h = hi;
        while (l < h) {
          const int mid = l + (h - l + 1) / 2;
          if (passes(t_plus, mid)) {
            l = mid;
          } else {
            h = mid - 1;
          }
        }
        hi = l;
        options[a].clear();
        for (int ka = lo; ka <= hi; ++ka) {
          ranks[a] = ka;
          ++st.cells_evaluated;
          const std::size_t hm = kernels::count_diff_ge(term_a(t_minus, ranks), term_b(t_minus, ranks),
                                                        static_cast<float>(t_minus.threshold));
          const std::size_t hp = kernels::count_diff_ge(term_a(t_plus, ranks), term_b(t_plus, ranks),
                                                        static_cast<float>(t_plus.threshold));
          const double vm = static_cast<double>(hm) / mc;
          const double vp = static_cast<double>(hp) / mc;
          if (vm + vp < budget()) options[a].push_back({ka, vm, vp});
        }
        if (options[a].empty()) feasible = false;
      }
      if (!feasible) continue;
      std::vector<double> min_rest(groups + 1, 0.0);
      for (int a = groups - 1; a >= 1; --a) {
        double best = 2.0;
        for (const Option& o : options[a]) best = std::min(best, o.h_minus + o.h_plus);
        min_rest[a] = min_rest[a + 1] + best;
      }
      BoundResult partial;
      const std::function<void(int)> dfs = [&](int a) {
        if (a == groups) {
          BoundResult r = partial;
          ++st.accepted;
          found.push_back(make_candidate(ranks, std::move(r)));
          return;
        }
        for (const Option& o : options[a]) {
          double L = partial.L + o.h_minus;
          L += o.h_plus;
          if (!(L < budget())) continue;
          // loose lower bound on what later groups must add
          if (L + min_rest[a + 1] >= budget() + 1e-9) continue;
          ranks[a] = o.k;
          const BoundResult saved = partial;
          partial.h_terms.push_back(o.h_minus);
          partial.h_terms.push_back(o.h_plus);
          partial.h_std_errors.push_back(binomial_std_error(o.h_minus, mc));
          partial.h_std_errors.push_back(binomial_std_error(o.h_plus, mc));
          partial.L = L;
          dfs(a + 1);
          partial = saved;
        }
      };
      dfs(1);
    }
    std::sort(found.begin(), found.end(), [](const RankCandidate& x, const RankCandidate& y) {
      return std::lexicographical_compare(x.global_ranks.rbegin(), x.global_ranks.rend(),
                                          y.global_ranks.rbegin(), y.global_ranks.rend());
    });
    for (const RankCandidate& c : found) sink(c);
    return st;
  }
};

CertifyEngine::CertifyEngine(std::span<const ClientBundle> bundles, FairnessSpec spec,
                             RankMode mode, const RngStream& rng)
    : impl_(std::make_unique<Impl>(bundles, std::move(spec), mode, rng)) {}

CertifyEngine::~CertifyEngine() = default;
CertifyEngine::CertifyEngine(CertifyEngine&&) noexcept = default;
CertifyEngine& CertifyEngine::operator=(CertifyEngine&&) noexcept = default;

const FairnessSpec& CertifyEngine::spec() const noexcept { return impl_->spec; }
const RankContext& CertifyEngine::context() const noexcept { return impl_->ctx; }

BoundResult CertifyEngine::evaluate(std::span<const int> global_ranks) {
  if (global_ranks.size() != static_cast<std::size_t>(impl_->groups)) {
    throw Error(ErrorCode::kInvalidArgument, "rank tuple has the wrong number of groups");
  }
  for (int g = 0; g < impl_->groups; ++g) impl_->def[g]->threshold(global_ranks[g]);  // range check
  BoundResult r;
  for (const Term& t : impl_->terms) add_term(r, impl_->term_h(t, global_ranks));
  return r;
}

std::optional<int> CertifyEngine::mu(int k1) const {
  if (impl_->groups != 2) return std::nullopt;
  return impl_->mu(k1);
}

SearchStats CertifyEngine::for_each_candidate(
    SearchStrategy search, const std::function<void(const RankCandidate&)>& sink) {
  SearchStats st = impl_->spec.notion == Notion::kDEOOM ? impl_->search_multi(sink)
                                                        : impl_->search_two(search, sink);
  if (impl_->spec.notion == Notion::kDEOOM && search.mode == SearchMode::kMuRestricted) {
    st.diagnostic = "mu-restricted search is defined for deoo; evaluated the full grid";
  }
  if (st.accepted == 0) {
    if (!st.diagnostic.empty()) st.diagnostic += "; ";
    st.diagnostic += "no rank tuple satisfies L < 1 - beta";
  }
  return st;
}

std::vector<RankCandidate> build_candidate_set(std::span<const ClientBundle> bundles,
                                               const FairnessSpec& spec, RankMode mode,
                                               SearchStrategy search, const RngStream& rng,
                                               SearchStats* stats) {
  CertifyEngine engine(bundles, spec, mode, rng);
  std::vector<RankCandidate> out;
  const SearchStats st =
      engine.for_each_candidate(search, [&](const RankCandidate& c) { out.push_back(c); });
  if (stats) *stats = st;
  return out;
}

}  // namespace fedfair
