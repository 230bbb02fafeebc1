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

#include "fedfair/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedfair/error.hpp"

namespace fedfair {

std::string to_string(StratumKey key) {
  return "(y=" + std::to_string(key.y) + ",a=" + std::to_string(key.a) + ")";
}

void validate_sample(const ScoredSample& s, int num_clients, int num_groups) {
  if (s.client < 0 || s.client >= num_clients) {
    throw Error(ErrorCode::kInvalidArgument,
                "client " + std::to_string(s.client) + " outside [0," +
                    std::to_string(num_clients) + ")");
  }
  if (s.y != 0 && s.y != 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "label y must be 0 or 1, got " + std::to_string(s.y));
  }
  if (s.a < 0 || s.a >= num_groups) {
    throw Error(ErrorCode::kInvalidArgument,
                "group a=" + std::to_string(s.a) + " outside [0," +
                    std::to_string(num_groups) + ")");
  }
  if (!(s.score >= 0.0 && s.score <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "score " + std::to_string(s.score) + " outside [0,1]");
  }
}

std::uint64_t ClientBundle::count(StratumKey key) const {
  auto it = counts.find(key);
  return it == counts.end() ? 0 : it->second;
}

std::uint64_t ClientBundle::total() const {
  std::uint64_t t = 0;
  for (const auto& [k, c] : counts) t += c;
  return t;
}

const QuantileSketch& ClientBundle::sketch(StratumKey key) const {
  auto it = sketches.find(key);
  if (it == sketches.end()) {
    throw Error(ErrorCode::kInvalidArgument, "client " + std::to_string(client) +
                                                 " has no sketch for " +
                                                 to_string(key));
  }
  return it->second;
}

std::span<const double> ClientBundle::scores(StratumKey key) const {
  if (!sorted_scores) {
    throw Error(ErrorCode::kInvalidArgument,
                "exact mode needs sorted scores; client " +
                    std::to_string(client) + " uploaded only sketches");
  }
  auto it = sorted_scores->find(key);
  if (it == sorted_scores->end()) return {};
  return it->second;
}

void ClientBundle::validate() const {
  const auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument,
                "client " + std::to_string(client) + ": " + what);
  };
  if (num_groups < 2) fail("num_groups must be at least 2");
  std::optional<SketchParams> params;
  for (int y = 0; y <= 1; ++y) {
    for (int a = 0; a < num_groups; ++a) {
      const StratumKey key{y, a};
      const std::uint64_t n = count(key);
      auto sk = sketches.find(key);
      if (sk == sketches.end()) fail("missing sketch for " + to_string(key));
      if (sk->second.total() != n) fail("sketch total disagrees with count for " + to_string(key));
      if (params && !(*params == sk->second.params())) {
        fail("strata use different sketch parameters");
      }
      params = sk->second.params();
      if (sorted_scores) {
        auto sc = sorted_scores->find(key);
        const std::size_t len = sc == sorted_scores->end() ? 0 : sc->second.size();
        if (len != n) fail("score list length disagrees with count for " + to_string(key));
        if (sc != sorted_scores->end() &&
            !std::is_sorted(sc->second.begin(), sc->second.end())) {
          fail("scores not sorted for " + to_string(key));
        }
      }
    }
  }
  for (const auto& [key, c] : counts) {
    if (key.y < 0 || key.y > 1 || key.a < 0 || key.a >= num_groups) {
      fail("stratum out of range " + to_string(key));
    }
  }
}

std::vector<ClientBundle> make_bundles(std::span<const ScoredSample> samples,
                                       int num_clients, int num_groups,
                                       SketchParams params, bool keep_exact) {
  params.validate();
  if (num_clients < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one client");
  if (num_groups < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two groups");
  std::vector<std::map<StratumKey, std::vector<double>>> buckets(num_clients);
  for (const ScoredSample& s : samples) {
    validate_sample(s, num_clients, num_groups);
    buckets[s.client][{s.y, s.a}].push_back(s.score);
  }
  std::vector<ClientBundle> out(num_clients);
  for (int i = 0; i < num_clients; ++i) {
    ClientBundle& b = out[i];
    b.client = i;
    b.num_groups = num_groups;
    if (keep_exact) b.sorted_scores.emplace();
    for (int y = 0; y <= 1; ++y) {
      for (int a = 0; a < num_groups; ++a) {
        const StratumKey key{y, a};
        std::vector<double>& v = buckets[i][key];
        std::sort(v.begin(), v.end());
        b.counts[key] = v.size();
        b.sketches.emplace(key, QuantileSketch::build(v, params));
        if (keep_exact) (*b.sorted_scores)[key] = std::move(v);
      }
    }
  }
  return out;
}

int num_groups_of(std::span<const ClientBundle> bundles) {
  if (bundles.empty()) throw Error(ErrorCode::kInvalidArgument, "no client bundles");
  const int g = bundles.front().num_groups;
  for (const ClientBundle& b : bundles) {
    if (b.num_groups != g) {
      throw Error(ErrorCode::kInvalidArgument, "bundles disagree on the number of groups");
    }
  }
  return g;
}

MixtureWeights estimate_mixture_weights(std::span<const ClientBundle> bundles) {
  const int groups = num_groups_of(bundles);
  const std::size_t s = bundles.size();
  MixtureWeights w;
  std::uint64_t n = 0;
  for (const ClientBundle& b : bundles) n += b.total();
  if (n == 0) throw Error(ErrorCode::kEmptyGlobalStratum, "no samples on any client");
  w.pi.resize(s);
  for (std::size_t i = 0; i < s; ++i) {
    w.pi[i] = static_cast<double>(bundles[i].total()) / static_cast<double>(n);
  }
  for (int y = 0; y <= 1; ++y) {
    for (int a = 0; a < groups; ++a) {
      const StratumKey key{y, a};
      std::uint64_t ns = 0;
      for (const ClientBundle& b : bundles) ns += b.count(key);
      if (ns == 0) {
        throw Error(ErrorCode::kEmptyGlobalStratum,
                    "stratum " + to_string(key) + " is empty on every client");
      }
      std::vector<double>& v = w.pi_stratum[key];
      v.resize(s);
      for (std::size_t i = 0; i < s; ++i) {
        v[i] = static_cast<double>(bundles[i].count(key)) / static_cast<double>(ns);
      }
    }
  }
  return w;
}

GroupProbabilities estimate_group_probs(std::span<const ClientBundle> bundles,
                                        bool strict) {
  const int groups = num_groups_of(bundles);
  GroupProbabilities g;
  g.p_a.resize(bundles.size());
  g.p_Y_a.resize(bundles.size());
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const ClientBundle& b = bundles[i];
    const std::uint64_t n = b.total();
    if (n == 0) {
      throw Error(ErrorCode::kEmptyStratum,
                  "client " + std::to_string(b.client) + " has no samples");
    }
    g.p_a[i].resize(groups);
    g.p_Y_a[i].resize(groups);
    for (int a = 0; a < groups; ++a) {
      const std::uint64_t pos = b.count({1, a});
      const std::uint64_t na = b.count({0, a}) + pos;
      g.p_a[i][a] = static_cast<double>(na) / static_cast<double>(n);
      if (na == 0) {
        if (strict) {
          throw Error(ErrorCode::kEmptyStratum,
                      "client " + std::to_string(b.client) + " has no samples in group " +
                          std::to_string(a));
        }
        g.p_Y_a[i][a] = 0.0;
      } else {
        g.p_Y_a[i][a] = static_cast<double>(pos) / static_cast<double>(na);
      }
    }
  }
  return g;
}

AggregateProbs aggregate_probs(const GroupProbabilities& probs,
                               std::span<const double> pi) {
  if (probs.p_a.size() != pi.size()) {
    throw Error(ErrorCode::kInvalidArgument, "weights and probabilities disagree on client count");
  }
  const std::size_t groups = probs.p_a.empty() ? 0 : probs.p_a.front().size();
  AggregateProbs out;
  out.p_a.assign(groups, 0.0);
  out.p_Y_a.assign(groups, 0.0);
  std::vector<double> joint(groups, 0.0);
  for (std::size_t i = 0; i < pi.size(); ++i) {
    for (std::size_t a = 0; a < groups; ++a) {
      out.p_a[a] += pi[i] * probs.p_a[i][a];
      joint[a] += pi[i] * probs.p_a[i][a] * probs.p_Y_a[i][a];
    }
  }
  for (std::size_t a = 0; a < groups; ++a) {
    out.p_Y_a[a] = out.p_a[a] > 0.0 ? joint[a] / out.p_a[a] : 0.0;
  }
  return out;
}

std::string_view notion_name(Notion n) {
  switch (n) {
    case Notion::kDEOO:
      return "deoo";
    case Notion::kDEO:
      return "deo";
    case Notion::kDDP:
      return "ddp";
    case Notion::kDPE:
      return "dpe";
    case Notion::kDEA:
      return "dea";
    case Notion::kDEOOM:
      return "deoom";
  }
  return "unknown";
}

Notion parse_notion(std::string_view text) {
  for (Notion n : {Notion::kDEOO, Notion::kDEO, Notion::kDDP, Notion::kDPE,
                   Notion::kDEA, Notion::kDEOOM}) {
    if (text == notion_name(n)) return n;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown notion '" + std::string(text) + "'");
}

void FairnessSpec::validate() const {
  const std::size_t want = notion == Notion::kDEO ? 2 : 1;
  if (alpha.size() != want) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(notion_name(notion)) + " needs " + std::to_string(want) +
                    " alpha value(s), got " + std::to_string(alpha.size()));
  }
  for (double a : alpha) {
    if (!(a > 0.0 && a < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "alpha must be in (0,1), got " + std::to_string(a));
    }
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "beta must be in (0,1), got " + std::to_string(beta));
  }
  if (mc_samples < 1) {
    throw Error(ErrorCode::kInvalidArgument, "mc_samples must be positive");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "epsilon must be in [0,1], got " + std::to_string(epsilon));
  }
}

}  // namespace fedfair
