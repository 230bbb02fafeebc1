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
#include <span>
#include <vector>

#include "fedfair/rng.hpp"

namespace fedfair {

/// A weighted mixture sum_i w_i Q_i with Q_i ~ Beta(u_i, n_i + 1 - u_i).
/// u_i = 0 means Q_i = 0 and u_i = n_i + 1 means Q_i = 1.
struct BetaRankSpec {
  std::vector<int> ranks;
  std::vector<int> sizes;
  std::vector<double> weights;

  std::size_t clients() const noexcept { return ranks.size(); }
  void validate() const;
};

/// One mixture draw.
double sample_mixture(const BetaRankSpec& spec, RngStream& rng);

/// Coupled draws of every order statistic of n uniforms: row u holds mc
/// realizations of U_(u) ~ Beta(u, n+1-u), drawn jointly so that row u is
/// pointwise <= row u+1. Row 0 is all zeros and row n+1 all ones.
class OrderStatTable {
 public:
  OrderStatTable(int n, int mc, RngStream rng);

  int size() const noexcept { return n_; }
  int mc() const noexcept { return mc_; }
  std::span<const float> row(int u) const;

 private:
  int n_;
  int mc_;
  std::vector<float> data_;
};

/// Draw tables for every client of one stratum.
class MixtureSampler {
 public:
  MixtureSampler() = default;
  /// Client i uses the stream base.derive({i}).
  MixtureSampler(std::span<const int> sizes, std::vector<double> weights,
                 int mc, const RngStream& base);

  int mc() const noexcept { return mc_; }
  std::size_t clients() const noexcept { return tables_.size(); }
  int size(std::size_t client) const { return tables_[client].size(); }
  std::span<const double> weights() const noexcept { return weights_; }

  /// out[j] = sum_i w_i * row(ranks[i])[j], accumulated in client order.
  void mixture(std::span<const int> ranks, std::span<float> out) const;
  std::vector<float> mixture(std::span<const int> ranks) const;

 private:
  int mc_ = 0;
  std::vector<double> weights_;
  std::vector<OrderStatTable> tables_;
};

struct HEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t hits = 0;
  int mc = 0;
};

/// Binomial standard error sqrt(p(1-p)/mc).
double binomial_std_error(double p, int mc);

/// Fraction of draws with a[j] - b[j] >= threshold.
HEstimate h_from_draws(std::span<const float> a, std::span<const float> b,
                       double threshold);

/// Monte-Carlo estimate of P(X_A - X_B >= alpha). Mixture A draws from
/// rng.derive({0}), mixture B from rng.derive({1}); replaying the same rng
/// replays the same coupled draws.
HEstimate estimate_h(const BetaRankSpec& a, const BetaRankSpec& b,
                     double alpha, int mc_samples, const RngStream& rng);

/// P(X - Y >= alpha) for single-client specs by adaptive quadrature.
/// Throws oracle-unsupported when either spec has more than one client.
double exact_h_oracle(const BetaRankSpec& a, const BetaRankSpec& b,
                      double alpha);

}  // namespace fedfair
