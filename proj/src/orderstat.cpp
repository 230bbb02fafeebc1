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

#include "fedfair/orderstat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fedfair/error.hpp"
#include "fedfair/kernels/kernels.hpp"

namespace fedfair {

void BetaRankSpec::validate() const {
  if (ranks.size() != sizes.size() || ranks.size() != weights.size()) {
    throw Error(ErrorCode::kInvalidArgument, "rank spec vectors differ in length");
  }
  if (ranks.empty()) throw Error(ErrorCode::kInvalidArgument, "rank spec has no clients");
  double sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (sizes[i] < 0) throw Error(ErrorCode::kInvalidArgument, "negative stratum size");
    if (ranks[i] < 0 || ranks[i] > sizes[i] + 1) {
      throw Error(ErrorCode::kInvalidArgument,
                  "rank " + std::to_string(ranks[i]) + " outside [0," +
                      std::to_string(sizes[i] + 1) + "]");
    }
    if (!(weights[i] >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative weight");
    sum += weights[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "weights sum to " + std::to_string(sum));
  }
}

namespace {

// U_(u) of n uniforms as S_u / S_{n+1} with S the partial sums of n+1
// exponential spacings.
double order_stat_draw(int u, int n, RngStream& rng) {
  if (u <= 0) return 0.0;
  if (u >= n + 1) return 1.0;
  double head = 0.0;
  double tail = 0.0;
  for (int l = 0; l <= n; ++l) {
    const double e = rng.exponential();
    (l < u ? head : tail) += e;
  }
  return head / (head + tail);
}

}  // namespace

double sample_mixture(const BetaRankSpec& spec, RngStream& rng) {
  double x = 0.0;
  for (std::size_t i = 0; i < spec.clients(); ++i) {
    x += spec.weights[i] * order_stat_draw(spec.ranks[i], spec.sizes[i], rng);
  }
  return std::clamp(x, 0.0, 1.0);
}

OrderStatTable::OrderStatTable(int n, int mc, RngStream rng) : n_(n), mc_(mc) {
  if (n < 0 || mc < 1) throw Error(ErrorCode::kInvalidArgument, "bad order-statistic table shape");
  const auto stride = static_cast<std::size_t>(mc);
  data_.assign(static_cast<std::size_t>(n + 2) * stride, 0.0f);
  std::vector<double> partial(static_cast<std::size_t>(n) + 1);
  for (std::size_t j = 0; j < stride; ++j) {
    double s = 0.0;
    for (int l = 0; l <= n; ++l) {
      s += rng.exponential();
      partial[l] = s;
    }
    const double total = partial[n];
    for (int u = 1; u <= n; ++u) {
      data_[static_cast<std::size_t>(u) * stride + j] =
          static_cast<float>(partial[u - 1] / total);
    }
    data_[static_cast<std::size_t>(n + 1) * stride + j] = 1.0f;
  }
}

std::span<const float> OrderStatTable::row(int u) const {
  const int r = std::clamp(u, 0, n_ + 1);
  const auto stride = static_cast<std::size_t>(mc_);
  return std::span<const float>(data_).subspan(static_cast<std::size_t>(r) * stride, stride);
}

MixtureSampler::MixtureSampler(std::span<const int> sizes,
                               std::vector<double> weights, int mc,
                               const RngStream& base)
    : mc_(mc), weights_(std::move(weights)) {
  if (sizes.size() != weights_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "sampler sizes and weights differ in length");
  }
  tables_.reserve(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    // clients without weight never contribute; keep a one-row stub
    const int n = weights_[i] > 0.0 ? sizes[i] : 0;
    tables_.emplace_back(n, mc, base.derive({static_cast<std::uint64_t>(i)}));
  }
}

void MixtureSampler::mixture(std::span<const int> ranks, std::span<float> out) const {
  std::fill(out.begin(), out.end(), 0.0f);
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    if (weights_[i] <= 0.0) continue;
    kernels::axpy(out, tables_[i].row(ranks[i]), static_cast<float>(weights_[i]));
  }
}

std::vector<float> MixtureSampler::mixture(std::span<const int> ranks) const {
  std::vector<float> out(static_cast<std::size_t>(mc_));
  mixture(ranks, out);
  return out;
}

double binomial_std_error(double p, int mc) {
  if (mc < 1) return 0.0;
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(mc));
}

HEstimate h_from_draws(std::span<const float> a, std::span<const float> b,
                       double threshold) {
  HEstimate h;
  h.mc = static_cast<int>(a.size());
  h.hits = kernels::count_diff_ge(a, b, static_cast<float>(threshold));
  h.value = a.empty() ? 0.0 : static_cast<double>(h.hits) / static_cast<double>(a.size());
  h.std_error = binomial_std_error(h.value, h.mc);
  return h;
}

HEstimate estimate_h(const BetaRankSpec& a, const BetaRankSpec& b,
                     double alpha, int mc_samples, const RngStream& rng) {
  a.validate();
  b.validate();
  if (mc_samples < 1) throw Error(ErrorCode::kInvalidArgument, "mc_samples must be positive");
  const MixtureSampler sa(a.sizes, a.weights, mc_samples, rng.derive({0}));
  const MixtureSampler sb(b.sizes, b.weights, mc_samples, rng.derive({1}));
  return h_from_draws(sa.mixture(a.ranks), sb.mixture(b.ranks), alpha);
}

namespace {

// Q(u, n+1-u) as either a point mass or a Beta distribution.
struct Marginal {
  bool point = false;
  double at = 0.0;
  boost::math::beta_distribution<double> dist{1.0, 1.0};

  static Marginal of(int u, int n) {
    Marginal m;
    if (u <= 0) {
      m.point = true;
      m.at = 0.0;
    } else if (u >= n + 1) {
      m.point = true;
      m.at = 1.0;
    } else {
      m.dist = boost::math::beta_distribution<double>(u, n + 1 - u);
    }
    return m;
  }

  // P(Q >= x)
  double survival_ge(double x) const {
    if (point) return at >= x ? 1.0 : 0.0;
    if (x <= 0.0) return 1.0;
    if (x >= 1.0) return 0.0;
    return boost::math::cdf(boost::math::complement(dist, x));
  }

  // P(Q <= x)
  double cdf(double x) const {
    if (point) return at <= x ? 1.0 : 0.0;
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return boost::math::cdf(dist, x);
  }
};

}  // namespace

double exact_h_oracle(const BetaRankSpec& a, const BetaRankSpec& b, double alpha) {
  if (a.clients() != 1 || b.clients() != 1) {
    throw Error(ErrorCode::kOracleUnsupported, "the exact oracle handles one client per side");
  }
  a.validate();
  b.validate();
  const Marginal x = Marginal::of(a.ranks[0], a.sizes[0]);
  const Marginal y = Marginal::of(b.ranks[0], b.sizes[0]);
  // P(X - Y >= alpha) = E_Y[P(X >= alpha + Y)]
  if (y.point) return x.survival_ge(alpha + y.at);
  if (x.point) return y.cdf(x.at - alpha);
  const double lo = std::max(0.0, -alpha);
  const double hi = std::min(1.0, 1.0 - alpha);
  if (!(hi > lo)) return alpha <= -1.0 ? 1.0 : 0.0;
  auto integrand = [&](double t) {
    return boost::math::pdf(y.dist, t) * x.survival_ge(alpha + t);
  };
  double err = 0.0;
  double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, lo, hi, 20, 1e-12, &err);
  // mass of Y below lo, where X >= alpha + Y holds surely
  if (lo > 0.0) value += y.cdf(lo);
  return std::clamp(value, 0.0, 1.0);
}

}  // namespace fedfair
