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

#include "fedfair/sketch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "fedfair/error.hpp"

namespace fedfair {
namespace {

constexpr int kMaxUniverseBits = 16;

int node_depth(std::uint64_t id) { return std::bit_width(id) - 1; }

struct NodeRange {
  std::uint32_t lo;
  std::uint32_t hi;
};

NodeRange node_range(std::uint64_t id, int bits) {
  const int d = node_depth(id);
  const int span_bits = bits - d;
  const std::uint64_t lo = (id - (std::uint64_t{1} << d)) << span_bits;
  const std::uint64_t hi = lo + (std::uint64_t{1} << span_bits) - 1;
  return {static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(hi)};
}

std::uint64_t count_or_zero(const QuantileSketch::NodeMap& m, std::uint64_t id) {
  auto it = m.find(id);
  return it == m.end() ? 0 : it->second;
}

}  // namespace

void SketchParams::validate() const {
  if (universe_bits < 1 || universe_bits > kMaxUniverseBits) {
    throw Error(ErrorCode::kInvalidArgument,
                "universe_bits must be in [1, " +
                    std::to_string(kMaxUniverseBits) + "], got " +
                    std::to_string(universe_bits));
  }
  if (compression < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "compression must be positive, got " +
                    std::to_string(compression));
  }
}

std::uint32_t quantize(double score, int universe_bits) {
  const double sigma = std::ldexp(1.0, universe_bits);
  const double scaled = std::floor(score * sigma);
  const double top = sigma - 1.0;
  if (!(scaled > 0.0)) return 0;
  return static_cast<std::uint32_t>(std::min(scaled, top));
}

double bucket_upper_edge(std::uint32_t bucket, int universe_bits) {
  const std::uint32_t sigma = std::uint32_t{1} << universe_bits;
  if (bucket + 1 >= sigma) return 1.0;
  const double edge = std::ldexp(static_cast<double>(bucket + 1), -universe_bits);
  return std::nextafter(edge, 0.0);
}

QuantileSketch::QuantileSketch(SketchParams params) : params_(params) {
  params_.validate();
}

QuantileSketch::QuantileSketch(SketchParams params, std::uint64_t total,
                               NodeMap nodes)
    : params_(params), total_(total), nodes_(std::move(nodes)) {
  params_.validate();
  const std::uint64_t limit = std::uint64_t{2} << params_.universe_bits;
  std::uint64_t sum = 0;
  for (const auto& [id, c] : nodes_) {
    if (id == 0 || id >= limit) {
      throw Error(ErrorCode::kParse, "sketch node id out of range: " +
                                         std::to_string(id));
    }
    if (c == 0) throw Error(ErrorCode::kParse, "sketch node with zero count");
    sum += c;
  }
  if (sum != total_) {
    throw Error(ErrorCode::kParse, "sketch node counts sum to " +
                                       std::to_string(sum) + ", header says " +
                                       std::to_string(total_));
  }
}

QuantileSketch QuantileSketch::build(std::span<const double> values,
                                     SketchParams params) {
  QuantileSketch s(params);
  const std::uint64_t sigma = s.universe_size();
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "score outside [0,1]: " + std::to_string(v));
    }
    ++s.nodes_[sigma + quantize(v, params.universe_bits)];
  }
  s.total_ = values.size();
  s.compress();
  return s;
}

void QuantileSketch::compress() {
  const std::uint64_t thr = compress_threshold();
  if (thr == 0 || nodes_.empty()) return;
  const int bits = params_.universe_bits;
  bool changed = true;
  std::vector<std::uint64_t> level;
  // Repeat bottom-up passes until no triple can merge, so the second
  // digest property holds for every retained node.
  while (changed) {
    changed = false;
    for (int d = bits; d >= 1; --d) {
      const std::uint64_t first = std::uint64_t{1} << d;
      level.clear();
      for (auto it = nodes_.lower_bound(first);
           it != nodes_.end() && it->first < (first << 1); ++it) {
        level.push_back(it->first);
      }
      std::uint64_t last_parent = 0;
      for (std::uint64_t v : level) {
        const std::uint64_t p = v >> 1;
        if (p == last_parent) continue;
        last_parent = p;
        const std::uint64_t left = p << 1;
        const std::uint64_t sum = count_or_zero(nodes_, left) +
                                  count_or_zero(nodes_, left + 1) +
                                  count_or_zero(nodes_, p);
        if (sum <= thr) {
          nodes_.erase(left);
          nodes_.erase(left + 1);
          nodes_[p] = sum;
          changed = true;
        }
      }
    }
  }
}

bool QuantileSketch::satisfies_invariants() const {
  const std::uint64_t thr = compress_threshold();
  const std::uint64_t sigma = universe_size();
  std::uint64_t sum = 0;
  for (const auto& [id, c] : nodes_) {
    sum += c;
    if (id < sigma && c > thr) return false;
    if (id == 1 || thr == 0) continue;
    const std::uint64_t p = id >> 1;
    const std::uint64_t triple =
        c + count_or_zero(nodes_, id ^ 1) + count_or_zero(nodes_, p);
    if (triple <= thr) return false;
  }
  return sum == total_;
}

std::uint64_t QuantileSketch::rank_of_bucket(std::uint32_t bucket) const {
  std::uint64_t sure = 0;
  std::uint64_t straddle = 0;
  for (const auto& [id, c] : nodes_) {
    const NodeRange r = node_range(id, params_.universe_bits);
    if (r.hi <= bucket) {
      sure += c;
    } else if (r.lo <= bucket) {
      straddle += c;
    }
  }
  return sure + straddle / 2;
}

std::vector<std::uint64_t> QuantileSketch::rank_table() const {
  const std::uint32_t sigma = universe_size();
  std::vector<std::int64_t> sure_diff(sigma + 1, 0);
  std::vector<std::int64_t> straddle_diff(sigma + 1, 0);
  for (const auto& [id, c] : nodes_) {
    const NodeRange r = node_range(id, params_.universe_bits);
    const auto cc = static_cast<std::int64_t>(c);
    sure_diff[r.hi] += cc;
    straddle_diff[r.lo] += cc;
    straddle_diff[r.hi] -= cc;
  }
  std::vector<std::uint64_t> out(sigma);
  std::int64_t sure = 0;
  std::int64_t straddle = 0;
  for (std::uint32_t b = 0; b < sigma; ++b) {
    sure += sure_diff[b];
    straddle += straddle_diff[b];
    out[b] = static_cast<std::uint64_t>(sure + straddle / 2);
  }
  return out;
}

QuantileSketch merge(const QuantileSketch& s1, const QuantileSketch& s2) {
  if (!(s1.params() == s2.params())) {
    throw Error(ErrorCode::kSketchIncompatible,
                "cannot merge sketches with (b=" +
                    std::to_string(s1.universe_bits()) +
                    ", k=" + std::to_string(s1.compression()) + ") and (b=" +
                    std::to_string(s2.universe_bits()) +
                    ", k=" + std::to_string(s2.compression()) + ")");
  }
  QuantileSketch out = s1;
  for (const auto& [id, c] : s2.nodes()) out.nodes_[id] += c;
  out.total_ = s1.total() + s2.total();
  out.compress();
  return out;
}

QuantileSketch merge_all(std::span<const QuantileSketch> sketches) {
  if (sketches.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "merge_all of zero sketches");
  }
  QuantileSketch acc = sketches.front();
  for (std::size_t i = 1; i < sketches.size(); ++i) acc = merge(acc, sketches[i]);
  return acc;
}

std::uint64_t approx_rank(const QuantileSketch& s, double value) {
  if (s.total() == 0) return 0;
  return s.rank_of_bucket(quantize(value, s.universe_bits()));
}

std::uint32_t approx_quantile_bucket(const QuantileSketch& s, double q) {
  if (s.total() == 0) {
    throw Error(ErrorCode::kEmptySketch, "quantile of an empty sketch");
  }
  const double n = static_cast<double>(s.total());
  auto target = static_cast<std::uint64_t>(std::ceil(std::clamp(q, 0.0, 1.0) * n));
  target = std::clamp<std::uint64_t>(target, 1, s.total());
  std::uint32_t lo = 0;
  std::uint32_t hi = s.universe_size() - 1;
  while (lo < hi) {
    const std::uint32_t mid = lo + (hi - lo) / 2;
    if (s.rank_of_bucket(mid) >= target) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

double approx_quantile(const QuantileSketch& s, double q) {
  return bucket_upper_edge(approx_quantile_bucket(s, q), s.universe_bits());
}

double epsilon_bound(const SketchParams& params) {
  return std::min(1.0, static_cast<double>(params.universe_bits) /
                           static_cast<double>(params.compression));
}

double epsilon_bound(const QuantileSketch& s) { return epsilon_bound(s.params()); }

}  // namespace fedfair
