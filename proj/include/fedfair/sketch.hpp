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
#include <map>
#include <span>
#include <vector>

namespace fedfair {

struct SketchParams {
  int universe_bits = 7;
  int compression = 300;

  bool operator==(const SketchParams&) const = default;
  void validate() const;
};

/// Bucket index of a score in a 2^bits universe. Monotone; 1.0 maps to the
/// last bucket.
std::uint32_t quantize(double score, int universe_bits);

/// Largest score that still falls in bucket `bucket`. A classifier
/// 1{score > bucket_upper_edge(B)} accepts exactly the buckets above B.
double bucket_upper_edge(std::uint32_t bucket, int universe_bits);

/// Q-digest over the quantized score universe [0, 2^b). Nodes are heap
/// numbered: root 1, leaves 2^b .. 2^(b+1)-1.
class QuantileSketch {
 public:
  using NodeMap = std::map<std::uint64_t, std::uint64_t>;

  QuantileSketch() = default;
  explicit QuantileSketch(SketchParams params);
  /// For deserialization; validates ids and that counts sum to total.
  QuantileSketch(SketchParams params, std::uint64_t total, NodeMap nodes);

  static QuantileSketch build(std::span<const double> values,
                              SketchParams params);

  const SketchParams& params() const noexcept { return params_; }
  int universe_bits() const noexcept { return params_.universe_bits; }
  int compression() const noexcept { return params_.compression; }
  std::uint64_t total() const noexcept { return total_; }
  const NodeMap& nodes() const noexcept { return nodes_; }
  std::uint32_t universe_size() const noexcept {
    return std::uint32_t{1} << params_.universe_bits;
  }

  /// Estimated count of elements whose bucket is <= `bucket`.
  std::uint64_t rank_of_bucket(std::uint32_t bucket) const;
  /// rank_of_bucket for every bucket; entry B is monotone in B and the last
  /// entry equals total().
  std::vector<std::uint64_t> rank_table() const;

  /// Threshold for the node-count compression step, floor(n/k).
  std::uint64_t compress_threshold() const noexcept {
    return total_ / static_cast<std::uint64_t>(params_.compression);
  }

  /// Checks both Q-digest properties; used by tests.
  bool satisfies_invariants() const;

  bool operator==(const QuantileSketch&) const = default;

 private:
  friend QuantileSketch merge(const QuantileSketch&, const QuantileSketch&);
  void compress();

  SketchParams params_;
  std::uint64_t total_ = 0;
  NodeMap nodes_;
};

/// Throws sketch-incompatible if the parameters differ.
QuantileSketch merge(const QuantileSketch& s1, const QuantileSketch& s2);
QuantileSketch merge_all(std::span<const QuantileSketch> sketches);

/// Approximate count of elements <= value.
std::uint64_t approx_rank(const QuantileSketch& s, double value);

/// Smallest bucket whose approximate rank reaches ceil(q * total) (at least
/// 1). Throws empty-sketch on an empty sketch.
std::uint32_t approx_quantile_bucket(const QuantileSketch& s, double q);
double approx_quantile(const QuantileSketch& s, double q);

/// Rank error guarantee as a fraction of total: min(1, b/k).
double epsilon_bound(const QuantileSketch& s);
double epsilon_bound(const SketchParams& params);

}  // namespace fedfair
