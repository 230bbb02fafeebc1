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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fedfair/certify.hpp"
#include "fedfair/domain.hpp"
#include "fedfair/rng.hpp"
#include "fedfair/select.hpp"

namespace fedfair {

enum class ScoreFamily { kUniform, kTruncatedGaussian, kBeta };

std::string_view score_family_name(ScoreFamily f);
ScoreFamily parse_score_family(std::string_view text);

/// A score distribution supported on [0,1]. Parameters: uniform (lo, hi),
/// truncated-gaussian (mu, sigma) truncated to [0,1], beta (a, b).
struct ScoreDistribution {
  ScoreFamily family = ScoreFamily::kUniform;
  double p1 = 0.0;
  double p2 = 1.0;

  static ScoreDistribution uniform(double lo, double hi);
  static ScoreDistribution truncated_gaussian(double mu, double sigma);
  static ScoreDistribution beta(double a, double b);

  void validate() const;
  double sample(RngStream& rng) const;
  double cdf(double x) const;
  double mean() const;
};

/// Synthetic scorer per (client, y, a) plus per-client base rates used
/// when data is generated from rates rather than fixed stratum sizes.
struct ScoreModel {
  int num_clients = 1;
  int num_groups = 2;
  std::vector<ScoreDistribution> dists;  // (client * 2 + y) * groups + a
  std::vector<std::vector<double>> p_a;    // [client][group]
  std::vector<std::vector<double>> p_Y_a;  // [client][group]

  const ScoreDistribution& dist(int client, int y, int a) const;
  ScoreDistribution& dist(int client, int y, int a);
  void validate() const;
};

struct PartitionConfig {
  int num_clients = 5;
  double dirichlet_concentration = 1.0;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;

  void validate() const;
};

std::vector<double> sample_dirichlet(int dims, double concentration, RngStream& rng);

struct ClientSplit {
  std::vector<ScoredSample> train;
  std::vector<ScoredSample> test;
};

/// For each group a, the share of that group's samples held by each client
/// is drawn Dirichlet(concentration * 1). Each client's data is then split
/// train_fraction / (1 - train_fraction). Sample client fields are rewritten.
std::vector<ClientSplit> dirichlet_partition(std::span<const ScoredSample> pool,
                                             int num_groups,
                                             const PartitionConfig& config);

enum class SizeMode { kStratified, kDirichlet };
enum class TestPoolMode { kMixture, kSplit };

struct SizeConfig {
  SizeMode mode = SizeMode::kStratified;
  int min_stratum = 30;  // stratified: per-(client, y, a) train size range
  int max_stratum = 120;
  int total_samples = 4000;  // dirichlet: pool size before the split
};

struct Federation {
  std::vector<ClientBundle> bundles;
  std::vector<ScoredSample> test;
  /// Population cell probabilities P(client, y, a), same layout as dists.
  std::vector<double> cell_prob;
  std::optional<LabelShiftTarget> shift_target;
  std::vector<std::string> notes;
};

struct SyntheticConfig {
  ScoreModel model;
  SizeConfig sizes;
  PartitionConfig partition;
  SketchParams sketch;
  TestPoolMode test_mode = TestPoolMode::kMixture;
  int test_size = 50000;
  /// When set, the test pool follows a label shift with this P(Y=1).
  std::optional<double> shift_positive_rate;
};

Federation generate_synthetic(const SyntheticConfig& config, RngStream& rng);

/// Draws n test points from the cell distribution.
std::vector<ScoredSample> draw_from_cells(const ScoreModel& model,
                                          std::span<const double> cell_prob,
                                          int n, RngStream& rng);

struct GroupRates {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
  std::uint64_t true_pos = 0;
  std::uint64_t false_pos = 0;
};

struct EvalMetrics {
  double accuracy = 0.0;
  std::vector<GroupRates> groups;
  std::map<std::string, double> disparity;  // absolute values
  std::map<std::string, double> signed_disparity;
  std::vector<std::string> undefined;
};

/// Metrics of the classifier 1{score > t_a} on labelled samples.
EvalMetrics evaluate_classifier(std::span<const double> thresholds,
                                std::span<const ScoredSample> test,
                                int num_groups);

/// Metric names whose |value| is compared with alpha for a notion.
std::vector<std::string> notion_metrics(Notion n);
/// True when the metrics break the spec's tolerance; nullopt if a needed
/// metric is undefined.
std::optional<bool> violates(const FairnessSpec& spec, const EvalMetrics& m);

struct TrialConfig {
  SyntheticConfig data;
  FairnessSpec spec;
  RankMode mode = RankMode::kExact;
  SearchStrategy search;
};

struct TrialReport {
  std::uint64_t seed = 0;
  bool certified = false;
  std::uint64_t candidate_count = 0;
  double accuracy = 0.0;
  std::optional<double> baseline_accuracy;  // shift-naive selection
  std::map<std::string, double> disparity;
  std::map<std::string, double> signed_disparity;
  std::vector<std::string> undefined;
  std::vector<double> thresholds;
  std::vector<int> chosen_ranks;
  double est_error = 0.0;
  double theta = 0.0;
  double epsilon = 0.0;
  std::optional<bool> violation;
  std::vector<std::string> diagnostics;
};

TrialReport run_trial(const TrialConfig& config, std::uint64_t seed);

/// Seed of repetition `index` under `master`.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index);

struct MetricSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double q95 = 0.0;
};

/// Nearest-rank percentile of an unsorted sample.
double nearest_rank_quantile(std::vector<double> values, double q);
MetricSummary summarize(std::span<const double> values);

struct ExperimentSummary {
  int repetitions = 0;
  int certified = 0;
  /// Over certified trials (all trials when none is certified).
  std::map<std::string, MetricSummary> metrics;
  double mean_candidates = 0.0;
  /// Among certified trials with defined metrics: fraction within alpha.
  double coverage = 1.0;
  double violation_rate = 0.0;
  int coverage_trials = 0;
  int undefined_trials = 0;
};

struct ExperimentResult {
  ExperimentSummary summary;
  std::vector<TrialReport> trials;
};

ExperimentSummary summarize_trials(std::span<const TrialReport> trials);

/// threads <= 0 means default_threads().
ExperimentResult run_experiment(const TrialConfig& config, int repetitions,
                                std::uint64_t master_seed, int threads = 0);

/// FEDFAIR_THREADS if set, else the hardware concurrency.
int default_threads();

/// The reference federation: S = 5 clients, per-stratum train sizes in
/// [30, 120], heterogeneous truncated-gaussian scorers.
SyntheticConfig reference_federation(int num_groups = 2);

}  // namespace fedfair
