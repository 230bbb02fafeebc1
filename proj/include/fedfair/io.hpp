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
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fedfair/certify.hpp"
#include "fedfair/domain.hpp"
#include "fedfair/fedsim.hpp"
#include "fedfair/select.hpp"

namespace fedfair::io {

using Json = nlohmann::json;

inline constexpr std::string_view kToolVersion = "0.1.0";

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

struct Provenance {
  std::string version{kToolVersion};
  std::string config_hash;
  std::uint64_t seed = 0;

  Json to_json() const;
  static Provenance from_json(const Json& j);
  bool operator==(const Provenance&) const = default;
};

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// --- samples ----------------------------------------------------------------

/// JSON Lines with keys client, y, a, score. Blank lines are skipped.
std::vector<ScoredSample> parse_samples_jsonl(std::istream& in, std::string_view source);
/// CSV with columns client,y,a,score; an optional header line is skipped.
std::vector<ScoredSample> parse_samples_csv(std::istream& in, std::string_view source);
/// Chooses CSV for a .csv extension, JSON Lines otherwise.
std::vector<ScoredSample> read_samples(const std::filesystem::path& path);
std::string samples_to_jsonl(std::span<const ScoredSample> samples);

// --- bundles ----------------------------------------------------------------

Json sketch_to_json(const QuantileSketch& s);
QuantileSketch sketch_from_json(const Json& j);
Json bundle_to_json(const ClientBundle& b);
ClientBundle bundle_from_json(const Json& j);

struct BundleFile {
  Provenance provenance;
  ClientBundle bundle;
};

std::string bundle_file_text(const BundleFile& f);
BundleFile parse_bundle_file(std::string_view text, std::string_view source);

/// Loads bundle files, orders them by client id and checks that they agree
/// on group count and sketch parameters.
std::vector<ClientBundle> load_bundles(std::span<const std::filesystem::path> paths);

// --- candidates -------------------------------------------------------------

struct CandidateHeader {
  Provenance provenance;
  Notion notion = Notion::kDEOO;
  RankMode mode = RankMode::kSketch;
  SearchMode search = SearchMode::kFullGrid;
  std::vector<double> alpha;
  double beta = 0.95;
  int mc = 1000;
  double epsilon = 0.0;
  std::uint64_t grid_size = 0;
  std::uint64_t count = 0;
  std::string diagnostic;

  Json to_json() const;
  static CandidateHeader from_json(const Json& j);
};

Json candidate_to_json(const RankCandidate& c);
RankCandidate candidate_from_json(const Json& j);

struct CandidateFile {
  CandidateHeader header;
  std::vector<RankCandidate> candidates;
};

/// Header line, then one line per candidate sorted by L (ties by ranks).
std::string candidates_text(CandidateFile f);
CandidateFile parse_candidates(std::string_view text, std::string_view source);

// --- selection and metrics ------------------------------------------------

struct SelectionReport {
  Provenance provenance;
  Notion notion = Notion::kDEOO;
  RankMode mode = RankMode::kSketch;
  std::vector<double> alpha;
  double beta = 0.95;
  int mc = 1000;
  double epsilon = 0.0;
  bool label_shift = false;
  std::vector<double> thresholds;
  std::vector<int> buckets;
  std::vector<int> chosen_ranks;
  std::vector<std::vector<int>> local_ranks;
  std::vector<std::vector<int>> cross_ranks;
  double L_value = 0.0;
  std::vector<double> h_terms;
  double est_error = 0.0;
  double theta = 0.0;
  double bucket_width = 0.0;

  Json to_json() const;
  static SelectionReport from_json(const Json& j);
};

LabelShiftTarget parse_shift_target(const Json& j);

Json metrics_to_json(const EvalMetrics& m, const Provenance& p);
/// Two lines: column header and one data row.
std::string metrics_csv(const EvalMetrics& m);

/// Fixed disparity metric order used in CSV outputs.
const std::vector<std::string>& metric_names();

// --- run configuration ----------------------------------------------------

struct SweepConfig {
  std::string parameter;  // "alpha" or "beta"
  std::vector<double> values;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int repetitions = 100;
  int threads = 0;
  RankMode mode = RankMode::kExact;
  SearchMode search = SearchMode::kFullGrid;
  FairnessSpec fairness;
  SyntheticConfig data = reference_federation();
  std::optional<SweepConfig> sweep;
  std::optional<std::string> out_dir;
  /// Canonical dump of the parsed document, the basis of the config hash.
  std::string canonical;
};

/// Parses and validates a configuration document. Every problem found is
/// reported in one invalid-argument error, one per line.
RunConfig parse_run_config(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace fedfair::io
