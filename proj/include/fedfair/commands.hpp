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
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fedfair/certify.hpp"
#include "fedfair/domain.hpp"

namespace fedfair::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitAdvisory = 2;

/// Flag values; unset optionals fall back to the config file, then to
/// built-in defaults.
struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<RankMode> mode;
  std::optional<SearchMode> search;
  std::optional<Notion> notion;
  std::vector<double> alpha;
  std::optional<double> beta;
  std::optional<int> mc;
  std::optional<std::filesystem::path> out;
  std::optional<int> universe_bits;
  std::optional<int> compression;
  std::optional<int> repetitions;
  std::optional<int> threads;

  std::optional<std::filesystem::path> input;
  std::vector<std::filesystem::path> bundles;
  std::optional<std::filesystem::path> candidates;
  std::optional<std::filesystem::path> selection;
  std::optional<std::filesystem::path> test;
  std::optional<std::filesystem::path> target;
};

/// Each command writes its files under the output directory and a short
/// summary to `log`. Return value is the process exit status; errors other
/// than an empty candidate set propagate as exceptions.
int cmd_sketch(const CommandOptions& opts, std::ostream& log);
int cmd_certify(const CommandOptions& opts, std::ostream& log);
int cmd_select(const CommandOptions& opts, std::ostream& log);
int cmd_evaluate(const CommandOptions& opts, std::ostream& log);
int cmd_experiment(const CommandOptions& opts, std::ostream& log);

/// Dispatches by name and maps errors to exit statuses, printing them to err.
int run_command(const std::string& name, const CommandOptions& opts,
                std::ostream& log, std::ostream& err);

}  // namespace fedfair::cli
