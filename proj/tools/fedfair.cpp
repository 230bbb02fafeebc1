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

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedfair/commands.hpp"
#include "fedfair/error.hpp"
#include "fedfair/io.hpp"

int main(int argc, char** argv) {
  using namespace fedfair;
  CLI::App app{"Fairness-certified thresholds for federated classifier scores"};
  app.set_version_flag("--version", std::string(io::kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();

  cli::CommandOptions o;
  std::string config, mode, search, notion, out, input, candidates, selection, test, target;
  std::uint64_t seed = 0;
  double beta = 0.0;
  int mc = 0, bits = 0, compression = 0, reps = 0, threads = 0;
  std::vector<std::string> bundles;

  auto* o_config = app.add_option("--config", config, "Run configuration (JSON)");
  auto* o_seed = app.add_option("--seed", seed, "Random seed");
  auto* o_mode = app.add_option("--mode", mode, "Rank mode")->check(CLI::IsMember({"exact", "sketch"}));
  auto* o_search = app.add_option("--search", search, "Search strategy")
                       ->check(CLI::IsMember({"full-grid", "mu-restricted"}));
  auto* o_notion = app.add_option("--notion", notion, "Fairness notion")
                       ->check(CLI::IsMember({"deoo", "deo", "ddp", "dpe", "dea", "deoom"}));
  app.add_option("--alpha", o.alpha, "Tolerance (repeat for deo)");
  auto* o_beta = app.add_option("--beta", beta, "Confidence level");
  auto* o_mc = app.add_option("--mc", mc, "Monte-Carlo draws per h-term");
  auto* o_out = app.add_option("--out", out, "Output directory");
  auto* o_bits = app.add_option("--universe-bits", bits, "Sketch universe bits b");
  auto* o_comp = app.add_option("--compression", compression, "Sketch compression k");
  auto* o_reps = app.add_option("--repetitions", reps, "Experiment repetitions");
  auto* o_threads = app.add_option("--threads", threads, "Worker threads (0 = default)");

  auto* sk = app.add_subcommand("sketch", "Build per-client bundles from a samples file");
  auto* o_input = sk->add_option("--input", input, "Samples file (.jsonl or .csv)")->required();
  auto* ce = app.add_subcommand("certify", "Build the certified candidate set");
  ce->add_option("--bundles", bundles, "Bundle files")->required();
  auto* se = app.add_subcommand("select", "Select the minimum-error candidate");
  se->add_option("--bundles", bundles, "Bundle files")->required();
  auto* o_cand = se->add_option("--candidates", candidates, "Candidates file")->required();
  auto* o_target = se->add_option("--target", target, "Label-shift target (JSON)");
  auto* ev = app.add_subcommand("evaluate", "Evaluate a selection on labelled samples");
  auto* o_sel = ev->add_option("--selection", selection, "Selection report")->required();
  auto* o_test = ev->add_option("--test", test, "Test samples file")->required();
  app.add_subcommand("experiment", "Run repeated synthetic federated trials");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*o_config) o.config = config;
    if (*o_seed) o.seed = seed;
    if (*o_mode) o.mode = parse_rank_mode(mode);
    if (*o_search) o.search = parse_search_mode(search);
    if (*o_notion) o.notion = parse_notion(notion);
    if (*o_beta) o.beta = beta;
    if (*o_mc) o.mc = mc;
    if (*o_out) o.out = out;
    if (*o_bits) o.universe_bits = bits;
    if (*o_comp) o.compression = compression;
    if (*o_reps) o.repetitions = reps;
    if (*o_threads) o.threads = threads;
    if (*o_input) o.input = input;
    for (const std::string& b : bundles) o.bundles.emplace_back(b);
    if (*o_cand) o.candidates = candidates;
    if (*o_target) o.target = target;
    if (*o_sel) o.selection = selection;
    if (*o_test) o.test = test;
  } catch (const Error& e) {
    std::cerr << "fedfair: " << e.what() << "\n";
    return cli::kExitFailure;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  return cli::run_command(name, o, std::cout, std::cerr);
}
