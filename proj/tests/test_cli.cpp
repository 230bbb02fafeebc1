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

#include <doctest.h>

#include <sys/wait.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fedfair/commands.hpp"
#include "fedfair/error.hpp"
#include "fedfair/io.hpp"
#include "fedfair/orderstat.hpp"

using namespace fedfair;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("fedfair_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string read(const fs::path& p) { return io::read_file(p); }

int run(const std::string& cmd, const cli::CommandOptions& o, std::string* err = nullptr) {
  std::ostringstream log;
  std::ostringstream e;
  const int rc = cli::run_command(cmd, o, log, e);
  if (err) *err = e.str();
  return rc;
}

cli::CommandOptions base(const fs::path& out) {
  cli::CommandOptions o;
  o.out = out;
  o.mode = RankMode::kExact;
  o.seed = 7;
  return o;
}

std::string sample_line(int client, int y, int a, double score) {
  return io::Json{{"client", client}, {"y", y}, {"a", a}, {"score", score}}.dump() + "\n";
}

BetaRankSpec one(int u, int n) { return BetaRankSpec{{u}, {n}, {1.0}}; }

const fs::path kGolden = fs::path(FEDFAIR_FIXTURE_DIR) / "golden";

// negatives sit below every positive, so group error = 0.25 (k + 1) / 10
std::string separated_samples() {
  std::string s;
  for (int a = 0; a <= 1; ++a) {
    for (int j = 0; j < 9; ++j) {
      s += sample_line(0, 1, a, 0.15 + 0.1 * j);
      s += sample_line(0, 0, a, 0.01 * (j + 1));
    }
  }
  return s;
}

void write_candidates(const fs::path& p, const std::vector<std::vector<int>>& ranks) {
  io::CandidateFile f;
  f.header.notion = Notion::kDEOO;
  f.header.mode = RankMode::kExact;
  f.header.alpha = {0.1};
  f.header.grid_size = 81;
  f.header.count = ranks.size();
  f.header.provenance.seed = 1;
  for (const auto& r : ranks) {
    RankCandidate c;
    c.global_ranks = r;
    c.local_ranks = {{r[0]}, {r[1]}};
    c.h_terms = {0.01, 0.01};
    c.h_std_errors = {0.003, 0.003};
    c.L_value = 0.02;
    f.candidates.push_back(c);
  }
  write(p, io::candidates_text(f));
}

}  // namespace

TEST_CASE("sketch a three-line file") {
  TempDir d;
  write(d / "s.jsonl", sample_line(0, 1, 0, 0.2) + sample_line(0, 1, 0, 0.7) + "\n" + sample_line(0, 0, 1, 0.4));
  auto o = base(d.path());
  o.input = d / "s.jsonl";
  REQUIRE(run("sketch", o) == cli::kExitOk);
  const auto f = io::parse_bundle_file(read(d / "bundle_0.json"), "bundle_0.json");
  CHECK(f.bundle.count({1, 0}) == 2);
  CHECK(f.bundle.count({0, 1}) == 1);
  CHECK(f.bundle.count({0, 0}) == 0);
  CHECK(f.bundle.count({1, 1}) == 0);
  CHECK(f.bundle.has_exact());
  CHECK(f.provenance.seed == 7);
  CHECK(f.provenance.version == io::kToolVersion);
  CHECK_FALSE(f.provenance.config_hash.empty());
}

TEST_CASE("malformed sample files are rejected at the offending line") {
  TempDir d;
  auto o = base(d.path());
  o.input = d / "s.jsonl";
  std::string err;
  write(d / "s.jsonl", sample_line(0, 1, 0, 0.2) + sample_line(0, 1, 0, 1.5) + sample_line(0, 0, 0, 0.1));
  CHECK(run("sketch", o, &err) == cli::kExitFailure);
  CHECK(err.find("s.jsonl:2:") != std::string::npos);
  CHECK(err.find("1.5") != std::string::npos);
  CHECK_FALSE(fs::exists(d / "bundle_0.json"));

  write(d / "s.jsonl", sample_line(0, 1, 0, 0.2) + "{\"client\":0,\"y\":1\n");
  CHECK(run("sketch", o, &err) == cli::kExitFailure);
  CHECK(err.find("s.jsonl:2:") != std::string::npos);

  write(d / "s.jsonl", "{\"client\":0,\"y\":1,\"a\":0,\"score\":0.3,\"x\":1}\n");
  CHECK(run("sketch", o, &err) == cli::kExitFailure);
  CHECK(err.find("s.jsonl:1:") != std::string::npos);

  write(d / "s.jsonl", sample_line(0, 2, 0, 0.3));
  CHECK(run("sketch", o, &err) == cli::kExitFailure);

  std::istringstream csv("client,y,a,score\n0,1,0,0.5\n0,1,x,0.5\n");
  try {
    io::parse_samples_csv(csv, "c.csv");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParse);
    CHECK(std::string(e.what()).find("c.csv:3:") != std::string::npos);
  }
}

TEST_CASE("large sample files keep per-stratum counts") {
  TempDir d;
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::map<std::tuple<int, int, int>, std::uint64_t> lines;
  std::string text;
  std::string csv = "client,y,a,score\n";
  for (int j = 0; j < 100000; ++j) {
    const int c = static_cast<int>(gen() % 4);
    const int y = static_cast<int>(gen() % 2);
    const int a = static_cast<int>(gen() % 2);
    const double s = std::round(u(gen) * 1e6) / 1e6;
    ++lines[{c, y, a}];
    text += sample_line(c, y, a, s);
    csv += std::to_string(c) + "," + std::to_string(y) + "," + std::to_string(a) + "," + io::Json(s).dump() + "\n";
  }
  write(d / "s.jsonl", text);
  write(d / "s.csv", csv);
  auto o = base(d.path());
  o.mode = RankMode::kSketch;
  o.input = d / "s.jsonl";
  REQUIRE(run("sketch", o) == cli::kExitOk);
  for (int c = 0; c < 4; ++c) {
    const auto f = io::parse_bundle_file(read(d / ("bundle_" + std::to_string(c) + ".json")), "b");
    CHECK_FALSE(f.bundle.has_exact());
    for (int y = 0; y <= 1; ++y)
      for (int a = 0; a <= 1; ++a) {
        CHECK(f.bundle.count({y, a}) == lines[{c, y, a}]);
        CHECK(f.bundle.sketch({y, a}).total() == lines[{c, y, a}]);
      }
  }
  const auto from_csv = io::read_samples(d / "s.csv");
  const auto from_jsonl = io::read_samples(d / "s.jsonl");
  REQUIRE(from_csv.size() == from_jsonl.size());
  for (std::size_t j = 0; j < from_csv.size(); j += 101) {
    CHECK(from_csv[j].client == from_jsonl[j].client);
    CHECK(from_csv[j].score == from_jsonl[j].score);
  }
}

TEST_CASE("certify over a vacuous alpha returns the full grid") {
  TempDir d;
  write(d / "s.jsonl", read(kGolden / "samples.jsonl"));
  auto o = base(d.path());
  o.input = d / "s.jsonl";
  REQUIRE(run("sketch", o) == cli::kExitOk);
  o.bundles = {d / "bundle_0.json"};
  o.alpha = {1.0 - 1e-6};
  REQUIRE(run("certify", o) == cli::kExitOk);
  const auto cf = io::parse_candidates(read(d / "candidates.jsonl"), "c");
  const auto b = io::parse_bundle_file(read(d / "bundle_0.json"), "b").bundle;
  CHECK(cf.candidates.size() == b.count({1, 0}) * b.count({1, 1}));
  CHECK(cf.header.grid_size == cf.candidates.size());
  CHECK(cf.header.count == cf.candidates.size());
  for (std::size_t j = 1; j < cf.candidates.size(); ++j) CHECK(cf.candidates[j - 1].L_value <= cf.candidates[j].L_value);
}

TEST_CASE("golden candidates file") {
  TempDir d;
  auto o = base(d.path());
  o.bundles = {kGolden / "bundle_0.json"};
  o.alpha = {0.4};
  o.beta = 0.8;
  o.mc = 1000;
  REQUIRE(run("certify", o) == cli::kExitOk);
  const std::string got = read(d / "candidates.jsonl");
  CHECK(got == read(kGolden / "candidates.jsonl"));

  // every record against the order-statistic oracle
  const auto b = io::parse_bundle_file(read(kGolden / "bundle_0.json"), "b").bundle;
  const int n0 = static_cast<int>(b.count({1, 0}));
  const int n1 = static_cast<int>(b.count({1, 1}));
  const auto cf = io::parse_candidates(got, "c");
  REQUIRE_FALSE(cf.candidates.empty());
  for (const auto& c : cf.candidates) {
    const int k0 = c.global_ranks[0];
    const int k1 = c.global_ranks[1];
    const double h0 = exact_h_oracle(one(k0 + 1, n0), one(k1, n1), 0.4);
    const double h1 = exact_h_oracle(one(k1 + 1, n1), one(k0, n0), 0.4);
    CHECK(std::abs(c.h_terms[0] - h0) <= 4 * std::sqrt(h0 * (1 - h0) / 1000) + 1e-3);
    CHECK(std::abs(c.h_terms[1] - h1) <= 4 * std::sqrt(h1 * (1 - h1) / 1000) + 1e-3);
    CHECK(c.h_std_errors[0] == doctest::Approx(std::sqrt(c.h_terms[0] * (1 - c.h_terms[0]) / 1000)));
  }

  // idempotent
  REQUIRE(run("certify", o) == cli::kExitOk);
  CHECK(read(d / "candidates.jsonl") == got);
}

TEST_CASE("empty candidate set is advisory") {
  TempDir d;
  auto o = base(d.path());
  o.bundles = {kGolden / "bundle_0.json"};
  o.alpha = {0.01};
  o.beta = 0.99;
  CHECK(run("certify", o) == cli::kExitAdvisory);
  const std::string text = read(d / "candidates.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  const auto cf = io::parse_candidates(text, "c");
  CHECK(cf.candidates.empty());
  CHECK(cf.header.count == 0);

  auto s = base(d.path());
  s.bundles = o.bundles;
  s.candidates = d / "candidates.jsonl";
  std::string err;
  CHECK(run("select", s, &err) == cli::kExitAdvisory);
  CHECK(err.find("no-certified-classifier") != std::string::npos);

  const std::string cmd = std::string(FEDFAIR_CLI_PATH) + " certify --mode exact --alpha 0.01 --beta 0.99 --bundles " +
                          (kGolden / "bundle_0.json").string() + " --out " + d.path().string() + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(st));
  CHECK(WEXITSTATUS(st) == 2);
  const std::string bad = std::string(FEDFAIR_CLI_PATH) + " certify --bundles " + (d / "missing.json").string() +
                          " >/dev/null 2>&1";
  const int st2 = std::system(bad.c_str());
  REQUIRE(WIFEXITED(st2));
  CHECK(WEXITSTATUS(st2) == 1);
}

TEST_CASE("select") {
  TempDir d;
  write(d / "s.jsonl", separated_samples());
  auto o = base(d.path());
  o.input = d / "s.jsonl";
  REQUIRE(run("sketch", o) == cli::kExitOk);
  o.bundles = {d / "bundle_0.json"};
  o.candidates = d / "c.jsonl";

  SUBCASE("lower hand-computed error wins") {
    write_candidates(d / "c.jsonl", {{1, 3}, {2, 1}});  // 0.15 and 0.125
    REQUIRE(run("select", o) == cli::kExitOk);
    const auto rep = io::SelectionReport::from_json(io::Json::parse(read(d / "selection.json")));
    CHECK(rep.chosen_ranks == std::vector<int>{2, 1});
    CHECK(rep.est_error == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(rep.theta == doctest::Approx(0.05));
    CHECK(rep.thresholds[0] == doctest::Approx(0.25));
    CHECK(rep.provenance.seed == 1);
    CHECK(rep.cross_ranks == std::vector<std::vector<int>>{{9}, {9}});
  }
  SUBCASE("single candidate") {
    write_candidates(d / "c.jsonl", {{6, 4}});
    REQUIRE(run("select", o) == cli::kExitOk);
    const auto rep = io::SelectionReport::from_json(io::Json::parse(read(d / "selection.json")));
    CHECK(rep.chosen_ranks == std::vector<int>{6, 4});
  }
  SUBCASE("identity shift target") {
    write_candidates(d / "c.jsonl", {{1, 3}, {2, 1}, {4, 4}, {3, 2}});
    REQUIRE(run("select", o) == cli::kExitOk);
    auto plain = io::Json::parse(read(d / "selection.json"));
    write(d / "t.json", io::Json{{"p_a", {0.5, 0.5}}, {"p_Y_a", {0.5, 0.5}}}.dump());
    o.target = d / "t.json";
    REQUIRE(run("select", o) == cli::kExitOk);
    auto shifted = io::Json::parse(read(d / "selection.json"));
    CHECK(shifted["label_shift"] == true);
    for (auto* j : {&plain, &shifted}) {
      j->erase("provenance");
      j->erase("label_shift");
    }
    CHECK(plain == shifted);
  }
  SUBCASE("ranks must fit the bundles") {
    write_candidates(d / "c.jsonl", {{1, 30}});
    CHECK(run("select", o) == cli::kExitFailure);
  }
}

TEST_CASE("evaluate") {
  TempDir d;
  // group 0: (y=1: .9 .6 .2) (y=0: .7); group 1: (y=1: .8 .3) (y=0: .4 .1)
  write(d / "test.jsonl", sample_line(0, 1, 0, 0.9) + sample_line(0, 1, 0, 0.6) + sample_line(0, 1, 0, 0.2) +
                              sample_line(0, 0, 0, 0.7) + sample_line(0, 1, 1, 0.8) + sample_line(0, 1, 1, 0.3) +
                              sample_line(0, 0, 1, 0.4) + sample_line(0, 0, 1, 0.1));
  io::SelectionReport rep;
  rep.alpha = {0.1};
  rep.thresholds = {0.5, 0.35};
  rep.buckets = {-1, -1};
  write(d / "sel.json", rep.to_json().dump(2));
  auto o = base(d.path());
  o.selection = d / "sel.json";
  o.test = d / "test.jsonl";
  REQUIRE(run("evaluate", o) == cli::kExitOk);
  const auto m = io::Json::parse(read(d / "metrics.json"));
  CHECK(m["accuracy"].get<double>() == doctest::Approx(0.5));
  CHECK(m["signed_disparity"]["deoo"].get<double>() == doctest::Approx(-1.0 / 6));
  CHECK(m["signed_disparity"]["ddp"].get<double>() == doctest::Approx(-0.25));
  CHECK(m.contains("provenance"));
  const std::string csv = read(d / "metrics.csv");
  CHECK(csv.rfind("# fedfair ", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  rep.thresholds = {0.0, 0.0};
  write(d / "sel.json", rep.to_json().dump(2));
  REQUIRE(run("evaluate", o) == cli::kExitOk);
  CHECK(io::Json::parse(read(d / "metrics.json"))["accuracy"].get<double>() == doctest::Approx(5.0 / 8));

  write(d / "test.jsonl", sample_line(0, 1, 0, 0.9) + sample_line(0, 1, 1, 0.6));
  REQUIRE(run("evaluate", o) == cli::kExitOk);
  const auto u = io::Json::parse(read(d / "metrics.json"));
  CHECK(u["undefined"].size() > 0);
}

TEST_CASE("pipeline round trip on the reference fixture") {
  TempDir d;
  RngStream rng(21, 0);
  auto cfg = reference_federation();
  cfg.test_size = 4000;
  const auto fed = generate_synthetic(cfg, rng);
  std::vector<ScoredSample> train;
  for (const auto& b : fed.bundles) {
    for (const auto& [key, v] : *b.sorted_scores)
      for (double s : v) train.push_back({b.client, key.y, key.a, s});
  }
  write(d / "train.jsonl", io::samples_to_jsonl(train));
  write(d / "test.jsonl", io::samples_to_jsonl(fed.test));
  for (RankMode mode : {RankMode::kExact, RankMode::kSketch}) {
    CAPTURE(rank_mode_name(mode));
    auto o = base(d.path());
    o.mode = mode;
    o.input = d / "train.jsonl";
    REQUIRE(run("sketch", o) == cli::kExitOk);
    for (int i = 0; i < 5; ++i) o.bundles.push_back(d / ("bundle_" + std::to_string(i) + ".json"));
    o.alpha = {0.2};
    o.mc = 300;
    REQUIRE(run("certify", o) == cli::kExitOk);
    const std::string cand = read(d / "candidates.jsonl");
    o.candidates = d / "candidates.jsonl";
    REQUIRE(run("select", o) == cli::kExitOk);
    const std::string sel = read(d / "selection.json");
    o.selection = d / "selection.json";
    o.test = d / "test.jsonl";
    REQUIRE(run("evaluate", o) == cli::kExitOk);
    const std::string metrics = read(d / "metrics.json");
    const auto m = io::Json::parse(metrics);
    CHECK(m["accuracy"].get<double>() > 0.6);

    // byte-identical replay
    REQUIRE(run("certify", o) == cli::kExitOk);
    REQUIRE(run("select", o) == cli::kExitOk);
    REQUIRE(run("evaluate", o) == cli::kExitOk);
    CHECK(read(d / "candidates.jsonl") == cand);
    CHECK(read(d / "selection.json") == sel);
    CHECK(read(d / "metrics.json") == metrics);

    // mode mismatch detection: sketch-only bundles cannot certify in exact mode
    if (mode == RankMode::kSketch) {
      o.mode = RankMode::kExact;
      CHECK(run("certify", o) == cli::kExitFailure);
    }
  }
}

TEST_CASE("file formats round-trip byte for byte") {
  const std::string bundle = read(kGolden / "bundle_0.json");
  CHECK(io::bundle_file_text(io::parse_bundle_file(bundle, "b")) == bundle);
  const std::string cand = read(kGolden / "candidates.jsonl");
  CHECK(io::candidates_text(io::parse_candidates(cand, "c")) == cand);

  io::SelectionReport rep;
  rep.alpha = {0.1, 0.2};
  rep.thresholds = {0.1234567890123, 1.0 / 3};
  rep.buckets = {3, 9};
  rep.chosen_ranks = {4, 5};
  rep.local_ranks = {{1, 3}, {2, 3}};
  rep.cross_ranks = {{0, 1}, {2, 2}};
  rep.h_terms = {0.01, 0.02};
  rep.est_error = 0.2;
  rep.theta = 1e-3;
  const std::string s = rep.to_json().dump(2);
  CHECK(io::SelectionReport::from_json(io::Json::parse(s)).to_json().dump(2) == s);

  std::vector<ScoredSample> samples{{0, 1, 0, 0.1}, {2, 0, 1, 1.0 / 7}, {1, 1, 1, 0.0}};
  const std::string jl = io::samples_to_jsonl(samples);
  std::istringstream in(jl);
  CHECK(io::samples_to_jsonl(io::parse_samples_jsonl(in, "s")) == jl);
}

TEST_CASE("bundles must agree") {
  TempDir d;
  write(d / "s.jsonl", read(kGolden / "samples.jsonl"));
  auto o = base(d / "a");
  fs::create_directories(d / "a");
  fs::create_directories(d / "b");
  o.input = d / "s.jsonl";
  REQUIRE(run("sketch", o) == cli::kExitOk);
  o.out = d / "b";
  o.compression = 100;
  REQUIRE(run("sketch", o) == cli::kExitOk);
  const std::vector<fs::path> mixed{d / "a" / "bundle_0.json", d / "b" / "bundle_0.json"};
  try {
    io::load_bundles(mixed);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::kSketchIncompatible || e.code() == ErrorCode::kInvalidArgument));
  }
  const auto text = read(kGolden / "bundle_0.json");
  auto j = io::Json::parse(text);
  j["bundle"]["client"] = 1;
  for (auto& st : j["bundle"]["strata"]) st["sketch"]["k"] = 100;
  write(d / "other.json", j.dump());
  const std::vector<fs::path> incompatible{kGolden / "bundle_0.json", d / "other.json"};
  try {
    io::load_bundles(incompatible);
    FAIL("expected sketch-incompatible");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSketchIncompatible);
  }
}

TEST_CASE("experiment command") {
  TempDir d;
  write(d / "cfg.json", R"({"seed": 3, "repetitions": 1, "mode": "exact",
    "fairness": {"notion": "deoo", "alpha": 0.15, "mc": 200},
    "data": {"preset": "reference", "test_size": 2000},
    "output": {"dir": "ignored"}})");
  cli::CommandOptions o;
  o.config = d / "cfg.json";
  o.out = d.path();
  o.threads = 1;
  REQUIRE(run("experiment", o) == cli::kExitOk);
  const std::string trials = read(d / "trials.jsonl");
  CHECK(std::count(trials.begin(), trials.end(), '\n') == 2);  // provenance + one record
  std::istringstream lines(trials);
  std::string first;
  std::string second;
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(io::Json::parse(first).contains("provenance"));
  const auto rec = io::Json::parse(second);
  CHECK(rec["seed"].get<std::uint64_t>() == trial_seed(3, 0));
  const std::string summary = read(d / "summary.csv");
  CHECK(summary.rfind("# fedfair ", 0) == 0);
  CHECK(summary.find("acc_q95") != std::string::npos);
  const std::string plot = read(d / "plot.csv");
  CHECK(plot.find("alpha,mean_acc,mean_disp,q95_disp") != std::string::npos);

  REQUIRE(run("experiment", o) == cli::kExitOk);
  CHECK(read(d / "trials.jsonl") == trials);
  CHECK(read(d / "summary.csv") == summary);

  SUBCASE("sweeps") {
    write(d / "sweep.json", R"({"seed": 4, "repetitions": 2, "mode": "exact",
      "fairness": {"notion": "deoo", "alpha": 0.1, "beta": 0.9, "mc": 200},
      "data": {"preset": "reference", "test_size": 1000},
      "sweep": {"parameter": "alpha", "values": [0.05, 0.1, 0.15]}})");
    o.config = d / "sweep.json";
    REQUIRE(run("experiment", o) == cli::kExitOk);
    const std::string p = read(d / "plot.csv");
    CHECK(std::count(p.begin(), p.end(), '\n') == 5);  // comment, header, three rows
    const std::string t = read(d / "trials.jsonl");
    CHECK(std::count(t.begin(), t.end(), '\n') == 7);
  }
  SUBCASE("bad configurations list every problem") {
    write(d / "bad.json", R"({"seed": 1, "repetitions": 0, "colour": 2,
      "fairness": {"notion": "best", "alpha": 1.5, "beta": 2},
      "sketch": {"universe_bits": 40},
      "sweep": {"parameter": "gamma", "values": []}})");
    o.config = d / "bad.json";
    std::string err;
    CHECK(run("experiment", o, &err) == cli::kExitFailure);
    for (std::string key : {"repetitions", "colour", "fairness.notion", "fairness.alpha", "fairness.beta",
                            "universe_bits", "sweep.parameter", "sweep.values"}) {
      CAPTURE(key);
      CHECK(err.find(key) != std::string::npos);
    }
    write(d / "broken.json", "{not json");
    o.config = d / "broken.json";
    CHECK(run("experiment", o, &err) == cli::kExitFailure);
  }
}
