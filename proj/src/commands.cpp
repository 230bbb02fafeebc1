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

#include "fedfair/commands.hpp"

#include <algorithm>
#include <set>

#include "fedfair/error.hpp"
#include "fedfair/fedsim.hpp"
#include "fedfair/io.hpp"
#include "fedfair/select.hpp"
#include "fedfair/sketch.hpp"

namespace fedfair::cli {

using io::Json;
namespace fs = std::filesystem;

namespace {

/// Settings after merging flags over the config document.
struct Settings {
  std::uint64_t seed = 0;
  RankMode mode = RankMode::kSketch;
  SearchMode search = SearchMode::kFullGrid;
  FairnessSpec spec;
  SketchParams sketch;
  fs::path out = ".";
};

Settings resolve(const CommandOptions& o) {
  Settings s;
  if (o.config) {
    const io::RunConfig rc = io::load_run_config(*o.config);
    s.seed = rc.seed;
    s.mode = rc.mode;
    s.search = rc.search;
    s.spec = rc.fairness;
    s.sketch = rc.data.sketch;
    if (rc.out_dir) s.out = *rc.out_dir;
  }
  if (o.seed) s.seed = *o.seed;
  if (o.mode) s.mode = *o.mode;
  if (o.search) s.search = *o.search;
  if (o.notion) s.spec.notion = *o.notion;
  if (!o.alpha.empty()) s.spec.alpha = o.alpha;
  if (s.spec.notion == Notion::kDEO && s.spec.alpha.size() == 1) s.spec.alpha.push_back(s.spec.alpha[0]);
  if (o.beta) s.spec.beta = *o.beta;
  if (o.mc) s.spec.mc_samples = *o.mc;
  if (o.universe_bits) s.sketch.universe_bits = *o.universe_bits;
  if (o.compression) s.sketch.compression = *o.compression;
  if (o.out) s.out = *o.out;
  return s;
}

template <typename T>
const T& require(const std::optional<T>& v, const char* flag) {
  if (!v) throw Error(ErrorCode::kInvalidArgument, std::string("missing required flag ") + flag);
  return *v;
}

std::string hash_of(const Json& j) { return io::hex64(io::fnv1a(j.dump())); }

std::string file_hash(const fs::path& p) { return io::hex64(io::fnv1a(io::read_file(p))); }

Json bundle_hashes(std::span<const fs::path> paths) {
  std::vector<std::string> h;
  for (const fs::path& p : paths) h.push_back(file_hash(p));
  std::sort(h.begin(), h.end());
  return h;
}

std::string csv_comment(const io::Provenance& p) {
  return "# fedfair " + p.version + " config_hash=" + p.config_hash + " seed=" + std::to_string(p.seed) + "\n";
}

}  // namespace

int cmd_sketch(const CommandOptions& opts, std::ostream& log) {
  const Settings s = resolve(opts);
  const fs::path& input = require(opts.input, "--input");
  s.sketch.validate();
  const std::vector<ScoredSample> samples = io::read_samples(input);
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, input.string() + ": no samples");
  int clients = 0;
  int groups = 2;
  std::set<int> found;
  for (const ScoredSample& x : samples) {
    clients = std::max(clients, x.client + 1);
    groups = std::max(groups, x.a + 1);
    found.insert(x.client);
  }
  const bool exact = s.mode == RankMode::kExact;
  const std::vector<ClientBundle> bundles = make_bundles(samples, clients, groups, s.sketch, exact);

  io::Provenance prov;
  prov.seed = s.seed;
  prov.config_hash = hash_of(Json{{"command", "sketch"},
                                  {"b", s.sketch.universe_bits},
                                  {"k", s.sketch.compression},
                                  {"exact", exact},
                                  {"input", file_hash(input)}});
  for (int id : found) {
    const fs::path p = s.out / ("bundle_" + std::to_string(id) + ".json");
    io::write_file_atomic(p, io::bundle_file_text({prov, bundles[static_cast<std::size_t>(id)]}));
  }
  log << "wrote " << found.size() << " bundle(s) for " << samples.size() << " samples to "
      << s.out.string() << "\n";
  return kExitOk;
}

int cmd_certify(const CommandOptions& opts, std::ostream& log) {
  Settings s = resolve(opts);
  const std::vector<ClientBundle> bundles = io::load_bundles(opts.bundles);
  s.spec.epsilon = s.mode == RankMode::kSketch
                       ? epsilon_bound(bundles.front().sketches.begin()->second.params())
                       : 0.0;
  s.spec.validate();

  io::CandidateFile f;
  f.header.provenance.seed = s.seed;
  f.header.provenance.config_hash = hash_of(Json{{"command", "certify"},
                                                 {"notion", notion_name(s.spec.notion)},
                                                 {"alpha", s.spec.alpha},
                                                 {"beta", s.spec.beta},
                                                 {"mc", s.spec.mc_samples},
                                                 {"mode", rank_mode_name(s.mode)},
                                                 {"search", search_mode_name(s.search)},
                                                 {"bundles", bundle_hashes(opts.bundles)}});
  f.header.notion = s.spec.notion;
  f.header.mode = s.mode;
  f.header.search = s.search;
  f.header.alpha = s.spec.alpha;
  f.header.beta = s.spec.beta;
  f.header.mc = s.spec.mc_samples;
  f.header.epsilon = s.spec.epsilon;

  SearchStats stats;
  const RngStream root(s.seed, 0);
  f.candidates = build_candidate_set(bundles, s.spec, s.mode, SearchStrategy{s.search}, root.derive({2}), &stats);
  f.header.grid_size = stats.grid_size;
  f.header.diagnostic = stats.diagnostic;
  const std::size_t n = f.candidates.size();
  io::write_file_atomic(s.out / "candidates.jsonl", io::candidates_text(std::move(f)));
  log << n << " certified candidate(s) out of a grid of " << stats.grid_size << "\n";
  if (n == 0) {
    log << "advisory: the candidate set is empty at this alpha and beta\n";
    return kExitAdvisory;
  }
  return kExitOk;
}

int cmd_select(const CommandOptions& opts, std::ostream& log) {
  const Settings s = resolve(opts);
  const fs::path& cand_path = require(opts.candidates, "--candidates");
  const io::CandidateFile cf = io::parse_candidates(io::read_file(cand_path), cand_path.string());
  const std::vector<ClientBundle> bundles = io::load_bundles(opts.bundles);
  const RankContext ctx(bundles, cf.header.notion, cf.header.mode);

  std::optional<LabelShiftTarget> target;
  if (opts.target) {
    const std::string text = io::read_file(*opts.target);
    try {
      target = io::parse_shift_target(Json::parse(text));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kParse, opts.target->string() + ": " + e.what());
    }
  }
  for (const RankCandidate& c : cf.candidates) {
    if (c.global_ranks.size() != static_cast<std::size_t>(ctx.num_groups())) {
      throw Error(ErrorCode::kInvalidArgument, "candidate rank count does not match the bundles' groups");
    }
    for (int g = 0; g < ctx.num_groups(); ++g) {
      if (c.global_ranks[g] < 0 || c.global_ranks[g] > ctx.defining(g).total()) {
        throw Error(ErrorCode::kInvalidArgument, "candidate rank outside the bundles' strata");
      }
    }
  }
  Selector sel(ctx, cf.header.epsilon, target);
  for (const RankCandidate& c : cf.candidates) sel.offer(c);
  const SelectionResult r = sel.result();

  io::SelectionReport rep;
  rep.provenance.seed = cf.header.provenance.seed;
  Json hash_doc{{"command", "select"},
                {"candidates", file_hash(cand_path)},
                {"bundles", bundle_hashes(opts.bundles)}};
  if (opts.target) hash_doc["target"] = file_hash(*opts.target);
  rep.provenance.config_hash = hash_of(hash_doc);
  rep.notion = cf.header.notion;
  rep.mode = cf.header.mode;
  rep.alpha = cf.header.alpha;
  rep.beta = cf.header.beta;
  rep.mc = cf.header.mc;
  rep.epsilon = cf.header.epsilon;
  rep.label_shift = target.has_value();
  for (const Threshold& t : r.thresholds) {
    rep.thresholds.push_back(t.value);
    rep.buckets.push_back(t.bucket);
  }
  rep.chosen_ranks = r.chosen.global_ranks;
  rep.local_ranks = r.chosen.local_ranks;
  rep.cross_ranks = r.cross_ranks;
  rep.L_value = r.chosen.L_value;
  rep.h_terms = r.chosen.h_terms;
  rep.est_error = r.est_error;
  rep.theta = r.theta;
  rep.bucket_width = r.bucket_width;
  io::write_file_atomic(s.out / "selection.json", rep.to_json().dump(2) + "\n");
  log << "selected ranks";
  for (int k : rep.chosen_ranks) log << " " << k;
  log << " with estimated error " << rep.est_error << "\n";
  return kExitOk;
}

int cmd_evaluate(const CommandOptions& opts, std::ostream& log) {
  const Settings s = resolve(opts);
  const fs::path& sel_path = require(opts.selection, "--selection");
  const fs::path& test_path = require(opts.test, "--test");
  io::SelectionReport rep;
  try {
    rep = io::SelectionReport::from_json(Json::parse(io::read_file(sel_path)));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, sel_path.string() + ": " + e.what());
  }
  const std::vector<ScoredSample> test = io::read_samples(test_path);
  const EvalMetrics m = evaluate_classifier(rep.thresholds, test, static_cast<int>(rep.thresholds.size()));
  io::Provenance prov;
  prov.seed = rep.provenance.seed;
  prov.config_hash = hash_of(Json{{"command", "evaluate"}, {"selection", file_hash(sel_path)}, {"test", file_hash(test_path)}});
  io::write_file_atomic(s.out / "metrics.json", io::metrics_to_json(m, prov).dump(2) + "\n");
  io::write_file_atomic(s.out / "metrics.csv", csv_comment(prov) + io::metrics_csv(m));
  log << "accuracy " << m.accuracy << " on " << test.size() << " samples";
  for (const std::string& u : m.undefined) log << "; " << u << " undefined";
  log << "\n";
  return kExitOk;
}

namespace {

/// Largest |disparity| over the notion's metrics; nullopt when one is undefined.
std::optional<double> trial_disparity(const TrialReport& t, Notion n) {
  double d = 0.0;
  for (const std::string& k : notion_metrics(n)) {
    auto it = t.disparity.find(k);
    if (it == t.disparity.end()) return std::nullopt;
    d = std::max(d, it->second);
  }
  return d;
}

Json trial_json(const TrialReport& t, const std::string& param, double value, std::size_t index) {
  Json j{{"param", param},
         {"value", value},
         {"index", index},
         {"seed", t.seed},
         {"certified", t.certified},
         {"candidates", t.candidate_count},
         {"accuracy", t.accuracy},
         {"signed_disparity", t.signed_disparity},
         {"undefined", t.undefined},
         {"thresholds", t.thresholds},
         {"chosen_ranks", t.chosen_ranks},
         {"est_error", t.est_error},
         {"theta", t.theta},
         {"epsilon", t.epsilon},
         {"diagnostics", t.diagnostics}};
  j["baseline_accuracy"] = t.baseline_accuracy ? Json(*t.baseline_accuracy) : Json(nullptr);
  j["violation"] = t.violation ? Json(*t.violation) : Json(nullptr);
  return j;
}

std::string num(double v) { return Json(v).dump(); }

}  // namespace

int cmd_experiment(const CommandOptions& opts, std::ostream& log) {
  const fs::path& cfg_path = require(opts.config, "--config");
  io::RunConfig rc = io::load_run_config(cfg_path);
  const Settings s = resolve(opts);
  rc.seed = s.seed;
  rc.mode = s.mode;
  rc.search = s.search;
  rc.fairness = s.spec;
  rc.data.sketch = s.sketch;
  if (opts.repetitions) rc.repetitions = *opts.repetitions;
  if (opts.threads) rc.threads = *opts.threads;
  rc.fairness.validate();
  rc.data.sketch.validate();

  io::Provenance prov;
  prov.seed = rc.seed;
  prov.config_hash = hash_of(Json{{"command", "experiment"},
                                  {"config", Json::parse(rc.canonical)},
                                  {"seed", rc.seed},
                                  {"mode", rank_mode_name(rc.mode)},
                                  {"search", search_mode_name(rc.search)},
                                  {"notion", notion_name(rc.fairness.notion)},
                                  {"alpha", rc.fairness.alpha},
                                  {"beta", rc.fairness.beta},
                                  {"mc", rc.fairness.mc_samples},
                                  {"b", rc.data.sketch.universe_bits},
                                  {"k", rc.data.sketch.compression},
                                  {"repetitions", rc.repetitions}});

  const std::string param = rc.sweep ? rc.sweep->parameter : "alpha";
  const std::vector<double> values = rc.sweep ? rc.sweep->values : std::vector<double>{rc.fairness.alpha.front()};
  const auto metrics = notion_metrics(rc.fairness.notion);

  std::string summary = csv_comment(prov);
  summary += "param,value,repetitions,certified,mean_candidates,coverage_trials,coverage,violation_rate,"
             "undefined_trials,acc_mean,acc_std,acc_q95,baseline_acc_mean";
  for (const std::string& m : metrics) summary += "," + m + "_mean," + m + "_std," + m + "_q95";
  summary += "\n";
  std::string plot = csv_comment(prov) + param + ",mean_acc,mean_disp,q95_disp\n";
  std::string trials = Json{{"provenance", prov.to_json()}}.dump() + "\n";

  for (double v : values) {
    TrialConfig tc;
    tc.data = rc.data;
    tc.spec = rc.fairness;
    if (rc.sweep && param == "alpha") std::fill(tc.spec.alpha.begin(), tc.spec.alpha.end(), v);
    if (rc.sweep && param == "beta") tc.spec.beta = v;
    tc.mode = rc.mode;
    tc.search = SearchStrategy{rc.search};
    const ExperimentResult res = run_experiment(tc, rc.repetitions, rc.seed, rc.threads);
    const ExperimentSummary& sm = res.summary;
    const auto stat = [&](const std::string& k) {
      auto it = sm.metrics.find(k);
      return it == sm.metrics.end() ? MetricSummary{} : it->second;
    };
    const MetricSummary acc = stat("accuracy");
    summary += param + "," + num(v) + "," + std::to_string(sm.repetitions) + "," + std::to_string(sm.certified) +
               "," + num(sm.mean_candidates) + "," + std::to_string(sm.coverage_trials) + "," + num(sm.coverage) +
               "," + num(sm.violation_rate) + "," + std::to_string(sm.undefined_trials) + "," + num(acc.mean) + "," +
               num(acc.std) + "," + num(acc.q95) + ",";
    if (sm.metrics.count("baseline_accuracy")) summary += num(stat("baseline_accuracy").mean);
    for (const std::string& m : metrics) {
      const MetricSummary d = stat(m);
      summary += "," + num(d.mean) + "," + num(d.std) + "," + num(d.q95);
    }
    summary += "\n";

    std::vector<double> disp;
    const bool any_certified = sm.certified > 0;
    for (const TrialReport& t : res.trials) {
      if (any_certified && !t.certified) continue;
      if (auto d = trial_disparity(t, rc.fairness.notion)) disp.push_back(*d);
    }
    const MetricSummary ds = summarize(disp);
    plot += num(v) + "," + num(acc.mean) + "," + num(ds.mean) + "," + num(ds.q95) + "\n";
    for (std::size_t i = 0; i < res.trials.size(); ++i) {
      trials += trial_json(res.trials[i], param, v, i).dump() + "\n";
    }
    log << param << "=" << v << ": certified " << sm.certified << "/" << sm.repetitions << ", mean accuracy "
        << acc.mean << ", violation rate " << sm.violation_rate << "\n";
  }
  const fs::path out = opts.out ? *opts.out : (rc.out_dir ? fs::path(*rc.out_dir) : s.out);
  io::write_file_atomic(out / "summary.csv", summary);
  io::write_file_atomic(out / "plot.csv", plot);
  io::write_file_atomic(out / "trials.jsonl", trials);
  return kExitOk;
}

int run_command(const std::string& name, const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  try {
    if (name == "sketch") return cmd_sketch(opts, log);
    if (name == "certify") return cmd_certify(opts, log);
    if (name == "select") return cmd_select(opts, log);
    if (name == "evaluate") return cmd_evaluate(opts, log);
    if (name == "experiment") return cmd_experiment(opts, log);
    err << "fedfair: unknown command '" << name << "'\n";
    return kExitFailure;
  } catch (const Error& e) {
    err << "fedfair: " << e.what() << "\n";
    return e.code() == ErrorCode::kNoCertifiedClassifier ? kExitAdvisory : kExitFailure;
  } catch (const std::exception& e) {
    err << "fedfair: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace fedfair::cli
