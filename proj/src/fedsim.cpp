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

#include "fedfair/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

#include "fedfair/error.hpp"
#include "fedfair/parallel.hpp"

namespace fedfair {

// --- score distributions --------------------------------------------------

std::string_view score_family_name(ScoreFamily f) {
  switch (f) {
    case ScoreFamily::kUniform:
      return "uniform";
    case ScoreFamily::kTruncatedGaussian:
      return "truncated-gaussian";
    case ScoreFamily::kBeta:
      return "beta";
  }
  return "unknown";
}

ScoreFamily parse_score_family(std::string_view text) {
  for (ScoreFamily f : {ScoreFamily::kUniform, ScoreFamily::kTruncatedGaussian, ScoreFamily::kBeta}) {
    if (text == score_family_name(f)) return f;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown score family '" + std::string(text) + "'");
}

ScoreDistribution ScoreDistribution::uniform(double lo, double hi) {
  return {ScoreFamily::kUniform, lo, hi};
}

ScoreDistribution ScoreDistribution::truncated_gaussian(double mu, double sigma) {
  return {ScoreFamily::kTruncatedGaussian, mu, sigma};
}

ScoreDistribution ScoreDistribution::beta(double a, double b) {
  return {ScoreFamily::kBeta, a, b};
}

void ScoreDistribution::validate() const {
  switch (family) {
    case ScoreFamily::kUniform:
      if (!(p1 >= 0.0 && p2 <= 1.0 && p1 < p2)) {
        throw Error(ErrorCode::kInvalidArgument, "uniform scores need 0 <= lo < hi <= 1");
      }
      return;
    case ScoreFamily::kTruncatedGaussian:
      if (!(p2 > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "truncated-gaussian needs sigma > 0");
      }
      return;
    case ScoreFamily::kBeta:
      if (!(p1 > 0.0 && p2 > 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "beta scores need positive shape parameters");
      }
      return;
  }
}

namespace {

const boost::math::normal_distribution<double> kStdNormal(0.0, 1.0);

double open_uniform(RngStream& rng) {
  return (static_cast<double>(rng.next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

double ScoreDistribution::sample(RngStream& rng) const {
  switch (family) {
    case ScoreFamily::kUniform:
      return std::clamp(p1 + (p2 - p1) * rng.uniform(), 0.0, 1.0);
    case ScoreFamily::kTruncatedGaussian: {
      const double lo = boost::math::cdf(kStdNormal, (0.0 - p1) / p2);
      const double hi = boost::math::cdf(kStdNormal, (1.0 - p1) / p2);
      const double u = lo + (hi - lo) * open_uniform(rng);
      const double z = boost::math::quantile(kStdNormal, std::clamp(u, 1e-300, 1.0 - 1e-16));
      return std::clamp(p1 + p2 * z, 0.0, 1.0);
    }
    case ScoreFamily::kBeta: {
      const double x = rng.gamma(p1);
      const double y = rng.gamma(p2);
      return x + y > 0.0 ? std::clamp(x / (x + y), 0.0, 1.0) : 0.5;
    }
  }
  return 0.0;
}

double ScoreDistribution::cdf(double x) const {
  if (x < 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  switch (family) {
    case ScoreFamily::kUniform:
      return std::clamp((x - p1) / (p2 - p1), 0.0, 1.0);
    case ScoreFamily::kTruncatedGaussian: {
      const double lo = boost::math::cdf(kStdNormal, (0.0 - p1) / p2);
      const double hi = boost::math::cdf(kStdNormal, (1.0 - p1) / p2);
      return (boost::math::cdf(kStdNormal, (x - p1) / p2) - lo) / (hi - lo);
    }
    case ScoreFamily::kBeta:
      return boost::math::cdf(boost::math::beta_distribution<double>(p1, p2), x);
  }
  return 0.0;
}

double ScoreDistribution::mean() const {
  switch (family) {
    case ScoreFamily::kUniform:
      return 0.5 * (p1 + p2);
    case ScoreFamily::kTruncatedGaussian: {
      const double a = (0.0 - p1) / p2;
      const double b = (1.0 - p1) / p2;
      const double z = boost::math::cdf(kStdNormal, b) - boost::math::cdf(kStdNormal, a);
      return p1 + p2 * (boost::math::pdf(kStdNormal, a) - boost::math::pdf(kStdNormal, b)) / z;
    }
    case ScoreFamily::kBeta:
      return p1 / (p1 + p2);
  }
  return 0.0;
}

// --- models ---------------------------------------------------------------

const ScoreDistribution& ScoreModel::dist(int client, int y, int a) const {
  return dists.at(static_cast<std::size_t>((client * 2 + y) * num_groups + a));
}

ScoreDistribution& ScoreModel::dist(int client, int y, int a) {
  return dists.at(static_cast<std::size_t>((client * 2 + y) * num_groups + a));
}

void ScoreModel::validate() const {
  if (num_clients < 1) throw Error(ErrorCode::kInvalidArgument, "score model needs a client");
  if (num_groups < 2) throw Error(ErrorCode::kInvalidArgument, "score model needs two groups");
  if (dists.size() != static_cast<std::size_t>(num_clients * 2 * num_groups)) {
    throw Error(ErrorCode::kInvalidArgument, "score model needs one distribution per (client, y, a)");
  }
  for (const ScoreDistribution& d : dists) d.validate();
  if (p_a.size() != static_cast<std::size_t>(num_clients) ||
      p_Y_a.size() != static_cast<std::size_t>(num_clients)) {
    throw Error(ErrorCode::kInvalidArgument, "score model needs base rates per client");
  }
  for (int i = 0; i < num_clients; ++i) {
    if (p_a[i].size() != static_cast<std::size_t>(num_groups) ||
        p_Y_a[i].size() != static_cast<std::size_t>(num_groups)) {
      throw Error(ErrorCode::kInvalidArgument, "score model base rates need one entry per group");
    }
    double sum = 0.0;
    for (int a = 0; a < num_groups; ++a) {
      if (!(p_a[i][a] >= 0.0 && p_Y_a[i][a] >= 0.0 && p_Y_a[i][a] <= 1.0)) {
        throw Error(ErrorCode::kInvalidArgument, "score model base rates must be probabilities");
      }
      sum += p_a[i][a];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::kInvalidArgument, "score model p_a must sum to 1 per client");
    }
  }
}

void PartitionConfig::validate() const {
  if (num_clients < 1) throw Error(ErrorCode::kInvalidArgument, "partition needs a client");
  if (!(dirichlet_concentration > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "dirichlet concentration must be positive");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "train fraction must be in (0,1)");
  }
}

std::vector<double> sample_dirichlet(int dims, double concentration, RngStream& rng) {
  std::vector<double> v(static_cast<std::size_t>(dims));
  double sum = 0.0;
  for (double& x : v) {
    x = rng.gamma(concentration);
    sum += x;
  }
  if (!(sum > 0.0)) {
    // every gamma underflowed; put all mass on one coordinate
    std::fill(v.begin(), v.end(), 0.0);
    v[static_cast<std::size_t>(rng.uniform_int(0, dims - 1))] = 1.0;
    return v;
  }
  for (double& x : v) x /= sum;
  return v;
}

std::vector<ClientSplit> dirichlet_partition(std::span<const ScoredSample> pool,
                                             int num_groups,
                                             const PartitionConfig& config) {
  config.validate();
  const int s = config.num_clients;
  RngStream rng(config.seed, 0x9a7);
  std::vector<std::vector<ScoredSample>> by_group(static_cast<std::size_t>(num_groups));
  for (const ScoredSample& x : pool) {
    if (x.a < 0 || x.a >= num_groups) {
      throw Error(ErrorCode::kInvalidArgument, "sample group outside range");
    }
    by_group[x.a].push_back(x);
  }
  std::vector<std::vector<ScoredSample>> per_client(static_cast<std::size_t>(s));
  for (int a = 0; a < num_groups; ++a) {
    auto& items = by_group[a];
    std::shuffle(items.begin(), items.end(), rng.engine());
    const std::vector<double> q = sample_dirichlet(s, config.dirichlet_concentration, rng);
    double cum = 0.0;
    std::size_t start = 0;
    for (int i = 0; i < s; ++i) {
      cum += q[i];
      const std::size_t end = i == s - 1
                                  ? items.size()
                                  : std::min(items.size(), static_cast<std::size_t>(std::llround(
                                                               cum * static_cast<double>(items.size()))));
      for (std::size_t j = start; j < end; ++j) {
        ScoredSample x = items[j];
        x.client = i;
        per_client[i].push_back(x);
      }
      start = std::max(start, end);
    }
  }
  std::vector<ClientSplit> out(static_cast<std::size_t>(s));
  for (int i = 0; i < s; ++i) {
    auto& items = per_client[i];
    std::shuffle(items.begin(), items.end(), rng.engine());
    const auto n_train = static_cast<std::size_t>(
        std::llround(config.train_fraction * static_cast<double>(items.size())));
    out[i].train.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
    out[i].test.assign(items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());
  }
  return out;
}

// --- synthetic federations ------------------------------------------------

std::vector<ScoredSample> draw_from_cells(const ScoreModel& model,
                                          std::span<const double> cell_prob, int n,
                                          RngStream& rng) {
  std::vector<double> cum(cell_prob.size());
  std::partial_sum(cell_prob.begin(), cell_prob.end(), cum.begin());
  const double total = cum.empty() ? 0.0 : cum.back();
  if (!(total > 0.0)) throw Error(ErrorCode::kInvalidArgument, "cell probabilities are all zero");
  std::vector<ScoredSample> out;
  out.reserve(static_cast<std::size_t>(n));
  const int g = model.num_groups;
  for (int j = 0; j < n; ++j) {
    const double u = rng.uniform() * total;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    auto cell = static_cast<int>(it - cum.begin());
    while (cell_prob[static_cast<std::size_t>(cell)] <= 0.0 && cell > 0) --cell;
    const int a = cell % g;
    const int y = (cell / g) % 2;
    const int i = cell / (2 * g);
    out.push_back({i, y, a, model.dist(i, y, a).sample(rng)});
  }
  return out;
}

namespace {

std::size_t cell_index(int client, int y, int a, int groups) {
  return static_cast<std::size_t>((client * 2 + y) * groups + a);
}

}  // namespace

Federation generate_synthetic(const SyntheticConfig& config, RngStream& rng) {
  const ScoreModel& model = config.model;
  model.validate();
  config.sketch.validate();
  const int s = model.num_clients;
  const int g = model.num_groups;
  const std::size_t cells = static_cast<std::size_t>(s * 2 * g);
  Federation fed;
  std::vector<ScoredSample> train;
  std::vector<ScoredSample> split_test;
  std::vector<double> counts(cells, 0.0);

  if (config.sizes.mode == SizeMode::kStratified) {
    if (config.sizes.min_stratum < 0 || config.sizes.max_stratum < config.sizes.min_stratum) {
      throw Error(ErrorCode::kInvalidArgument, "stratum size range is empty");
    }
    RngStream size_rng = rng.derive({1});
    for (int i = 0; i < s; ++i) {
      for (int y = 0; y <= 1; ++y) {
        for (int a = 0; a < g; ++a) {
          const auto n = static_cast<int>(
              size_rng.uniform_int(config.sizes.min_stratum, config.sizes.max_stratum));
          const std::size_t c = cell_index(i, y, a, g);
          counts[c] = n;
          RngStream score_rng = rng.derive({2, c});
          for (int j = 0; j < n; ++j) train.push_back({i, y, a, model.dist(i, y, a).sample(score_rng)});
        }
      }
    }
  } else {
    if (config.partition.num_clients != s) {
      throw Error(ErrorCode::kInvalidArgument, "partition and score model disagree on client count");
    }
    // global attribute and label rates: client averages of the model's rates
    std::vector<double> ga(static_cast<std::size_t>(g), 0.0);
    std::vector<double> gy(static_cast<std::size_t>(g), 0.0);
    for (int i = 0; i < s; ++i) {
      for (int a = 0; a < g; ++a) {
        ga[a] += model.p_a[i][a] / s;
        gy[a] += model.p_Y_a[i][a] / s;
      }
    }
    RngStream pool_rng = rng.derive({1});
    std::vector<double> cum(ga.size());
    std::partial_sum(ga.begin(), ga.end(), cum.begin());
    std::vector<ScoredSample> pool;
    pool.reserve(static_cast<std::size_t>(config.sizes.total_samples));
    for (int j = 0; j < config.sizes.total_samples; ++j) {
      const double u = pool_rng.uniform() * cum.back();
      const int a = std::min(g - 1, static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()));
      const int y = pool_rng.uniform() < gy[a] ? 1 : 0;
      pool.push_back({0, y, a, 0.0});
    }
    PartitionConfig pc = config.partition;
    pc.seed = rng.derive({4}).next_u64();
    const auto splits = dirichlet_partition(pool, g, pc);
    RngStream score_rng = rng.derive({2});
    for (int i = 0; i < s; ++i) {
      for (ScoredSample x : splits[i].train) {
        x.score = model.dist(x.client, x.y, x.a).sample(score_rng);
        counts[cell_index(x.client, x.y, x.a, g)] += 1.0;
        train.push_back(x);
      }
      for (ScoredSample x : splits[i].test) {
        x.score = model.dist(x.client, x.y, x.a).sample(score_rng);
        counts[cell_index(x.client, x.y, x.a, g)] += 1.0;
        split_test.push_back(x);
      }
    }
  }

  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  if (!(total > 0.0)) throw Error(ErrorCode::kInvalidArgument, "synthetic federation has no samples");
  fed.cell_prob.resize(cells);
  for (std::size_t c = 0; c < cells; ++c) fed.cell_prob[c] = counts[c] / total;

  fed.bundles = make_bundles(train, s, g, config.sketch, true);
  for (const ClientBundle& b : fed.bundles) {
    for (const auto& [key, n] : b.counts) {
      if (n == 0) {
        fed.notes.push_back("client " + std::to_string(b.client) + " stratum " + to_string(key) +
                            " is empty");
      }
    }
  }

  std::vector<double> test_cells = fed.cell_prob;
  if (config.shift_positive_rate) {
    const double r = *config.shift_positive_rate;
    if (!(r > 0.0 && r < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "shift positive rate must be in (0,1)");
    }
    if (config.test_mode != TestPoolMode::kMixture) {
      throw Error(ErrorCode::kInvalidArgument, "label shift needs the mixture test pool");
    }
    double p1 = 0.0;
    for (int i = 0; i < s; ++i) {
      for (int a = 0; a < g; ++a) p1 += fed.cell_prob[cell_index(i, 1, a, g)];
    }
    LabelShiftTarget target;
    target.p_a_target.assign(static_cast<std::size_t>(g), 0.0);
    target.p_Y_a_target.assign(static_cast<std::size_t>(g), 0.0);
    std::vector<double> pos(static_cast<std::size_t>(g), 0.0);
    for (int i = 0; i < s; ++i) {
      for (int y = 0; y <= 1; ++y) {
        for (int a = 0; a < g; ++a) {
          const std::size_t c = cell_index(i, y, a, g);
          test_cells[c] = fed.cell_prob[c] * (y == 1 ? r / p1 : (1.0 - r) / (1.0 - p1));
          target.p_a_target[a] += test_cells[c];
          if (y == 1) pos[a] += test_cells[c];
        }
      }
    }
    double mass = 0.0;
    for (double v : target.p_a_target) mass += v;
    for (int a = 0; a < g; ++a) {
      target.p_Y_a_target[a] = target.p_a_target[a] > 0.0 ? pos[a] / target.p_a_target[a] : 0.0;
      target.p_a_target[a] /= mass;
    }
    fed.shift_target = target;
  }

  if (config.test_mode == TestPoolMode::kSplit) {
    if (config.sizes.mode != SizeMode::kDirichlet) {
      throw Error(ErrorCode::kInvalidArgument, "the split test pool needs dirichlet sizes");
    }
    fed.test = std::move(split_test);
  } else {
    RngStream test_rng = rng.derive({3});
    fed.test = draw_from_cells(model, test_cells, config.test_size, test_rng);
  }
  return fed;
}

// --- evaluation -----------------------------------------------------------

EvalMetrics evaluate_classifier(std::span<const double> thresholds,
                                std::span<const ScoredSample> test, int num_groups) {
  if (thresholds.size() != static_cast<std::size_t>(num_groups)) {
    throw Error(ErrorCode::kInvalidArgument, "need one threshold per group");
  }
  EvalMetrics m;
  m.groups.resize(static_cast<std::size_t>(num_groups));
  std::uint64_t correct = 0;
  for (const ScoredSample& x : test) {
    if (x.a < 0 || x.a >= num_groups) throw Error(ErrorCode::kInvalidArgument, "test sample group outside range");
    const bool pred = x.score > thresholds[x.a];
    GroupRates& r = m.groups[x.a];
    if (x.y == 1) {
      ++r.pos;
      if (pred) ++r.true_pos;
    } else {
      ++r.neg;
      if (pred) ++r.false_pos;
    }
    if (pred == (x.y == 1)) ++correct;
  }
  m.accuracy = test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());

  const auto tpr = [&](int a) -> std::optional<double> {
    const GroupRates& r = m.groups[a];
    if (r.pos == 0) return std::nullopt;
    return static_cast<double>(r.true_pos) / static_cast<double>(r.pos);
  };
  const auto fpr = [&](int a) -> std::optional<double> {
    const GroupRates& r = m.groups[a];
    if (r.neg == 0) return std::nullopt;
    return static_cast<double>(r.false_pos) / static_cast<double>(r.neg);
  };
  const auto ppr = [&](int a) -> std::optional<double> {
    const GroupRates& r = m.groups[a];
    if (r.pos + r.neg == 0) return std::nullopt;
    return static_cast<double>(r.true_pos + r.false_pos) / static_cast<double>(r.pos + r.neg);
  };
  const auto acc = [&](int a) -> std::optional<double> {
    const GroupRates& r = m.groups[a];
    if (r.pos + r.neg == 0) return std::nullopt;
    return static_cast<double>(r.true_pos + r.neg - r.false_pos) / static_cast<double>(r.pos + r.neg);
  };
  const auto put = [&](const std::string& name, std::optional<double> a, std::optional<double> b) {
    if (!a || !b) {
      m.undefined.push_back(name);
      return;
    }
    m.signed_disparity[name] = *b - *a;
    m.disparity[name] = std::abs(*b - *a);
  };
  put("deoo", tpr(0), tpr(1));
  put("deo_tpr", tpr(0), tpr(1));
  put("deo_fpr", fpr(0), fpr(1));
  put("ddp", ppr(0), ppr(1));
  put("dpe", fpr(0), fpr(1));
  put("dea", acc(0), acc(1));
  {
    bool ok = tpr(0).has_value();
    double best = 0.0;
    double best_signed = 0.0;
    for (int a = 1; a < num_groups && ok; ++a) {
      const auto t = tpr(a);
      if (!t) {
        ok = false;
        break;
      }
      const double d = *t - *tpr(0);
      if (std::abs(d) > best) {
        best = std::abs(d);
        best_signed = d;
      }
    }
    if (ok) {
      m.disparity["deoom"] = best;
      m.signed_disparity["deoom"] = best_signed;
    } else {
      m.undefined.push_back("deoom");
    }
  }
  return m;
}

std::vector<std::string> notion_metrics(Notion n) {
  switch (n) {
    case Notion::kDEOO:
      return {"deoo"};
    case Notion::kDEO:
      return {"deo_tpr", "deo_fpr"};
    case Notion::kDDP:
      return {"ddp"};
    case Notion::kDPE:
      return {"dpe"};
    case Notion::kDEA:
      return {"dea"};
    case Notion::kDEOOM:
      return {"deoom"};
  }
  return {};
}

std::optional<bool> violates(const FairnessSpec& spec, const EvalMetrics& m) {
  const auto names = notion_metrics(spec.notion);
  bool any = false;
  for (std::size_t j = 0; j < names.size(); ++j) {
    auto it = m.disparity.find(names[j]);
    if (it == m.disparity.end()) return std::nullopt;
    const double alpha = spec.alpha[std::min(j, spec.alpha.size() - 1)];
    if (it->second > alpha) any = true;
  }
  return any;
}

// --- trials ---------------------------------------------------------------

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(mix64(master) ^ mix64(index + 0x7f4a7c15ULL));
}

TrialReport run_trial(const TrialConfig& config, std::uint64_t seed) {
  TrialReport rep;
  rep.seed = seed;
  const RngStream root(seed, 0);
  RngStream data_rng = root.derive({1});
  const Federation fed = generate_synthetic(config.data, data_rng);
  const int groups = config.data.model.num_groups;
  for (const std::string& n : fed.notes) rep.diagnostics.push_back(n);

  FairnessSpec spec = config.spec;
  spec.epsilon = config.mode == RankMode::kExact ? 0.0 : epsilon_bound(config.data.sketch);
  rep.epsilon = spec.epsilon;

  std::vector<double> thresholds(static_cast<std::size_t>(groups), 0.5);
  std::optional<std::vector<double>> naive_thresholds;
  try {
    CertifyEngine engine(fed.bundles, spec, config.mode, root.derive({2}));
    Selector chosen(engine.context(), spec.epsilon, fed.shift_target);
    std::optional<Selector> naive;
    if (fed.shift_target) naive.emplace(engine.context(), spec.epsilon);
    const SearchStats st = engine.for_each_candidate(config.search, [&](const RankCandidate& c) {
      chosen.offer(c);
      if (naive) naive->offer(c);
    });
    rep.candidate_count = st.accepted;
    if (!st.diagnostic.empty()) rep.diagnostics.push_back(st.diagnostic);
    if (!chosen.empty()) {
      const SelectionResult r = chosen.result();
      rep.certified = true;
      rep.est_error = r.est_error;
      rep.theta = r.theta;
      rep.chosen_ranks = r.chosen.global_ranks;
      for (int g = 0; g < groups; ++g) thresholds[g] = r.thresholds[g].value;
      if (naive) {
        const SelectionResult nr = naive->result();
        naive_thresholds.emplace();
        for (const Threshold& t : nr.thresholds) naive_thresholds->push_back(t.value);
      }
    }
  } catch (const Error& e) {
    rep.diagnostics.push_back(e.what());
  }
  if (!rep.certified) rep.diagnostics.push_back("not certified; evaluated the base threshold 0.5");

  const EvalMetrics m = evaluate_classifier(thresholds, fed.test, groups);
  rep.thresholds = thresholds;
  rep.accuracy = m.accuracy;
  rep.disparity = m.disparity;
  rep.signed_disparity = m.signed_disparity;
  rep.undefined = m.undefined;
  if (naive_thresholds) {
    rep.baseline_accuracy = evaluate_classifier(*naive_thresholds, fed.test, groups).accuracy;
  }
  if (rep.certified) rep.violation = violates(spec, m);
  return rep;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(q * n));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  s.q95 = nearest_rank_quantile({values.begin(), values.end()}, 0.95);
  return s;
}

ExperimentSummary summarize_trials(std::span<const TrialReport> trials) {
  ExperimentSummary sum;
  sum.repetitions = static_cast<int>(trials.size());
  double cand = 0.0;
  for (const TrialReport& t : trials) {
    if (t.certified) ++sum.certified;
    cand += static_cast<double>(t.candidate_count);
  }
  sum.mean_candidates = trials.empty() ? 0.0 : cand / static_cast<double>(trials.size());
  const bool only_certified = sum.certified > 0;
  std::map<std::string, std::vector<double>> values;
  int ok = 0;
  int bad = 0;
  for (const TrialReport& t : trials) {
    if (only_certified && !t.certified) continue;
    values["accuracy"].push_back(t.accuracy);
    if (t.baseline_accuracy) values["baseline_accuracy"].push_back(*t.baseline_accuracy);
    for (const auto& [k, v] : t.disparity) values[k].push_back(v);
    values["candidates"].push_back(static_cast<double>(t.candidate_count));
    if (t.certified) {
      values["est_error"].push_back(t.est_error);
      values["theta"].push_back(t.theta);
    }
  }
  for (const TrialReport& t : trials) {
    if (!t.certified) continue;
    if (!t.violation) {
      ++sum.undefined_trials;
    } else if (*t.violation) {
      ++bad;
    } else {
      ++ok;
    }
  }
  for (const auto& [k, v] : values) sum.metrics[k] = summarize(v);
  sum.coverage_trials = ok + bad;
  sum.coverage = sum.coverage_trials > 0 ? static_cast<double>(ok) / sum.coverage_trials : 1.0;
  sum.violation_rate = sum.coverage_trials > 0 ? static_cast<double>(bad) / sum.coverage_trials : 0.0;
  return sum;
}

int default_threads() {
  if (const char* env = std::getenv("FEDFAIR_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

ExperimentResult run_experiment(const TrialConfig& config, int repetitions,
                                std::uint64_t master_seed, int threads) {
  if (repetitions < 1) throw Error(ErrorCode::kInvalidArgument, "repetitions must be positive");
  config.spec.validate();
  ExperimentResult out;
  out.trials.resize(static_cast<std::size_t>(repetitions));
  parallel_for(out.trials.size(), threads > 0 ? threads : default_threads(), [&](std::size_t i) {
    out.trials[i] = run_trial(config, trial_seed(master_seed, i));
  });
  out.summary = summarize_trials(out.trials);
  return out;
}

SyntheticConfig reference_federation(int num_groups) {
  SyntheticConfig c;
  const int s = 5;
  const double offsets[s] = {-0.06, -0.03, 0.0, 0.03, 0.06};
  c.model.num_clients = s;
  c.model.num_groups = num_groups;
  c.model.dists.resize(static_cast<std::size_t>(s * 2 * num_groups));
  c.model.p_a.assign(s, std::vector<double>(static_cast<std::size_t>(num_groups), 1.0 / num_groups));
  c.model.p_Y_a.assign(s, std::vector<double>(static_cast<std::size_t>(num_groups), 0.5));
  for (int i = 0; i < s; ++i) {
    for (int a = 0; a < num_groups; ++a) {
      const double sigma = 0.14 + 0.01 * (i % 3);
      c.model.dist(i, 1, a) = ScoreDistribution::truncated_gaussian(0.62 + offsets[i] - 0.08 * a, sigma);
      c.model.dist(i, 0, a) = ScoreDistribution::truncated_gaussian(0.38 + offsets[i] - 0.05 * a, sigma);
    }
  }
  c.sizes.mode = SizeMode::kStratified;
  c.sizes.min_stratum = 30;
  c.sizes.max_stratum = 120;
  c.partition.num_clients = s;
  c.sketch = SketchParams{7, 300};
  c.test_mode = TestPoolMode::kMixture;
  c.test_size = 50000;
  return c;
}

}  // namespace fedfair
