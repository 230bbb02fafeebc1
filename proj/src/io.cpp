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

#include "fedfair/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "fedfair/error.hpp"

namespace fedfair::io {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Json Provenance::to_json() const {
  return Json{{"tool", "fedfair"}, {"version", version}, {"config_hash", config_hash}, {"seed", seed}};
}

Provenance Provenance::from_json(const Json& j) {
  Provenance p;
  p.version = j.at("version").get<std::string>();
  p.config_hash = j.at("config_hash").get<std::string>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::kIo, "cannot rename onto " + path.string());
  }
}

// --- samples ----------------------------------------------------------------

namespace {

[[noreturn]] void parse_fail(std::string_view source, std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::kParse, std::string(source) + ":" + std::to_string(line) + ": " + msg);
}

void check_record(const ScoredSample& s, std::string_view source, std::size_t line,
                  std::string_view text) {
  const std::string rec = "record '" + std::string(text) + "'";
  if (s.client < 0) parse_fail(source, line, rec + ": client must be nonnegative");
  if (s.y != 0 && s.y != 1) parse_fail(source, line, rec + ": y must be 0 or 1");
  if (s.a < 0) parse_fail(source, line, rec + ": a must be nonnegative");
  if (!(s.score >= 0.0 && s.score <= 1.0)) {
    parse_fail(source, line, rec + ": score outside [0,1]");
  }
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::vector<ScoredSample> parse_samples_jsonl(std::istream& in, std::string_view source) {
  std::vector<ScoredSample> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw);
    if (text.empty()) continue;
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error&) {
      parse_fail(source, line, "malformed JSON");
    }
    if (!j.is_object()) parse_fail(source, line, "expected an object");
    for (const auto& [k, v] : j.items()) {
      if (k != "client" && k != "y" && k != "a" && k != "score") {
        parse_fail(source, line, "unknown key '" + k + "'");
      }
    }
    ScoredSample s;
    for (const char* k : {"client", "y", "a"}) {
      if (!j.contains(k)) parse_fail(source, line, std::string("missing key '") + k + "'");
      if (!j[k].is_number_integer()) parse_fail(source, line, std::string("'") + k + "' must be an integer");
    }
    if (!j.contains("score")) parse_fail(source, line, "missing key 'score'");
    if (!j["score"].is_number()) parse_fail(source, line, "'score' must be a number");
    s.client = j["client"].get<int>();
    s.y = j["y"].get<int>();
    s.a = j["a"].get<int>();
    s.score = j["score"].get<double>();
    check_record(s, source, line, text);
    out.push_back(s);
  }
  return out;
}

std::vector<ScoredSample> parse_samples_csv(std::istream& in, std::string_view source) {
  std::vector<ScoredSample> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string text = trim(raw);
    if (text.empty()) continue;
    if (line == 1 && text.rfind("client", 0) == 0) continue;
    std::vector<std::string> cols;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(trim(cell));
    if (cols.size() != 4) parse_fail(source, line, "expected 4 columns client,y,a,score");
    ScoredSample s;
    try {
      std::size_t used = 0;
      s.client = std::stoi(cols[0], &used);
      if (used != cols[0].size()) throw std::invalid_argument("client");
      s.y = std::stoi(cols[1], &used);
      if (used != cols[1].size()) throw std::invalid_argument("y");
      s.a = std::stoi(cols[2], &used);
      if (used != cols[2].size()) throw std::invalid_argument("a");
      s.score = std::stod(cols[3], &used);
      if (used != cols[3].size()) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      parse_fail(source, line, "malformed field in '" + text + "'");
    }
    check_record(s, source, line, text);
    out.push_back(s);
  }
  return out;
}

std::vector<ScoredSample> read_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  if (path.extension() == ".csv") return parse_samples_csv(in, path.string());
  return parse_samples_jsonl(in, path.string());
}

std::string samples_to_jsonl(std::span<const ScoredSample> samples) {
  std::string out;
  for (const ScoredSample& s : samples) {
    out += Json{{"client", s.client}, {"y", s.y}, {"a", s.a}, {"score", s.score}}.dump();
    out += '\n';
  }
  return out;
}

// --- bundles ----------------------------------------------------------------

Json sketch_to_json(const QuantileSketch& s) {
  Json nodes = Json::array();
  for (const auto& [id, c] : s.nodes()) nodes.push_back(Json::array({id, c}));
  return Json{{"b", s.universe_bits()}, {"k", s.compression()}, {"total", s.total()}, {"nodes", nodes}};
}

QuantileSketch sketch_from_json(const Json& j) {
  SketchParams p{j.at("b").get<int>(), j.at("k").get<int>()};
  p.validate();
  QuantileSketch::NodeMap nodes;
  for (const Json& n : j.at("nodes")) {
    if (!n.is_array() || n.size() != 2) throw Error(ErrorCode::kParse, "sketch node must be [id, count]");
    const auto id = n[0].get<std::uint64_t>();
    if (!nodes.emplace(id, n[1].get<std::uint64_t>()).second) {
      throw Error(ErrorCode::kParse, "duplicate sketch node " + std::to_string(id));
    }
  }
  return QuantileSketch(p, j.at("total").get<std::uint64_t>(), std::move(nodes));
}

Json bundle_to_json(const ClientBundle& b) {
  Json strata = Json::array();
  for (const auto& [key, n] : b.counts) {
    Json s{{"y", key.y}, {"a", key.a}, {"count", n}, {"sketch", sketch_to_json(b.sketch(key))}};
    if (b.sorted_scores) {
      const auto v = b.scores(key);
      s["scores"] = std::vector<double>(v.begin(), v.end());
    }
    strata.push_back(std::move(s));
  }
  return Json{{"client", b.client}, {"num_groups", b.num_groups}, {"exact", b.has_exact()}, {"strata", strata}};
}

ClientBundle bundle_from_json(const Json& j) {
  ClientBundle b;
  b.client = j.at("client").get<int>();
  b.num_groups = j.at("num_groups").get<int>();
  const bool exact = j.at("exact").get<bool>();
  if (exact) b.sorted_scores.emplace();
  for (const Json& s : j.at("strata")) {
    const StratumKey key{s.at("y").get<int>(), s.at("a").get<int>()};
    if (!b.counts.emplace(key, s.at("count").get<std::uint64_t>()).second) {
      throw Error(ErrorCode::kParse, "duplicate stratum " + to_string(key));
    }
    b.sketches.emplace(key, sketch_from_json(s.at("sketch")));
    if (exact) {
      if (!s.contains("scores")) throw Error(ErrorCode::kParse, "exact bundle lacks scores for " + to_string(key));
      (*b.sorted_scores)[key] = s.at("scores").get<std::vector<double>>();
    }
  }
  b.validate();
  return b;
}

std::string bundle_file_text(const BundleFile& f) {
  Json j{{"provenance", f.provenance.to_json()}, {"bundle", bundle_to_json(f.bundle)}};
  return j.dump() + "\n";
}

BundleFile parse_bundle_file(std::string_view text, std::string_view source) {
  try {
    const Json j = Json::parse(text);
    return {Provenance::from_json(j.at("provenance")), bundle_from_json(j.at("bundle"))};
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kParse, std::string(source) + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.code(), std::string(source) + ": " + e.detail());
  }
}

std::vector<ClientBundle> load_bundles(std::span<const std::filesystem::path> paths) {
  if (paths.empty()) throw Error(ErrorCode::kInvalidArgument, "no bundle files given");
  std::vector<ClientBundle> out;
  for (const auto& p : paths) out.push_back(parse_bundle_file(read_file(p), p.string()).bundle);
  std::sort(out.begin(), out.end(), [](const ClientBundle& a, const ClientBundle& b) { return a.client < b.client; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].client == out[i - 1].client) {
      throw Error(ErrorCode::kInvalidArgument, "two bundles for client " + std::to_string(out[i].client));
    }
  }
  const ClientBundle& first = out.front();
  const SketchParams& ref = first.sketches.begin()->second.params();
  for (const ClientBundle& b : out) {
    if (b.num_groups != first.num_groups) {
      throw Error(ErrorCode::kSketchIncompatible, "bundles disagree on the number of groups");
    }
    for (const auto& [key, s] : b.sketches) {
      if (s.universe_bits() != ref.universe_bits || s.compression() != ref.compression) {
        throw Error(ErrorCode::kSketchIncompatible,
                    "client " + std::to_string(b.client) + " uses different sketch parameters");
      }
    }
  }
  return out;
}

// --- candidates -------------------------------------------------------------

Json CandidateHeader::to_json() const {
  Json j{{"provenance", provenance.to_json()},
         {"notion", notion_name(notion)},
         {"mode", rank_mode_name(mode)},
         {"search", search_mode_name(search)},
         {"alpha", alpha},
         {"beta", beta},
         {"mc", mc},
         {"epsilon", epsilon},
         {"grid_size", grid_size},
         {"count", count}};
  if (!diagnostic.empty()) j["diagnostic"] = diagnostic;
  return j;
}

CandidateHeader CandidateHeader::from_json(const Json& j) {
  CandidateHeader h;
  h.provenance = Provenance::from_json(j.at("provenance"));
  h.notion = parse_notion(j.at("notion").get<std::string>());
  h.mode = parse_rank_mode(j.at("mode").get<std::string>());
  h.search = parse_search_mode(j.at("search").get<std::string>());
  h.alpha = j.at("alpha").get<std::vector<double>>();
  h.beta = j.at("beta").get<double>();
  h.mc = j.at("mc").get<int>();
  h.epsilon = j.at("epsilon").get<double>();
  h.grid_size = j.at("grid_size").get<std::uint64_t>();
  h.count = j.at("count").get<std::uint64_t>();
  if (j.contains("diagnostic")) h.diagnostic = j["diagnostic"].get<std::string>();
  return h;
}

Json candidate_to_json(const RankCandidate& c) {
  return Json{{"global_ranks", c.global_ranks},
              {"local_ranks", c.local_ranks},
              {"L", c.L_value},
              {"h_terms", c.h_terms},
              {"h_std_errors", c.h_std_errors}};
}

RankCandidate candidate_from_json(const Json& j) {
  RankCandidate c;
  c.global_ranks = j.at("global_ranks").get<std::vector<int>>();
  c.local_ranks = j.at("local_ranks").get<std::vector<std::vector<int>>>();
  c.L_value = j.at("L").get<double>();
  c.h_terms = j.at("h_terms").get<std::vector<double>>();
  c.h_std_errors = j.at("h_std_errors").get<std::vector<double>>();
  if (c.local_ranks.size() != c.global_ranks.size() || c.h_terms.size() != c.h_std_errors.size()) {
    throw Error(ErrorCode::kParse, "candidate record has inconsistent lengths");
  }
  return c;
}

std::string candidates_text(CandidateFile f) {
  std::stable_sort(f.candidates.begin(), f.candidates.end(), [](const RankCandidate& a, const RankCandidate& b) {
    if (a.L_value != b.L_value) return a.L_value < b.L_value;
    return a.global_ranks < b.global_ranks;
  });
  f.header.count = f.candidates.size();
  std::string out = f.header.to_json().dump() + "\n";
  for (const RankCandidate& c : f.candidates) out += candidate_to_json(c).dump() + "\n";
  return out;
}

CandidateFile parse_candidates(std::string_view text, std::string_view source) {
  CandidateFile f;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line;
    if (trim(raw).empty()) continue;
    try {
      const Json j = Json::parse(raw);
      if (!header) {
        f.header = CandidateHeader::from_json(j);
        header = true;
      } else {
        f.candidates.push_back(candidate_from_json(j));
      }
    } catch (const Json::exception& e) {
      parse_fail(source, line, e.what());
    } catch (const Error& e) {
      parse_fail(source, line, e.detail());
    }
  }
  if (!header) parse_fail(source, line, "missing header line");
  if (f.header.count != f.candidates.size()) {
    parse_fail(source, line, "header count disagrees with the number of records");
  }
  return f;
}

// --- selection and metrics ------------------------------------------------

Json SelectionReport::to_json() const {
  return Json{{"provenance", provenance.to_json()},
              {"notion", notion_name(notion)},
              {"mode", rank_mode_name(mode)},
              {"alpha", alpha},
              {"beta", beta},
              {"mc", mc},
              {"epsilon", epsilon},
              {"label_shift", label_shift},
              {"thresholds", thresholds},
              {"buckets", buckets},
              {"chosen_ranks", chosen_ranks},
              {"local_ranks", local_ranks},
              {"cross_ranks", cross_ranks},
              {"L", L_value},
              {"h_terms", h_terms},
              {"est_error", est_error},
              {"theta", theta},
              {"bucket_width", bucket_width}};
}

SelectionReport SelectionReport::from_json(const Json& j) {
  SelectionReport r;
  r.provenance = Provenance::from_json(j.at("provenance"));
  r.notion = parse_notion(j.at("notion").get<std::string>());
  r.mode = parse_rank_mode(j.at("mode").get<std::string>());
  r.alpha = j.at("alpha").get<std::vector<double>>();
  r.beta = j.at("beta").get<double>();
  r.mc = j.at("mc").get<int>();
  r.epsilon = j.at("epsilon").get<double>();
  r.label_shift = j.at("label_shift").get<bool>();
  r.thresholds = j.at("thresholds").get<std::vector<double>>();
  r.buckets = j.at("buckets").get<std::vector<int>>();
  r.chosen_ranks = j.at("chosen_ranks").get<std::vector<int>>();
  r.local_ranks = j.at("local_ranks").get<std::vector<std::vector<int>>>();
  r.cross_ranks = j.at("cross_ranks").get<std::vector<std::vector<int>>>();
  r.L_value = j.at("L").get<double>();
  r.h_terms = j.at("h_terms").get<std::vector<double>>();
  r.est_error = j.at("est_error").get<double>();
  r.theta = j.at("theta").get<double>();
  r.bucket_width = j.at("bucket_width").get<double>();
  return r;
}

LabelShiftTarget parse_shift_target(const Json& j) {
  for (const auto& [k, v] : j.items()) {
    if (k != "p_a" && k != "p_Y_a") throw Error(ErrorCode::kParse, "unknown key '" + k + "' in shift target");
  }
  LabelShiftTarget t;
  t.p_a_target = j.at("p_a").get<std::vector<double>>();
  t.p_Y_a_target = j.at("p_Y_a").get<std::vector<double>>();
  t.validate(static_cast<int>(t.p_a_target.size()));
  return t;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"deoo", "deo_tpr", "deo_fpr", "ddp", "dpe", "dea", "deoom"};
  return names;
}

Json metrics_to_json(const EvalMetrics& m, const Provenance& p) {
  Json groups = Json::array();
  for (const GroupRates& g : m.groups) {
    groups.push_back(Json{{"pos", g.pos}, {"neg", g.neg}, {"true_pos", g.true_pos}, {"false_pos", g.false_pos}});
  }
  Json disp = Json::object();
  for (const auto& [k, v] : m.signed_disparity) disp[k] = v;
  return Json{{"provenance", p.to_json()},
              {"accuracy", m.accuracy},
              {"groups", groups},
              {"signed_disparity", disp},
              {"undefined", m.undefined}};
}

std::string metrics_csv(const EvalMetrics& m) {
  std::string head = "accuracy";
  std::string row = Json(m.accuracy).dump();
  for (const std::string& k : metric_names()) {
    head += "," + k;
    auto it = m.disparity.find(k);
    row += ",";
    if (it != m.disparity.end()) row += Json(it->second).dump();
  }
  return head + "\n" + row + "\n";
}

// --- run configuration ----------------------------------------------------

namespace {

class ConfigReader {
 public:
  std::vector<std::string> errors;

  void keys(const Json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    if (!obj.is_object()) {
      errors.push_back(path + ": expected an object");
      return;
    }
    for (const auto& [k, v] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        errors.push_back(path + ": unknown key '" + k + "'");
      }
    }
  }

  template <typename T>
  void get(const Json& obj, const char* key, const std::string& path, T& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    const Json& v = obj[key];
    const std::string where = path + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) return fail(where, "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) return fail(where, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
          return fail(where, "expected a nonnegative integer");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) return fail(where, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) return fail(where, "expected a string");
    }
    out = v.get<T>();
  }

  void fail(const std::string& where, const std::string& msg) { errors.push_back(where + ": " + msg); }

  template <typename Fn>
  void guard(const std::string& where, Fn&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      fail(where, e.detail());
    } catch (const Json::exception& e) {
      fail(where, e.what());
    }
  }
};

std::vector<double> number_list(ConfigReader& r, const Json& v, const std::string& where) {
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
  } else if (v.is_array()) {
    for (const Json& x : v) {
      if (!x.is_number()) {
        r.fail(where, "expected numbers");
        return {};
      }
      out.push_back(x.get<double>());
    }
  } else {
    r.fail(where, "expected a number or an array of numbers");
  }
  return out;
}

ScoreDistribution parse_dist(ConfigReader& r, const Json& j, const std::string& where) {
  ScoreDistribution d;
  std::string family = "uniform";
  r.get(j, "family", where, family);
  r.guard(where, [&] { d.family = parse_score_family(family); });
  if (j.contains("params")) {
    const auto p = number_list(r, j["params"], where + ".params");
    if (p.size() == 2) {
      d.p1 = p[0];
      d.p2 = p[1];
    } else {
      r.fail(where + ".params", "expected two numbers");
    }
  } else {
    r.fail(where, "missing 'params'");
  }
  r.guard(where, [&] { d.validate(); });
  return d;
}

void parse_model(ConfigReader& r, const Json& j, ScoreModel& m) {
  const std::string where = "data.model";
  r.keys(j, where, {"num_clients", "num_groups", "default", "strata", "p_a", "p_Y_a"});
  if (!j.is_object()) return;
  r.get(j, "num_clients", where, m.num_clients);
  r.get(j, "num_groups", where, m.num_groups);
  if (m.num_clients < 1 || m.num_groups < 2 || m.num_clients > 100000 || m.num_groups > 64) {
    r.fail(where, "need 1..100000 clients and 2..64 groups");
    return;
  }
  const int s = m.num_clients;
  const int g = m.num_groups;
  m.dists.assign(static_cast<std::size_t>(s * 2 * g), ScoreDistribution::uniform(0.0, 1.0));
  std::vector<bool> set(m.dists.size(), false);
  if (j.contains("default")) {
    r.keys(j["default"], where + ".default", {"family", "params"});
    const ScoreDistribution d = parse_dist(r, j["default"], where + ".default");
    std::fill(m.dists.begin(), m.dists.end(), d);
    std::fill(set.begin(), set.end(), true);
  }
  if (j.contains("strata")) {
    if (!j["strata"].is_array()) {
      r.fail(where + ".strata", "expected an array");
    } else {
      std::size_t idx = 0;
      for (const Json& e : j["strata"]) {
        const std::string w = where + ".strata[" + std::to_string(idx++) + "]";
        r.keys(e, w, {"client", "y", "a", "family", "params"});
        int i = -1;
        int y = -1;
        int a = -1;
        r.get(e, "client", w, i);
        r.get(e, "y", w, y);
        r.get(e, "a", w, a);
        if (i < 0 || i >= s || (y != 0 && y != 1) || a < 0 || a >= g) {
          r.fail(w, "client, y or a out of range");
          continue;
        }
        m.dist(i, y, a) = parse_dist(r, e, w);
        set[static_cast<std::size_t>((i * 2 + y) * g + a)] = true;
      }
    }
  }
  if (std::find(set.begin(), set.end(), false) != set.end()) {
    r.fail(where, "every (client, y, a) needs a distribution; give 'default' or list all strata");
  }
  const auto rates = [&](const char* key, double fill, std::vector<std::vector<double>>& out) {
    out.assign(static_cast<std::size_t>(s), std::vector<double>(static_cast<std::size_t>(g), fill));
    if (!j.contains(key)) return;
    const Json& v = j[key];
    if (!v.is_array() || v.size() != static_cast<std::size_t>(s)) {
      r.fail(where + "." + key, "expected one row per client");
      return;
    }
    for (int i = 0; i < s; ++i) {
      const auto row = number_list(r, v[i], where + "." + key);
      if (row.size() != static_cast<std::size_t>(g)) {
        r.fail(where + "." + key, "expected one entry per group");
        return;
      }
      out[i] = row;
    }
  };
  rates("p_a", 1.0 / g, m.p_a);
  rates("p_Y_a", 0.5, m.p_Y_a);
}

}  // namespace

RunConfig parse_run_config(const Json& j) {
  ConfigReader r;
  RunConfig c;
  r.keys(j, "config", {"seed", "repetitions", "threads", "mode", "search", "fairness", "data", "sketch", "sweep", "output"});
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "config: expected an object");

  r.get(j, "seed", "config", c.seed);
  r.get(j, "repetitions", "config", c.repetitions);
  r.get(j, "threads", "config", c.threads);
  if (c.repetitions < 1) r.fail("config.repetitions", "must be positive");
  if (c.threads < 0) r.fail("config.threads", "must be nonnegative");
  std::string text;
  if (j.contains("mode")) {
    r.get(j, "mode", "config", text);
    r.guard("config.mode", [&] { c.mode = parse_rank_mode(text); });
  }
  if (j.contains("search")) {
    r.get(j, "search", "config", text);
    r.guard("config.search", [&] { c.search = parse_search_mode(text); });
  }

  if (j.contains("fairness")) {
    const Json& f = j["fairness"];
    r.keys(f, "fairness", {"notion", "alpha", "beta", "mc"});
    if (f.is_object()) {
      if (f.contains("notion")) {
        r.get(f, "notion", "fairness", text);
        r.guard("fairness.notion", [&] { c.fairness.notion = parse_notion(text); });
      }
      if (f.contains("alpha")) c.fairness.alpha = number_list(r, f["alpha"], "fairness.alpha");
      for (double a : c.fairness.alpha) {
        if (!(a > 0.0 && a < 1.0)) r.fail("fairness.alpha", "values must be in (0,1)");
      }
      r.get(f, "beta", "fairness", c.fairness.beta);
      if (!(c.fairness.beta > 0.0 && c.fairness.beta < 1.0)) r.fail("fairness.beta", "must be in (0,1)");
      r.get(f, "mc", "fairness", c.fairness.mc_samples);
      if (c.fairness.mc_samples < 1) r.fail("fairness.mc", "must be positive");
    }
  }
  if (c.fairness.notion == Notion::kDEO && c.fairness.alpha.size() == 1) {
    c.fairness.alpha.push_back(c.fairness.alpha[0]);
  }

  int groups = 2;
  if (j.contains("data")) {
    const Json& d = j["data"];
    r.keys(d, "data", {"preset", "num_groups", "model", "sizes", "partition", "test_mode", "test_size", "shift_positive_rate"});
    if (d.is_object()) {
      r.get(d, "num_groups", "data", groups);
      std::string preset = "reference";
      r.get(d, "preset", "data", preset);
      if (preset != "reference") r.fail("data.preset", "only 'reference' is known");
      if (groups < 2 || groups > 64) {
        r.fail("data.num_groups", "must be in 2..64");
        groups = 2;
      }
      c.data = reference_federation(groups);
      if (d.contains("model")) parse_model(r, d["model"], c.data.model);
      c.data.partition.num_clients = c.data.model.num_clients;
      if (d.contains("sizes")) {
        const Json& s = d["sizes"];
        r.keys(s, "data.sizes", {"mode", "min_stratum", "max_stratum", "total_samples"});
        if (s.contains("mode")) {
          r.get(s, "mode", "data.sizes", text);
          if (text == "stratified") {
            c.data.sizes.mode = SizeMode::kStratified;
          } else if (text == "dirichlet") {
            c.data.sizes.mode = SizeMode::kDirichlet;
          } else {
            r.fail("data.sizes.mode", "expected 'stratified' or 'dirichlet'");
          }
        }
        r.get(s, "min_stratum", "data.sizes", c.data.sizes.min_stratum);
        r.get(s, "max_stratum", "data.sizes", c.data.sizes.max_stratum);
        r.get(s, "total_samples", "data.sizes", c.data.sizes.total_samples);
        if (c.data.sizes.min_stratum < 0 || c.data.sizes.max_stratum < c.data.sizes.min_stratum) {
          r.fail("data.sizes", "need 0 <= min_stratum <= max_stratum");
        }
        if (c.data.sizes.total_samples < 1) r.fail("data.sizes.total_samples", "must be positive");
      }
      if (d.contains("partition")) {
        const Json& p = d["partition"];
        r.keys(p, "data.partition", {"dirichlet_concentration", "train_fraction"});
        r.get(p, "dirichlet_concentration", "data.partition", c.data.partition.dirichlet_concentration);
        r.get(p, "train_fraction", "data.partition", c.data.partition.train_fraction);
        r.guard("data.partition", [&] { c.data.partition.validate(); });
      }
      if (d.contains("test_mode")) {
        r.get(d, "test_mode", "data", text);
        if (text == "mixture") {
          c.data.test_mode = TestPoolMode::kMixture;
        } else if (text == "split") {
          c.data.test_mode = TestPoolMode::kSplit;
        } else {
          r.fail("data.test_mode", "expected 'mixture' or 'split'");
        }
      }
      r.get(d, "test_size", "data", c.data.test_size);
      if (c.data.test_size < 1) r.fail("data.test_size", "must be positive");
      if (d.contains("shift_positive_rate")) {
        double rate = 0.0;
        r.get(d, "shift_positive_rate", "data", rate);
        if (!(rate > 0.0 && rate < 1.0)) r.fail("data.shift_positive_rate", "must be in (0,1)");
        c.data.shift_positive_rate = rate;
      }
      if (c.data.test_mode == TestPoolMode::kSplit && c.data.sizes.mode != SizeMode::kDirichlet) {
        r.fail("data.test_mode", "'split' needs dirichlet sizes");
      }
      if (c.data.shift_positive_rate && c.data.test_mode != TestPoolMode::kMixture) {
        r.fail("data.shift_positive_rate", "label shift needs the mixture test pool");
      }
    }
  }
  if (j.contains("sketch")) {
    const Json& s = j["sketch"];
    r.keys(s, "sketch", {"universe_bits", "compression"});
    r.get(s, "universe_bits", "sketch", c.data.sketch.universe_bits);
    r.get(s, "compression", "sketch", c.data.sketch.compression);
  }
  r.guard("sketch", [&] { c.data.sketch.validate(); });
  if (j.contains("sweep")) {
    const Json& s = j["sweep"];
    r.keys(s, "sweep", {"parameter", "values"});
    SweepConfig sw;
    r.get(s, "parameter", "sweep", sw.parameter);
    if (sw.parameter != "alpha" && sw.parameter != "beta") r.fail("sweep.parameter", "expected 'alpha' or 'beta'");
    if (s.is_object() && s.contains("values")) sw.values = number_list(r, s["values"], "sweep.values");
    if (sw.values.empty()) r.fail("sweep.values", "need at least one value");
    for (double v : sw.values) {
      if (!(v > 0.0 && v < 1.0)) r.fail("sweep.values", "values must be in (0,1)");
    }
    c.sweep = sw;
  }
  if (j.contains("output")) {
    const Json& o = j["output"];
    r.keys(o, "output", {"dir"});
    std::string dir;
    r.get(o, "dir", "output", dir);
    if (!dir.empty()) c.out_dir = dir;
  }
  if (r.errors.empty()) r.guard("fairness", [&] { c.fairness.validate(); });
  if (c.fairness.notion != Notion::kDEOOM && c.data.model.num_groups != 2) {
    r.fail("fairness.notion", "only deoom handles more than two groups");
  }
  r.guard("data.model", [&] { c.data.model.validate(); });

  if (!r.errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const std::string& e : r.errors) msg += "\n  " + e;
    throw Error(ErrorCode::kInvalidArgument, msg);
  }
  Json canon = j;
  canon.erase("output");
  c.canonical = canon.dump();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace fedfair::io
