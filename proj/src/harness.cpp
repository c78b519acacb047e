#include "ccmdp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "ccmdp/errors.hpp"

namespace ccmdp {

namespace {

namespace fs = std::filesystem;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) {
  CounterRng r = CounterRng(seed).fork(label);
  return r.next_u64();
}

// ---------------------------------------------------------------------------
// Small string helpers
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

std::string format17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Config map
// ---------------------------------------------------------------------------

const std::set<std::string> kSections = {"environment", "objective", "constraint",
                                         "algorithm",   "comparator", "output",
                                         "sweep"};

struct ConfigMap {
  std::string origin;
  std::map<std::string, std::string> kv;       // "section.key" -> raw value
  std::map<std::string, int> line_of;          // for diagnostics
  mutable std::set<std::string> recognized;    // keys the program knows about

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::ostringstream os;
    os << origin;
    auto it = line_of.find(key);
    if (it != line_of.end()) os << ":" << it->second;
    os << ": key '" << key << "': " << msg;
    throw ConfigError(os.str());
  }

  bool has(const std::string& key) const {
    recognized.insert(key);
    return kv.count(key) > 0;
  }

  std::string get_string(const std::string& key, const std::string& def) const {
    recognized.insert(key);
    auto it = kv.find(key);
    return it == kv.end() ? def : it->second;
  }

  std::string require_string(const std::string& key) const {
    recognized.insert(key);
    auto it = kv.find(key);
    if (it == kv.end())
      throw ConfigError(origin + ": missing required key '" + key + "'");
    return it->second;
  }

  double parse_double(const std::string& key, const std::string& raw) const {
    const std::string t = trim(raw);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size()) fail(key, "expected a number, got '" + t + "'");
    return v;
  }

  double get_double(const std::string& key, double def) const {
    recognized.insert(key);
    auto it = kv.find(key);
    return it == kv.end() ? def : parse_double(key, it->second);
  }

  long long get_ll(const std::string& key, long long def) const {
    const double v = get_double(key, static_cast<double>(def));
    const long long r = static_cast<long long>(v);
    if (static_cast<double>(r) != v) fail(key, "expected an integer");
    return r;
  }

  int get_int(const std::string& key, int def) const {
    return static_cast<int>(get_ll(key, def));
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t def) const {
    recognized.insert(key);
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    const std::string t = trim(it->second);
    char* end = nullptr;
    const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size()) fail(key, "expected an unsigned integer");
    return v;
  }

  bool get_bool(const std::string& key, bool def) const {
    recognized.insert(key);
    auto it = kv.find(key);
    if (it == kv.end()) return def;
    const std::string t = trim(it->second);
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    fail(key, "expected a boolean (true/false)");
  }

  Vec require_vec(const std::string& key) const {
    const std::string raw = require_string(key);
    const std::vector<std::string> parts = split(raw, ',');
    Vec v(static_cast<Eigen::Index>(parts.size()));
    for (size_t i = 0; i < parts.size(); ++i)
      v[static_cast<Eigen::Index>(i)] = parse_double(key, parts[i]);
    return v;
  }

  std::vector<std::uint64_t> get_u64_list(const std::string& key) const {
    recognized.insert(key);
    auto it = kv.find(key);
    if (it == kv.end()) return {};
    std::vector<std::uint64_t> out;
    for (const std::string& p : split(it->second, ',')) {
      const std::string t = trim(p);
      char* end = nullptr;
      const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
      if (t.empty() || end != t.c_str() + t.size()) fail(key, "expected unsigned integers");
      out.push_back(v);
    }
    return out;
  }

  std::vector<int> get_int_list(const std::string& key) const {
    recognized.insert(key);
    auto it = kv.find(key);
    if (it == kv.end()) return {};
    std::vector<int> out;
    for (const std::string& p : split(it->second, ','))
      out.push_back(static_cast<int>(parse_double(key, p)));
    return out;
  }

  bool section_present(const std::string& section) const {
    const std::string prefix = section + ".";
    for (const auto& [k, v] : kv)
      if (k.rfind(prefix, 0) == 0) return true;
    return false;
  }

  void finish() const {
    for (const auto& [k, v] : kv) {
      if (!recognized.count(k)) {
        std::ostringstream os;
        os << origin << ":" << line_of.at(k) << ": unknown key '" << k << "'";
        throw ConfigError(os.str());
      }
    }
  }
};

ConfigMap parse_kv(const std::string& text, const std::string& origin) {
  ConfigMap cfg;
  cfg.origin = origin;
  std::string section;
  int line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated [section]");
      section = trim(line.substr(1, line.size() - 2));
      if (!kSections.count(section))
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown section [" +
                          section + "]");
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value' or '[section]'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": key '" + key +
                        "' appears outside any [section]");
    const std::string full = section + "." + key;
    if (cfg.kv.count(full))
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + full +
                        "' (first at line " + std::to_string(cfg.line_of[full]) + ")");
    cfg.kv[full] = value;
    cfg.line_of[full] = line_no;
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Instance generators
// ---------------------------------------------------------------------------

FiniteModel random_stochastic_model(int S, int A, int H, std::uint64_t seed, double min_p = 0.05) {
  CounterRng rng(seed);
  FiniteModel m;
  m.S = S;
  m.A = A;
  m.H = H;
  m.initial_state = 0;
  m.tensors.assign(H, Mat(S * A, S));
  for (int h = 0; h < H; ++h)
    for (int r = 0; r < S * A; ++r) {
      double sum = 0.0;
      for (int s2 = 0; s2 < S; ++s2) {
        const double p = min_p + rng.uniform01();
        m.tensors[h](r, s2) = p;
        sum += p;
      }
      m.tensors[h].row(r) /= sum;
    }
  return m;
}

StagePolicy random_stochastic_policy(int S, int A, int H, std::uint64_t seed) {
  CounterRng rng(seed);
  StagePolicy pi;
  pi.probs.assign(H, Mat(S, A));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s) {
      double sum = 0.0;
      for (int a = 0; a < A; ++a) {
        const double p = 0.05 + rng.uniform01();
        pi.probs[h](s, a) = p;
        sum += p;
      }
      pi.probs[h].row(s) /= sum;
    }
  return pi;
}

ModelClass perturbed_class(const FiniteModel& truth, int n, double magnitude, std::uint64_t seed,
                           int truth_index) {
  if (truth_index < 0 || truth_index >= n)
    throw ConfigError("perturbed_class: truth_index outside the class");
  std::vector<FiniteModel> models;
  models.reserve(n);
  CounterRng root(seed);
  for (int i = 0; i < n; ++i) {
    if (i == truth_index) {
      models.push_back(truth);
      continue;
    }
    CounterRng rng = root.fork(i);
    FiniteModel m = truth;
    for (auto& tensor : m.tensors)
      for (int r = 0; r < tensor.rows(); ++r) {
        double sum = 0.0;
        for (int c = 0; c < tensor.cols(); ++c) {
          tensor(r, c) = std::max(tensor(r, c) + magnitude * (rng.uniform01() - 0.5), 0.02);
          sum += tensor(r, c);
        }
        tensor.row(r) /= sum;
      }
    models.push_back(std::move(m));
  }
  return ModelClass::from_list(std::move(models));
}

// Per-stage linear maps Xi_h (I rows, one per criterion) folded into a
// tabular feature map over one-hot inner features: table[h] = Xi_h^T, so the
// Xi rows live in the table columns with norm capped at 0.9 * sqrt(S*A).
TabularFeatureMap xi_mapped_features(int S, int A, int H, int I, std::uint64_t seed) {
  CounterRng root(seed);
  TabularFeatureMap fm;
  fm.d = I;
  fm.table.assign(H, Mat(S * A, I));
  for (int h = 0; h < H; ++h) {
    CounterRng rng = root.fork(h);
    for (int i = 0; i < I; ++i) {
      Vec row(S * A);
      for (int k = 0; k < S * A; ++k) row[k] = rng.uniform(-1.0, 1.0);
      row *= 0.9 * std::sqrt(static_cast<double>(S * A)) / row.norm();
      fm.table[h].col(i) = row;
    }
  }
  double B = 0.0;
  for (const Mat& t : fm.table)
    for (int r = 0; r < t.rows(); ++r) B = std::max(B, t.row(r).norm());
  fm.B = B;
  return fm;
}

// Regulator objective features psi_h(s, a) = Xi_h * inner(s, a) with
// inner = [clamp(s)/ (extent*sqrt(d_s)) ; onehot(a)] / sqrt(2), ||inner|| <= 1.
KnrObjectiveFeatures knr_xi_features(int state_dim, int num_actions, int H, int I, double extent,
                                     std::uint64_t seed) {
  const int d_inner = state_dim + num_actions;
  CounterRng root(seed);
  std::vector<Mat> xis(H, Mat(I, d_inner));
  for (int h = 0; h < H; ++h) {
    CounterRng rng = root.fork(h);
    for (int i = 0; i < I; ++i) {
      Vec row(d_inner);
      for (int k = 0; k < d_inner; ++k) row[k] = rng.uniform(-1.0, 1.0);
      row *= 0.9 * std::sqrt(static_cast<double>(d_inner)) / row.norm();
      xis[h].row(i) = row.transpose();
    }
  }
  KnrObjectiveFeatures feats;
  feats.d = I;
  feats.B = 0.9 * std::sqrt(static_cast<double>(I * d_inner));
  feats.eval = [xis, extent, state_dim, num_actions](int h, const Vec& s, int a) {
    Vec inner = Vec::Zero(state_dim + num_actions);
    const double scale = extent * std::sqrt(static_cast<double>(state_dim));
    for (int i = 0; i < state_dim; ++i)
      inner[i] = std::clamp(s[i], -extent, extent) / scale;
    inner[state_dim + a] = 1.0;
    inner /= std::sqrt(2.0);
    return Vec(xis[static_cast<size_t>(h)] * inner);
  };
  return feats;
}

Mat random_spectral_matrix(int rows, int cols, double spectral_norm, std::uint64_t seed) {
  CounterRng rng(seed);
  Mat W(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) W(r, c) = rng.normal();
  Eigen::JacobiSVD<Mat> svd(W);
  const double top = svd.singularValues()(0);
  if (top > 0.0) W *= spectral_norm / top;
  return W;
}

// ---------------------------------------------------------------------------
// Oracles from config
// ---------------------------------------------------------------------------

ConvexOracle build_oracle(const ConfigMap& cfg, const std::string& section, int dim) {
  const std::string type = cfg.require_string(section + ".type");
  auto check_dim = [&](const Vec& v, const std::string& key) {
    if (v.size() != dim) {
      std::ostringstream os;
      os << "expected " << dim << " entries (horizon * feature dim), got " << v.size();
      cfg.fail(key, os.str());
    }
  };
  if (type == "linear") {
    const Vec c = cfg.require_vec(section + ".coeffs");
    check_dim(c, section + ".coeffs");
    return make_linear_oracle(c);
  }
  if (type == "dist_point") {
    const Vec p = cfg.require_vec(section + ".point");
    check_dim(p, section + ".point");
    return make_distance_to_point_oracle(p);
  }
  if (type == "dist_ball") {
    const Vec c = cfg.require_vec(section + ".center");
    check_dim(c, section + ".center");
    return make_distance_to_ball_oracle(c, cfg.get_double(section + ".radius", 0.0));
  }
  cfg.fail(section + ".type", "expected linear, dist_point, or dist_ball");
}

ComparatorMode parse_comparator(const ConfigMap& cfg, EnvKind kind) {
  const std::string def = kind == EnvKind::kKnr ? "frank_wolfe" : "enumeration";
  const std::string mode = cfg.get_string("comparator.mode", def);
  if (mode == "none") return ComparatorMode::kNone;
  if (mode == "enumeration") return ComparatorMode::kEnumeration;
  if (mode == "frank_wolfe") return ComparatorMode::kFrankWolfe;
  cfg.fail("comparator.mode", "expected none, enumeration, or frank_wolfe");
}

}  // namespace

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  const ConfigMap cfg = parse_kv(text, origin);
  RunConfig rc;
  ExperimentSpec& spec = rc.spec;

  // [algorithm]
  spec.T = cfg.get_int("algorithm.T", 100);
  spec.seed = cfg.get_u64("algorithm.seed", 1);
  spec.Gamma = cfg.get_double("algorithm.gamma_cap", 1.0);
  spec.anytime = cfg.get_bool("algorithm.anytime", true);
  spec.delta = cfg.get_double("algorithm.delta", 0.1);
  spec.kappa = cfg.get_double("algorithm.kappa", 1.0);
  spec.lambda = cfg.get_double("algorithm.lambda", 1.0);
  spec.lowrank_c = cfg.get_double("algorithm.lowrank_c", 2.0);
  spec.plan_budget = cfg.get_ll("algorithm.plan_budget", 10000);
  spec.knr_mc_n = cfg.get_int("algorithm.knr_mc_n", 2000);
  spec.knr_privileged_n = cfg.get_int("algorithm.knr_privileged_n", 1000);
  {
    const std::string mode = cfg.get_string("algorithm.plan_mode", "factored");
    if (mode == "factored")
      spec.plan_mode = LowRankPlanMode::kFactored;
    else if (mode == "enumeration")
      spec.plan_mode = LowRankPlanMode::kEnumeration;
    else
      cfg.fail("algorithm.plan_mode", "expected factored or enumeration");
  }

  // [environment]
  const std::string kind = cfg.require_string("environment.kind");
  int embed_d = 0;
  if (kind == "known" || kind == "lowrank") {
    spec.kind = kind == "known" ? EnvKind::kKnown : EnvKind::kLowRank;
    if (cfg.has("environment.model_file")) {
      const std::string path = cfg.require_string("environment.model_file");
      std::ifstream in(path);
      if (!in) cfg.fail("environment.model_file", "cannot open '" + path + "'");
      spec.truth = FiniteModel::load(in);
    } else {
      const int S = cfg.get_int("environment.states", 3);
      const int A = cfg.get_int("environment.actions", 2);
      const int H = cfg.get_int("environment.horizon", 3);
      spec.truth = random_stochastic_model(S, A, H, cfg.get_u64("environment.model_seed", 1));
    }
    const std::string feats = cfg.get_string("environment.features", "onehot");
    if (feats == "onehot") {
      spec.features = TabularFeatureMap::onehot(spec.truth.S, spec.truth.A);
    } else if (feats == "random") {
      spec.features = TabularFeatureMap::random(
          spec.truth.S, spec.truth.A, spec.truth.H, cfg.get_int("environment.feature_dim", 4),
          cfg.get_double("environment.feature_bound", 1.0),
          cfg.get_u64("environment.feature_seed", 1));
    } else {
      cfg.fail("environment.features", "expected onehot or random");
    }
    spec.B = spec.features.B;
    embed_d = spec.features.d;
    if (spec.kind == EnvKind::kLowRank) {
      const int n = cfg.get_int("environment.class_size", 6);
      spec.truth_index = cfg.get_int("environment.truth_index", 0);
      spec.model_class =
          perturbed_class(spec.truth, n, cfg.get_double("environment.class_perturbation", 0.3),
                          cfg.get_u64("environment.class_seed", 1), spec.truth_index);
    }
  } else if (kind == "knr") {
    spec.kind = EnvKind::kKnr;
    const int d_s = cfg.get_int("environment.state_dim", 2);
    const int A = cfg.get_int("environment.num_actions", 2);
    const int H = cfg.get_int("environment.horizon", 3);
    const double sigma = cfg.get_double("environment.sigma", 0.1);
    const std::string dyn = cfg.get_string("environment.dyn_features", "identity");
    KnrFeatures phi;
    if (dyn == "identity") {
      phi = KnrFeatures::identity(d_s, A);
    } else if (dyn == "random_projection") {
      phi = KnrFeatures::random_projection(d_s, A, cfg.get_int("environment.d_phi", d_s + A + 1),
                                           cfg.get_u64("environment.dyn_seed", 1));
    } else {
      cfg.fail("environment.dyn_features", "expected identity or random_projection");
    }
    spec.knr_truth.phi = phi;
    spec.knr_truth.W = random_spectral_matrix(d_s, phi.d_phi,
                                              cfg.get_double("environment.w_scale", 0.9),
                                              cfg.get_u64("environment.w_seed", 1));
    spec.knr_truth.sigma = sigma;
    spec.knr_truth.H = H;
    spec.knr_truth.num_actions = A;
    if (cfg.has("environment.initial_state")) {
      spec.knr_truth.initial_state = cfg.require_vec("environment.initial_state");
      if (spec.knr_truth.initial_state.size() != d_s)
        cfg.fail("environment.initial_state", "dimension mismatch with state_dim");
    } else {
      spec.knr_truth.initial_state = Vec::Zero(d_s);
    }
    double extent = cfg.get_double("environment.grid_extent", 0.0);
    if (extent <= 0.0)
      extent = 1.0 + 4.0 * sigma * std::sqrt(static_cast<double>(H)) +
               (d_s > 0 ? spec.knr_truth.initial_state.cwiseAbs().maxCoeff() : 0.0);
    spec.grid = StateGrid::centered(d_s, extent, cfg.get_int("environment.grid_nodes", 41));
    const int I = cfg.get_int("environment.obj_dim", 2);
    spec.knr_features =
        knr_xi_features(d_s, A, H, I, extent, cfg.get_u64("environment.obj_seed", 1));
    spec.B = spec.knr_features.B;
    embed_d = I;
  } else {
    cfg.fail("environment.kind", "expected known, lowrank, or knr");
  }

  // [objective] / [constraint]
  const int dim = spec.horizon() * embed_d;
  spec.f = build_oracle(cfg, "objective", dim);
  if (cfg.section_present("constraint")) spec.g = build_oracle(cfg, "constraint", dim);

  // [comparator]
  rc.comparator = parse_comparator(cfg, spec.kind);
  rc.comparator_tol = cfg.get_double("comparator.tol", 1e-7);
  rc.comparator_budget = cfg.get_ll("comparator.budget", 100000);

  // [output] / [sweep]
  rc.name = cfg.get_string("output.name", "run");
  rc.emit_plots = cfg.get_bool("output.emit_plots", false);
  rc.sweep_seeds = cfg.get_u64_list("sweep.seeds");
  if (rc.sweep_seeds.empty()) rc.sweep_seeds = {spec.seed};
  rc.sweep_T = cfg.get_int_list("sweep.T");

  cfg.finish();
  return rc;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

RunConfig make_apprenticeship(std::uint64_t seed, bool with_ball) {
  constexpr int S = 5, A = 3, H = 4, d = 6;
  RunConfig rc;
  ExperimentSpec& spec = rc.spec;
  spec.kind = EnvKind::kKnown;
  spec.truth = random_stochastic_model(S, A, H, derive_seed(seed, 101));
  spec.features = TabularFeatureMap::random(S, A, H, d, 1.0, derive_seed(seed, 102));
  spec.B = spec.features.B;

  CounterRng rng(derive_seed(seed, 103));
  Vec theta(H * d);
  for (int i = 0; i < H * d; ++i) theta[i] = rng.normal();
  const ValueIterationResult vi =
      value_iteration(spec.truth, make_cost_tables(spec.features, theta, S, A, H));
  const Vec psi_expert = exact_embedding(spec.truth, spec.features, vi.greedy);
  spec.f = make_distance_to_point_oracle(psi_expert);

  spec.Gamma = 1.0;
  if (with_ball) {
    const Vec psi_safe =
        exact_embedding(spec.truth, spec.features, StagePolicy::uniform(S, A, H));
    const double dist = (psi_expert - psi_safe).norm();
    spec.g = make_distance_to_ball_oracle(psi_safe, 0.5 * dist);
    spec.Gamma = 2.0;
  }

  spec.T = 100;
  spec.delta = 0.1;
  spec.anytime = true;
  spec.seed = seed;
  rc.comparator = ComparatorMode::kFrankWolfe;
  rc.comparator_tol = 1e-7;
  rc.name = with_ball ? "apprenticeship_tabular_ball" : "apprenticeship_tabular";
  rc.sweep_seeds = {seed};
  return rc;
}

ExperimentSpec make_multiobjective_finite(std::uint64_t seed, int I, bool identity_h) {
  constexpr int S = 3, A = 2, H = 3;
  ExperimentSpec spec;
  spec.kind = EnvKind::kKnown;
  spec.truth = random_stochastic_model(S, A, H, derive_seed(seed, 201));
  spec.features = xi_mapped_features(S, A, H, I, derive_seed(seed, 202));
  spec.B = spec.features.B;
  spec.T = 100;
  spec.delta = 0.1;
  spec.seed = seed;
  spec.Gamma = 2.0;

  if (identity_h && I == 1) {
    spec.f = make_linear_oracle(Vec::Ones(H));
    spec.g = make_linear_oracle(-Vec::Ones(H));
    return spec;
  }
  const StagePolicy ref = random_stochastic_policy(S, A, H, derive_seed(seed, 203));
  const Vec target = exact_embedding(spec.truth, spec.features, ref);
  const Vec center =
      exact_embedding(spec.truth, spec.features, StagePolicy::uniform(S, A, H));
  spec.f = make_distance_to_point_oracle(target);
  spec.g = make_distance_to_ball_oracle(center, 0.6 * (target - center).norm());
  return spec;
}

RunConfig make_multiobjective_lowrank(std::uint64_t seed) {
  RunConfig rc;
  rc.spec = make_multiobjective_finite(seed, 2, false);
  rc.spec.kind = EnvKind::kLowRank;
  rc.spec.truth_index = static_cast<int>(seed % 6);
  rc.spec.model_class =
      perturbed_class(rc.spec.truth, 6, 0.3, derive_seed(seed, 204), rc.spec.truth_index);
  rc.spec.lowrank_c = 2.0;
  rc.spec.plan_mode = LowRankPlanMode::kFactored;
  rc.comparator = ComparatorMode::kEnumeration;
  rc.comparator_tol = 1e-7;
  rc.name = "multiobjective_lowrank";
  rc.sweep_seeds = {seed};
  return rc;
}

RunConfig make_multiobjective_knr(std::uint64_t seed) {
  constexpr int d_s = 2, A = 3, H = 4, I = 2;
  constexpr double sigma = 0.2;
  RunConfig rc;
  ExperimentSpec& spec = rc.spec;
  spec.kind = EnvKind::kKnr;
  spec.knr_truth.phi = KnrFeatures::identity(d_s, A);
  spec.knr_truth.W =
      random_spectral_matrix(d_s, spec.knr_truth.phi.d_phi, 0.9, derive_seed(seed, 301));
  spec.knr_truth.sigma = sigma;
  spec.knr_truth.H = H;
  spec.knr_truth.num_actions = A;
  spec.knr_truth.initial_state = Vec::Zero(d_s);

  const double extent = 1.0 + 4.0 * sigma * std::sqrt(static_cast<double>(H));
  spec.grid = StateGrid::centered(d_s, extent, 21);
  spec.knr_features = knr_xi_features(d_s, A, H, I, extent, derive_seed(seed, 302));
  spec.B = spec.knr_features.B;

  const KnrPolicy ref = [](int h, const Vec&) { return h % A; };
  const KnrPolicy alt = [](int h, const Vec&) { return (h + 1) % A; };
  const Vec target =
      knr_monte_carlo_embedding(spec.knr_truth, spec.knr_features, ref, 4000, derive_seed(seed, 303));
  const Vec center =
      knr_monte_carlo_embedding(spec.knr_truth, spec.knr_features, alt, 4000, derive_seed(seed, 304));
  spec.f = make_distance_to_point_oracle(target);
  spec.g = make_distance_to_ball_oracle(center, 0.6 * (target - center).norm());
  spec.Gamma = 2.0;
  spec.T = 50;
  spec.delta = 0.1;
  spec.seed = seed;
  rc.comparator = ComparatorMode::kFrankWolfe;
  rc.comparator_tol = 1e-7;
  rc.name = "multiobjective_knr";
  rc.sweep_seeds = {seed};
  return rc;
}

std::vector<std::string> preset_names() {
  return {"apprenticeship_tabular", "apprenticeship_tabular_ball", "multiobjective_knr",
          "multiobjective_lowrank"};
}

RunConfig make_preset(const std::string& name, std::uint64_t seed) {
  if (name == "apprenticeship_tabular") return make_apprenticeship(seed, false);
  if (name == "apprenticeship_tabular_ball") return make_apprenticeship(seed, true);
  if (name == "multiobjective_knr") return make_multiobjective_knr(seed);
  if (name == "multiobjective_lowrank") return make_multiobjective_lowrank(seed);
  std::ostringstream os;
  os << "unknown preset '" << name << "'; available:";
  for (const std::string& n : preset_names()) os << " " << n;
  throw ConfigError(os.str());
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

const char* const kCsvHeader =
    "t,f_hat,g_hat,f_mixed,g_mixed,regret_avg,violation_avg,gamma,alpha_norm,beta_norm,"
    "V1_plan,coverage_flag";

void write_csv(std::ostream& out, const RunResult& result, const GroundTruth* truth) {
  out << kCsvHeader << "\n";
  for (const EpisodeRecord& rec : result.records) {
    const double regret_avg =
        truth ? rec.f_mixed - truth->f_star : std::numeric_limits<double>::quiet_NaN();
    out << rec.t << ',' << format17(rec.f_hat) << ',' << format17(rec.g_hat) << ','
        << format17(rec.f_mixed) << ',' << format17(rec.g_mixed) << ',' << format17(regret_avg)
        << ',' << format17(rec.g_mixed) << ',' << format17(rec.dual.gamma) << ','
        << format17(rec.dual.alpha.norm()) << ',' << format17(rec.dual.beta.norm()) << ','
        << format17(rec.V1_plan) << ',' << (rec.coverage ? 1 : 0) << "\n";
  }
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw ConfigError("csv: no column named '" + name + "'");
}

double CsvTable::at(int row, const std::string& name) const {
  return rows.at(static_cast<size_t>(row)).at(static_cast<size_t>(column(name)));
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> parts = split(line, ',');
    if (table.columns.empty()) {
      for (const std::string& p : parts) table.columns.push_back(trim(p));
      continue;
    }
    if (parts.size() != table.columns.size()) {
      std::ostringstream os;
      os << "csv line " << line_no << ": expected " << table.columns.size() << " fields, got "
         << parts.size();
      throw ConfigError(os.str());
    }
    std::vector<double> row;
    row.reserve(parts.size());
    for (const std::string& p : parts) {
      const std::string t = trim(p);
      char* end = nullptr;
      const double v = std::strtod(t.c_str(), &end);
      if (t.empty() || end != t.c_str() + t.size()) {
        std::ostringstream os;
        os << "csv line " << line_no << ": bad number '" << t << "'";
        throw ConfigError(os.str());
      }
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.columns.empty()) throw ConfigError("csv: empty input");
  return table;
}

void write_truth_sidecar(std::ostream& out, const GroundTruth& truth) {
  out << "f_star " << format17(truth.f_star) << "\n";
  out << "g_star " << format17(truth.g_star) << "\n";
  out << "certified_gap " << format17(truth.certified_gap) << "\n";
  out << "kkt_residual " << format17(truth.kkt_residual) << "\n";
  out << "rho_used " << format17(truth.rho_used) << "\n";
  out << "psi_star";
  for (Eigen::Index i = 0; i < truth.psi_star.size(); ++i)
    out << ' ' << format17(truth.psi_star[i]);
  out << "\n";
  out << "support_size " << truth.weights.size() << "\n";
  out << "weights";
  for (double w : truth.weights) out << ' ' << format17(w);
  out << "\n";
  for (size_t k = 0; k < truth.support_policies.size(); ++k) {
    out << "policy_" << k;
    for (const auto& stage : truth.support_policies[k])
      for (int a : stage) out << ' ' << a;
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

TabularFeatureMap make_grid_features(const StateGrid& grid, const KnrObjectiveFeatures& features,
                                     int H, int num_actions) {
  const int n = grid.total_nodes();
  TabularFeatureMap fm;
  fm.d = features.d;
  fm.table.assign(H, Mat(n * num_actions, features.d));
  double B = features.B;
  for (int h = 0; h < H; ++h)
    for (int i = 0; i < n; ++i) {
      const Vec s = grid.node(i);
      for (int a = 0; a < num_actions; ++a) {
        const Vec psi = features.eval(h, s, a);
        fm.table[h].row(i * num_actions + a) = psi.transpose();
        B = std::max(B, psi.norm());
      }
    }
  fm.B = B;
  return fm;
}

GroundTruth solve_ground_truth(const ExperimentSpec& spec, ComparatorMode mode, double tol,
                               long long budget) {
  if (mode == ComparatorMode::kNone)
    throw ConfigError("solve_ground_truth: comparator mode is none");
  if (spec.kind == EnvKind::kKnr) {
    if (mode == ComparatorMode::kEnumeration)
      throw ConfigError(
          "solve_ground_truth: enumeration unavailable for regulator instances; use frank_wolfe");
    const DiscretizedKnr disc = discretize_knr(spec.knr_truth, spec.grid);
    const TabularFeatureMap feats =
        make_grid_features(spec.grid, spec.knr_features, spec.knr_truth.H,
                           spec.knr_truth.num_actions);
    return ground_truth_solve(disc.model, feats, spec.f, spec.g, TruthMode::kFrankWolfe, tol,
                              budget);
  }
  const TruthMode tm = mode == ComparatorMode::kEnumeration ? TruthMode::kEnumeration
                                                            : TruthMode::kFrankWolfe;
  return ground_truth_solve(spec.truth, spec.features, spec.f, spec.g, tm, tol, budget);
}

namespace {

RunOutputs run_one(const RunConfig& config, const std::string& out_dir,
                   const GroundTruth* precomputed) {
  config.spec.validate();
  RunOutputs out;
  if (precomputed) {
    out.truth = *precomputed;
  } else if (config.comparator != ComparatorMode::kNone) {
    out.truth = solve_ground_truth(config.spec, config.comparator, config.comparator_tol,
                                   config.comparator_budget);
  }
  out.result = run(config.spec);

  const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
  fs::create_directories(dir);
  const std::string base = config.name + "_seed" + std::to_string(config.spec.seed);
  const fs::path csv_path = dir / (base + ".csv");
  {
    std::ofstream os(csv_path);
    if (!os) throw ConfigError("cannot write '" + csv_path.string() + "'");
    write_csv(os, out.result, out.truth ? &*out.truth : nullptr);
  }
  out.csv_path = csv_path.string();
  if (out.truth) {
    std::ofstream os(dir / (base + "_truth.txt"));
    if (!os) throw ConfigError("cannot write the ground-truth sidecar");
    write_truth_sidecar(os, *out.truth);
  }
  if (config.emit_plots) {
    const fs::path gp = dir / (base + ".gp");
    std::ofstream os(gp);
    if (!os) throw ConfigError("cannot write '" + gp.string() + "'");
    os << "# gnuplot script; render with: gnuplot " << gp.filename().string() << "\n";
    os << "set datafile separator \",\"\n";
    os << "set terminal pngcairo size 1000,700\n";
    os << "set output \"" << base << ".png\"\n";
    os << "set xlabel \"episode t\"\n";
    os << "plot \"" << base + ".csv" << "\" using 1:6 with lines title \"regret avg\", \\\n";
    os << "     \"" << base + ".csv" << "\" using 1:7 with lines title \"violation avg\", \\\n";
    os << "     \"" << base + ".csv" << "\" using 1:2 with lines title \"f hat\", \\\n";
    os << "     \"" << base + ".csv" << "\" using 1:4 with lines title \"f mixed\"\n";
  }
  return out;
}

}  // namespace

RunOutputs execute_run(const RunConfig& config, const std::string& out_dir) {
  return run_one(config, out_dir, nullptr);
}

std::vector<std::string> execute_sweep(const RunConfig& config, const std::string& out_dir) {
  config.spec.validate();
  std::optional<GroundTruth> truth;
  if (config.comparator != ComparatorMode::kNone)
    truth = solve_ground_truth(config.spec, config.comparator, config.comparator_tol,
                               config.comparator_budget);

  const std::vector<int> Ts =
      config.sweep_T.empty() ? std::vector<int>{config.spec.T} : config.sweep_T;
  const std::vector<std::uint64_t> seeds = config.sweep_seeds.empty()
                                               ? std::vector<std::uint64_t>{config.spec.seed}
                                               : config.sweep_seeds;
  std::vector<RunConfig> jobs;
  for (int T : Ts)
    for (std::uint64_t s : seeds) {
      RunConfig j = config;
      j.spec.T = T;
      j.spec.seed = s;
      if (!config.sweep_T.empty()) j.name = config.name + "_T" + std::to_string(T);
      jobs.push_back(std::move(j));
    }

  std::vector<std::string> paths(jobs.size());
  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        paths[i] = run_one(jobs[i], out_dir, truth ? &*truth : nullptr).csv_path;
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  const unsigned n_threads = static_cast<unsigned>(
      std::min<size_t>(jobs.size(), std::max(1u, std::thread::hardware_concurrency())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return paths;
}

// ---------------------------------------------------------------------------
// CLI
// ---------------------------------------------------------------------------

int cli_run(int argc, char** argv) {
  CLI::App app{"Constrained convex MDP simulator"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir = ".";
  std::uint64_t seed = 1;
  bool emit_plots = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "path to a config file");
    sub->add_option("--preset", preset_name, "built-in preset name (see `presets`)");
    sub->add_option("--seed", seed, "seed (instance and run)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--emit-plots", emit_plots, "also write a gnuplot script");
  };
  CLI::App* cmd_run = app.add_subcommand("run", "execute one experiment");
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "fan out over the config's sweep block");
  CLI::App* cmd_oracle = app.add_subcommand("oracle", "solve the ground truth only");
  app.add_subcommand("presets", "list built-in presets");
  add_common(cmd_run);
  add_common(cmd_sweep);
  add_common(cmd_oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("presets")) {
      for (const std::string& n : preset_names()) std::cout << n << "\n";
      return 0;
    }
    CLI::App* active = app.get_subcommands().at(0);
    const bool seed_given = active->count("--seed") > 0;

    if (config_path.empty() == preset_name.empty())
      throw ConfigError("pass exactly one of --config PATH or --preset NAME");
    RunConfig rc = preset_name.empty() ? load_config_file(config_path)
                                       : make_preset(preset_name, seed);
    if (seed_given) {
      rc.spec.seed = seed;
      if (rc.sweep_seeds.size() <= 1) rc.sweep_seeds = {seed};
    }
    rc.emit_plots = rc.emit_plots || emit_plots;

    if (app.got_subcommand("run")) {
      const RunOutputs out = execute_run(rc, out_dir);
      const EpisodeRecord& last = out.result.records.back();
      std::cout << "wrote " << out.csv_path << "\n";
      std::cout << "episodes " << out.result.records.size() << ", f_mixed "
                << format17(last.f_mixed) << ", g_mixed " << format17(last.g_mixed);
      if (out.truth)
        std::cout << ", regret " << format17(last.t * (last.f_mixed - out.truth->f_star))
                  << ", violation " << format17(last.t * last.g_mixed);
      std::cout << "\n";
    } else if (app.got_subcommand("sweep")) {
      for (const std::string& p : execute_sweep(rc, out_dir)) std::cout << "wrote " << p << "\n";
    } else if (app.got_subcommand("oracle")) {
      const ComparatorMode mode =
          rc.comparator != ComparatorMode::kNone
              ? rc.comparator
              : (rc.spec.kind == EnvKind::kKnr ? ComparatorMode::kFrankWolfe
                                               : ComparatorMode::kEnumeration);
      const GroundTruth truth =
          solve_ground_truth(rc.spec, mode, rc.comparator_tol, rc.comparator_budget);
      const fs::path dir = out_dir.empty() ? fs::path(".") : fs::path(out_dir);
      fs::create_directories(dir);
      const fs::path sidecar = dir / (rc.name + "_truth.txt");
      std::ofstream os(sidecar);
      if (!os) throw ConfigError("cannot write '" + sidecar.string() + "'");
      write_truth_sidecar(os, truth);
      std::cout << "wrote " << sidecar.string() << "\n";
      std::cout << "f_star " << format17(truth.f_star) << ", g_star " << format17(truth.g_star)
                << ", certified_gap " << format17(truth.certified_gap) << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ccmdp
