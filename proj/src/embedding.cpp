#include "ccmdp/embedding.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "ccmdp/errors.hpp"

namespace ccmdp {

namespace {

void check_stochastic_rows(const Mat& m, const char* what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (!(v >= 0.0)) {
        std::ostringstream msg;
        msg << what << ": negative or non-finite entry " << v << " in row " << r;
        throw ConfigError(msg.str());
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      std::ostringstream msg;
      msg << what << ": row " << r << " sums to " << sum << ", expected 1";
      throw ConfigError(msg.str());
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// FiniteModel
// ---------------------------------------------------------------------------

void FiniteModel::validate() const {
  if (S <= 0 || A <= 0 || H <= 0) throw ConfigError("FiniteModel: S, A, H must be positive");
  if (static_cast<long long>(S) * A * H > 1000000LL)
    throw ConfigError("FiniteModel: S*A*H exceeds the 1e6 dense cap");
  if (initial_state < 0 || initial_state >= S)
    throw ConfigError("FiniteModel: initial state out of range");
  if (tensors.size() != 1 && static_cast<int>(tensors.size()) != H)
    throw ConfigError("FiniteModel: expected 1 or H stage tensors");
  for (const Mat& t : tensors) {
    if (t.rows() != S * A || t.cols() != S)
      throw ConfigError("FiniteModel: stage tensor must be (S*A) x S");
    check_stochastic_rows(t, "FiniteModel transition");
  }
}

FiniteModel FiniteModel::load(std::istream& in) {
  FiniteModel m;
  if (!(in >> m.S >> m.A >> m.H)) throw ConfigError("FiniteModel: malformed header, expected 'S A H'");
  if (m.S <= 0 || m.A <= 0 || m.H <= 0) throw ConfigError("FiniteModel: header values must be positive");
  m.tensors.assign(m.H, Mat(m.S * m.A, m.S));
  for (int h = 0; h < m.H; ++h) {
    for (int r = 0; r < m.S * m.A; ++r) {
      for (int c = 0; c < m.S; ++c) {
        if (!(in >> m.tensors[h](r, c))) {
          std::ostringstream msg;
          msg << "FiniteModel: truncated tensor at stage " << h + 1 << ", row " << r;
          throw ConfigError(msg.str());
        }
      }
    }
  }
  if (!(in >> m.initial_state)) throw ConfigError("FiniteModel: missing initial state index");
  m.validate();
  return m;
}

void FiniteModel::save(std::ostream& out) const {
  out << S << " " << A << " " << H << "\n";
  out.precision(17);
  for (int h = 0; h < H; ++h) {
    const Mat& t = stage(h);
    for (int r = 0; r < S * A; ++r) {
      for (int c = 0; c < S; ++c) out << t(r, c) << (c + 1 == S ? "\n" : " ");
    }
    out << "\n";
  }
  out << initial_state << "\n";
}

// ---------------------------------------------------------------------------
// StagePolicy
// ---------------------------------------------------------------------------

void StagePolicy::validate(int S, int A) const {
  if (probs.empty()) throw ConfigError("StagePolicy: empty");
  for (const Mat& p : probs) {
    if (p.rows() != S || p.cols() != A) throw ConfigError("StagePolicy: stage matrix must be S x A");
    check_stochastic_rows(p, "StagePolicy");
  }
}

StagePolicy StagePolicy::deterministic(const std::vector<std::vector<int>>& actions, int S, int A) {
  StagePolicy pi;
  pi.probs.reserve(actions.size());
  for (const auto& stage : actions) {
    if (static_cast<int>(stage.size()) != S) throw ConfigError("StagePolicy: action table must have S entries per stage");
    Mat p = Mat::Zero(S, A);
    for (int s = 0; s < S; ++s) {
      if (stage[s] < 0 || stage[s] >= A) throw ConfigError("StagePolicy: action index out of range");
      p(s, stage[s]) = 1.0;
    }
    pi.probs.push_back(std::move(p));
  }
  return pi;
}

StagePolicy StagePolicy::uniform(int S, int A, int H) {
  StagePolicy pi;
  pi.probs.assign(H, Mat::Constant(S, A, 1.0 / A));
  return pi;
}

int StagePolicy::sample_action(int h, int s, CounterRng& rng) const {
  return sample_row(probs[h].row(s), rng);
}

// ---------------------------------------------------------------------------
// TabularFeatureMap
// ---------------------------------------------------------------------------

void TabularFeatureMap::validate() const {
  if (d <= 0 || table.empty()) throw ConfigError("TabularFeatureMap: empty");
  for (const Mat& t : table) {
    if (t.cols() != d) throw ConfigError("TabularFeatureMap: table has wrong feature dimension");
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      if (t.row(r).norm() > B + 1e-12) {
        std::ostringstream msg;
        msg << "TabularFeatureMap: row " << r << " norm " << t.row(r).norm() << " exceeds bound " << B;
        throw ConfigError(msg.str());
      }
    }
  }
}

TabularFeatureMap TabularFeatureMap::onehot(int S, int A) {
  TabularFeatureMap f;
  f.d = S * A;
  f.B = 1.0;
  f.table.assign(1, Mat::Identity(S * A, S * A));
  return f;
}

TabularFeatureMap TabularFeatureMap::random(int S, int A, int H, int d, double B,
                                            std::uint64_t seed) {
  TabularFeatureMap f;
  f.d = d;
  f.B = B;
  CounterRng rng(seed);
  f.table.assign(H, Mat(S * A, d));
  double max_norm = 0.0;
  for (int h = 0; h < H; ++h) {
    CounterRng stage_rng = rng.fork(h);
    for (int r = 0; r < S * A; ++r)
      for (int c = 0; c < d; ++c) f.table[h](r, c) = stage_rng.normal();
    max_norm = std::max(max_norm, f.table[h].rowwise().norm().maxCoeff());
  }
  if (max_norm > 0.0)
    for (Mat& t : f.table) t *= B / max_norm;
  return f;
}

// ---------------------------------------------------------------------------
// Occupancy and embeddings
// ---------------------------------------------------------------------------

OccupancyMeasure compute_occupancy(const FiniteModel& model, const StagePolicy& policy) {
  model.validate();
  if (policy.horizon() != model.H) throw ConfigError("compute_occupancy: policy horizon mismatch");
  policy.validate(model.S, model.A);

  OccupancyMeasure occ;
  occ.d.assign(model.H, Mat::Zero(model.S, model.A));

  Vec state_dist = Vec::Zero(model.S);
  state_dist[model.initial_state] = 1.0;
  for (int h = 0; h < model.H; ++h) {
    occ.d[h] = state_dist.asDiagonal() * policy.probs[h];
    if (h + 1 < model.H) {
      Vec next = Vec::Zero(model.S);
      const Mat& P = model.stage(h);
      for (int s = 0; s < model.S; ++s)
        for (int a = 0; a < model.A; ++a) {
          const double w = occ.d[h](s, a);
          if (w > 0.0) next += w * P.row(model.row(s, a)).transpose();
        }
      state_dist = next;
    }
  }
  return occ;
}

Vec kernel_embedding(const OccupancyMeasure& occ, const TabularFeatureMap& features, int A) {
  const int H = occ.horizon();
  Vec psi = Vec::Zero(static_cast<Eigen::Index>(H) * features.d);
  for (int h = 0; h < H; ++h) {
    const Mat& F = features.stage(h);
    const int S = static_cast<int>(occ.d[h].rows());
    Vec block = Vec::Zero(features.d);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const double w = occ.d[h](s, a);
        if (w != 0.0) block += w * F.row(s * A + a).transpose();
      }
    psi.segment(static_cast<Eigen::Index>(h) * features.d, features.d) = block;
  }
  return psi;
}

Vec exact_embedding(const FiniteModel& model, const TabularFeatureMap& features,
                    const StagePolicy& policy) {
  return kernel_embedding(compute_occupancy(model, policy), features, model.A);
}

int sample_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, CounterRng& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    acc += row[i];
    if (u <= acc) return static_cast<int>(i);
  }
  return static_cast<int>(row.size() - 1);  // guard against rounding
}

Trajectory sample_trajectory(const FiniteModel& model, const StagePolicy& policy, CounterRng rng) {
  Trajectory traj;
  traj.states.reserve(model.H + 1);
  traj.actions.reserve(model.H);
  int s = model.initial_state;
  for (int h = 0; h < model.H; ++h) {
    CounterRng stage_rng = rng.fork(h);
    const int a = policy.sample_action(h, s, stage_rng);
    traj.states.push_back(s);
    traj.actions.push_back(a);
    s = sample_row(model.stage(h).row(model.row(s, a)), stage_rng);
  }
  traj.states.push_back(s);
  return traj;
}

Vec monte_carlo_embedding(const FiniteModel& model, const TabularFeatureMap& features,
                          const StagePolicy& policy, int n, std::uint64_t seed) {
  if (n <= 0) throw ConfigError("monte_carlo_embedding: n must be positive");
  Vec acc = Vec::Zero(static_cast<Eigen::Index>(model.H) * features.d);
  CounterRng root(seed);
  for (int e = 0; e < n; ++e) {
    const Trajectory traj = sample_trajectory(model, policy, root.fork(e));
    for (int h = 0; h < model.H; ++h)
      acc.segment(static_cast<Eigen::Index>(h) * features.d, features.d) +=
          features.stage(h).row(traj.states[h] * model.A + traj.actions[h]).transpose();
  }
  return acc / n;
}

}  // namespace ccmdp
