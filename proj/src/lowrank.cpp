#include "ccmdp/lowrank.hpp"

#include <cmath>
#include <sstream>

#include "ccmdp/errors.hpp"

namespace ccmdp {

void ModelClass::validate() const {
  if (candidates.empty()) throw ConfigError("ModelClass: empty candidate list");
  if (theta_count <= 0 || upsilon_count <= 0)
    throw ConfigError("ModelClass: factor counts must be positive");
  const FiniteModel& first = candidates.front();
  for (const FiniteModel& m : candidates) {
    m.validate();
    if (m.S != first.S || m.A != first.A || m.H != first.H ||
        m.initial_state != first.initial_state)
      throw ConfigError("ModelClass: candidates must share S, A, H, initial state");
  }
}

ModelClass ModelClass::from_list(std::vector<FiniteModel> models) {
  ModelClass c;
  c.candidates = std::move(models);
  c.theta_count = c.size();
  c.upsilon_count = 1;
  c.validate();
  return c;
}

ModelClass ModelClass::from_factors(const std::vector<std::vector<Mat>>& phis,
                                    const std::vector<std::vector<Mat>>& mus, int S, int A, int H,
                                    int initial_state) {
  ModelClass c;
  c.theta_count = static_cast<int>(phis.size());
  c.upsilon_count = static_cast<int>(mus.size());
  for (const auto& phi : phis) {
    for (const auto& mu : mus) {
      if (static_cast<int>(phi.size()) != H || static_cast<int>(mu.size()) != H)
        throw ConfigError("ModelClass::from_factors: factors must supply H stages");
      FiniteModel m;
      m.S = S;
      m.A = A;
      m.H = H;
      m.initial_state = initial_state;
      m.tensors.reserve(H);
      for (int h = 0; h < H; ++h) m.tensors.push_back(phi[h] * mu[h]);
      m.validate();  // rejects factor pairs that do not form stochastic rows
      c.candidates.push_back(std::move(m));
    }
  }
  c.validate();
  return c;
}

void collect_augmented_tuples(const FiniteModel& truth, const StagePolicy& policy, CounterRng rng,
                              StageDataset* out) {
  if (out->horizon() != truth.H) throw ConfigError("collect_augmented_tuples: dataset horizon mismatch");
  for (int h = 0; h < truth.H; ++h) {
    CounterRng branch = rng.fork(h);
    int s = truth.initial_state;
    for (int i = 0; i < h; ++i) {
      CounterRng step_rng = branch.fork(i);
      const int a = policy.sample_action(i, s, step_rng);
      s = sample_row(truth.stage(i).row(truth.row(s, a)), step_rng);
    }
    CounterRng probe = branch.fork(h);
    const int a = probe.uniform_int(truth.A);
    const int s_next = sample_row(truth.stage(h).row(truth.row(s, a)), probe);
    out->data[h].push_back({s, a, s_next});
  }
}

std::vector<int> mle_fit(const StageDataset& data, const ModelClass& models) {
  const int H = data.horizon();
  std::vector<int> best(H, 0);
  for (int h = 0; h < H; ++h) {
    if (data.data[h].empty()) continue;  // index 0 by convention
    double best_ll = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < models.size(); ++i) {
      const Mat& P = models.candidates[i].stage(h);
      double ll = 0.0;
      for (const StageTuple& t : data.data[h])
        ll += std::log(std::max(P(models.candidates[i].row(t.s, t.a), t.s_next), 1e-300));
      if (ll > best_ll + 0.0) {  // strict improvement keeps the lowest index on ties
        best_ll = ll;
        best[h] = i;
      }
    }
  }
  return best;
}

double l1_sq_empirical(const StageDataset& data, int h, const FiniteModel& m1,
                       const FiniteModel& m2) {
  if (h < 0 || h >= data.horizon()) throw ConfigError("l1_sq_empirical: stage out of range");
  const auto& tuples = data.data[h];
  if (tuples.empty()) return 0.0;
  double acc = 0.0;
  for (const StageTuple& t : tuples) {
    const double l1 =
        (m1.stage(h).row(m1.row(t.s, t.a)) - m2.stage(h).row(m2.row(t.s, t.a))).cwiseAbs().sum();
    acc += l1 * l1;
  }
  return acc / tuples.size();
}

double lowrank_radius(int t, int T, int H, int n_theta, int n_upsilon, double delta, double c) {
  if (t < 1 || T < 1 || H < 1) throw ConfigError("lowrank_radius: t, T, H must be >= 1");
  if (n_theta < 1 || n_upsilon < 1) throw ConfigError("lowrank_radius: class counts must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("lowrank_radius: delta must be in (0,1)");
  if (!(c > 0.0)) throw ConfigError("lowrank_radius: c must be > 0");
  return c *
         std::log(static_cast<double>(T) * H * n_upsilon * n_theta / delta) /
         static_cast<double>(t);
}

std::vector<std::vector<int>> confidence_members(const ModelClass& models,
                                                 const StageDataset& data,
                                                 const std::vector<int>& mle_idx, double R) {
  if (R < 0.0) throw ConfigError("confidence_members: radius must be >= 0");
  if (static_cast<int>(mle_idx.size()) != data.horizon())
    throw ConfigError("confidence_members: MLE index count must match horizon");
  std::vector<std::vector<int>> members(data.horizon());
  for (int h = 0; h < data.horizon(); ++h) {
    const FiniteModel& mle = models.candidates[mle_idx[h]];
    for (int i = 0; i < models.size(); ++i)
      if (l1_sq_empirical(data, h, models.candidates[i], mle) <= R) members[h].push_back(i);
  }
  return members;
}

}  // namespace ccmdp
