#pragma once

// Finite low-rank model classes, MLE fitting, and L1 confidence sets.
//
// The realizable class is a finite list of candidate transition tensors (the
// truth is one of them). Each episode contributes one augmented tuple per
// stage: roll the episode policy for h-1 steps, take a uniformly random
// action at stage h, observe s_{h+1}. The MLE maximizes the stage log
// likelihood; the confidence set keeps the candidates whose empirical squared
// L1 distance to the MLE is within the radius
//   R^t = c * log(T H |Upsilon| |Theta| / delta) / t.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ccmdp/embedding.hpp"
#include "ccmdp/rng.hpp"

namespace ccmdp {

// Finite class of candidate models sharing (S, A, H, initial state). The
// factor counts feed the log-cardinality in the confidence radius; flat lists
// default to (|Theta|, |Upsilon|) = (size, 1).
struct ModelClass {
  std::vector<FiniteModel> candidates;
  int theta_count = 0;    // |Theta|
  int upsilon_count = 1;  // |Upsilon|

  int size() const { return static_cast<int>(candidates.size()); }
  void validate() const;  // shapes agree, tensors stochastic, counts positive

  // Flat list with |Theta| = candidates.size(), |Upsilon| = 1.
  static ModelClass from_list(std::vector<FiniteModel> models);

  // Materialize all pairs of feature/measure factors: candidate (i, j) has
  // P_h(s'|s,a) = phi_h^i(s,a) . mu_h^j(s'). Each phi entry is a (S*A) x k
  // matrix per stage, each mu entry a k x S matrix per stage. Rows that fail
  // to form probability vectors are rejected (ConfigError).
  static ModelClass from_factors(const std::vector<std::vector<Mat>>& phis,
                                 const std::vector<std::vector<Mat>>& mus, int S, int A, int H,
                                 int initial_state);
};

// One augmented tuple at a stage.
struct StageTuple {
  int s = 0;
  int a = 0;
  int s_next = 0;
};

// data[h] holds the tuples observed at stage h.
struct StageDataset {
  std::vector<std::vector<StageTuple>> data;

  explicit StageDataset(int H = 0) : data(H) {}
  int horizon() const { return static_cast<int>(data.size()); }
};

// One episode of augmented collection under `policy`: for each stage h, roll
// the policy for h-1 steps from the initial state, take a_h ~ Uniform(A),
// sample s_{h+1} from the true stage tensor. Appends one tuple per stage.
void collect_augmented_tuples(const FiniteModel& truth, const StagePolicy& policy, CounterRng rng,
                              StageDataset* out);

// Per-stage MLE over the class: argmax_i sum_tuples log max(P_i(s'|s,a),
// 1e-300), ties to the lowest index, empty stages to index 0. Returns one
// candidate index per stage.
std::vector<int> mle_fit(const StageDataset& data, const ModelClass& models);

// Mean over tuples of ||P1_h(.|s,a) - P2_h(.|s,a)||_1^2 for stage h; 0 on an
// empty stage.
double l1_sq_empirical(const StageDataset& data, int h, const FiniteModel& m1,
                       const FiniteModel& m2);

// R^t = c log(T H n_upsilon n_theta / delta) / t. Requires t >= 1, T >= 1,
// H >= 1, positive counts, delta in (0,1), c > 0.
double lowrank_radius(int t, int T, int H, int n_theta, int n_upsilon, double delta, double c);

// members[h] = indices i with l1_sq_empirical(data, h, candidate_i, MLE_h)
// <= R. Always contains the MLE index.
std::vector<std::vector<int>> confidence_members(const ModelClass& models,
                                                 const StageDataset& data,
                                                 const std::vector<int>& mle_idx, double R);

}  // namespace ccmdp
