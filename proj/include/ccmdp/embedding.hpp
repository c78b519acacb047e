#pragma once

// Finite MDP models, stage policies, feature maps, and kernel embeddings.
//
// An episodic model has horizon H, states {0..S-1}, actions {0..A-1}, a fixed
// initial state, and one transition tensor per stage. A policy is a per-stage
// row-stochastic S x A matrix. The kernel embedding of a policy stacks the
// per-stage expected feature vectors into a single flat vector of size H*d:
//
//   Psi = ( E[psi_h(s_h, a_h)] )_{h=1..H}   in R^{H*d},
//
// stored stage-major; block h occupies [h*d, (h+1)*d).

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "ccmdp/rng.hpp"

namespace ccmdp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

// Episodic finite MDP. tensors[h] is (S*A) x S with row index s*A + a; each
// row is the distribution of the next state. A single stored tensor is shared
// by all stages (time-homogeneous dynamics). All H stage tensors are defined
// so the post-horizon state s_{H+1} can be sampled, although occupancy flow
// only consumes stages 1..H-1.
struct FiniteModel {
  int S = 0;
  int A = 0;
  int H = 0;
  int initial_state = 0;
  std::vector<Mat> tensors;  // size H, or size 1 when homogeneous

  const Mat& stage(int h) const { return tensors.size() == 1 ? tensors[0] : tensors[h]; }
  int row(int s, int a) const { return s * A + a; }

  // Throws ConfigError unless every row is a probability vector (sum within
  // 1e-12 of one, entries nonnegative) and the shapes/initial state agree.
  void validate() const;

  // Text format: header "S A H", then H row-major (S*A) x S stochastic
  // matrices, then the initial state index. Whitespace separated.
  static FiniteModel load(std::istream& in);
  void save(std::ostream& out) const;
};

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

// Per-stage action distributions; probs[h] is S x A row-stochastic.
struct StagePolicy {
  std::vector<Mat> probs;  // size H

  int horizon() const { return static_cast<int>(probs.size()); }
  void validate(int S, int A) const;

  // Deterministic policy from an action table: actions[h][s].
  static StagePolicy deterministic(const std::vector<std::vector<int>>& actions, int S, int A);
  // The uniform policy.
  static StagePolicy uniform(int S, int A, int H);

  int sample_action(int h, int s, CounterRng& rng) const;
};

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

// Tabular feature map psi_h(s, a) in R^d with a uniform norm bound B. table[h]
// is (S*A) x d with row index s*A + a; a single stored table is shared by all
// stages.
struct TabularFeatureMap {
  int d = 0;
  double B = 1.0;
  std::vector<Mat> table;  // size H, or size 1 when stage-independent

  const Mat& stage(int h) const { return table.size() == 1 ? table[0] : table[h]; }
  Vec psi(int h, int s, int a, int A) const { return stage(h).row(s * A + a).transpose(); }

  // Throws ConfigError if any row norm exceeds B by more than 1e-12.
  void validate() const;

  // Canonical one-hot features: d = S*A, B = 1, psi(s,a) = e_{s*A+a}.
  static TabularFeatureMap onehot(int S, int A);
  // Seeded random rows scaled so max row norm equals B.
  static TabularFeatureMap random(int S, int A, int H, int d, double B, std::uint64_t seed);
};

// ---------------------------------------------------------------------------
// Occupancy and embeddings
// ---------------------------------------------------------------------------

// d[h] is S x A: the probability of being at (s, a) at stage h under the
// policy. Rows of each stage sum to one.
struct OccupancyMeasure {
  std::vector<Mat> d;  // size H

  int horizon() const { return static_cast<int>(d.size()); }
};

// Exact forward DP: d_1(s,a) = 1{s = initial} pi_1(a|s),
// d_{h+1}(s',a') = pi_{h+1}(a'|s') sum_{s,a} P_h(s'|s,a) d_h(s,a).
OccupancyMeasure compute_occupancy(const FiniteModel& model, const StagePolicy& policy);

// Psi_h = sum_{s,a} d_h(s,a) psi_h(s,a), stacked into R^{H*d}.
Vec kernel_embedding(const OccupancyMeasure& occ, const TabularFeatureMap& features, int A);

// Convenience: exact embedding of a policy under a model.
Vec exact_embedding(const FiniteModel& model, const TabularFeatureMap& features,
                    const StagePolicy& policy);

// One sampled trajectory: the visited (s_h, a_h) for h = 1..H and the
// post-horizon state. Uses child streams of `rng` per stage.
struct Trajectory {
  std::vector<int> states;   // size H+1 (last is post-horizon)
  std::vector<int> actions;  // size H
};
Trajectory sample_trajectory(const FiniteModel& model, const StagePolicy& policy, CounterRng rng);

// Monte-Carlo estimate of the embedding from n sampled trajectories. Draws
// come from counter-based streams keyed (seed, episode, stage), so the result
// is a pure function of (model, policy, n, seed).
Vec monte_carlo_embedding(const FiniteModel& model, const TabularFeatureMap& features,
                          const StagePolicy& policy, int n, std::uint64_t seed);

// Sample s' from a stored stochastic row via one uniform draw.
int sample_row(const Eigen::Ref<const Eigen::RowVectorXd>& row, CounterRng& rng);

}  // namespace ccmdp
