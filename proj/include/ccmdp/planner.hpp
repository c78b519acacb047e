#pragma once

// Backward-induction planning: exact value iteration on finite models,
// optimistic planning over finite model classes (stage-factored or full
// enumeration), and optimistic planning for regulator dynamics on a uniform
// state grid with exploration bonuses.
//
// Convention: costs are MINIMIZED; greedy argmins break ties toward the
// lowest action index; V_{H+1} = 0.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ccmdp/embedding.hpp"
#include "ccmdp/knr.hpp"
#include "ccmdp/lowrank.hpp"

namespace ccmdp {

// Per-stage cost tables c_h(s,a) = theta_h . psi_h(s,a); entry index s*A + a.
std::vector<Vec> make_cost_tables(const TabularFeatureMap& features, const Vec& theta, int S,
                                  int A, int H);

struct ValueIterationResult {
  Mat V;               // (H+1) x S, last row zero
  std::vector<Vec> Q;  // H tables of length S*A
  StagePolicy greedy;
  double V1 = 0.0;     // V_1(initial state)
};

ValueIterationResult value_iteration(const FiniteModel& model, const std::vector<Vec>& cost);

// V of a fixed (possibly stochastic) policy under the model; (H+1) x S.
Mat policy_evaluation(const FiniteModel& model, const std::vector<Vec>& cost,
                      const StagePolicy& policy);

// Exact plan under a single known model: value iteration plus the exact
// embedding of the greedy policy. V1 equals theta . psi by construction.
struct PlanResult {
  StagePolicy policy;
  double V1 = 0.0;
  Vec psi;             // planned embedding (under the chosen model)
  int model_id = 0;    // enumeration combo index; -1 for a stage-mixed model
  bool coarse_grid_warning = false;
};

PlanResult plan_known_model(const FiniteModel& model, const TabularFeatureMap& features,
                            const Vec& theta);

// Optimistic plan over a finite class restricted to per-stage member index
// sets: jointly minimizes over policy and member choice.
//
//  - Factored mode (default) takes the member minimum inside each Bellman
//    backup; the chosen stage tensor may then vary with (s, a), which is
//    never above any single member selection (optimism holds a fortiori).
//  - Enumeration mode scans all per-stage member combinations (transition
//    stages only); throws NumericalError once the combination count exceeds
//    `budget` (default 1e4). Ties resolve to the lexicographically first
//    combination.
enum class LowRankPlanMode { kFactored, kEnumeration };

PlanResult optimistic_plan_lowrank(const ModelClass& models,
                                   const std::vector<std::vector<int>>& members,
                                   const TabularFeatureMap& features, const Vec& theta,
                                   LowRankPlanMode mode = LowRankPlanMode::kFactored,
                                   long long budget = 10000);

// ---------------------------------------------------------------------------
// Regulator planning on a state grid
// ---------------------------------------------------------------------------

// Uniform rectangular grid over <= 3 state dimensions.
struct StateGrid {
  Vec lo;                         // per-dim lower node
  Vec hi;                         // per-dim upper node
  std::vector<int> nodes_per_dim; // >= 1 each

  int dims() const { return static_cast<int>(nodes_per_dim.size()); }
  int total_nodes() const;
  Vec node(int index) const;      // flattened, first dim fastest
  int nearest(const Vec& x) const;
  void validate() const;          // throws ConfigError (dims > 3, bad bounds)

  // Symmetric grid covering extent sigma_pad * sigma * sqrt(H) around 0.
  static StateGrid centered(int dims, double extent, int nodes_per_axis);
};

// Snap regulator dynamics onto the grid: next-state Gaussian mass is assigned
// to each node's cell (per-axis midpoint boundaries, outer cells unbounded),
// so rows are exactly stochastic. Reports the largest Gaussian mass falling
// outside the grid extent; callers flag > 1e-3 as a discretization warning.
struct DiscretizedKnr {
  FiniteModel model;           // homogeneous: one shared stage tensor
  double max_mass_outside = 0.0;
};
DiscretizedKnr discretize_knr(const KnrModel& dynamics, const StateGrid& grid);

// Optimistic plan for an estimated regulator: plans on the grid against cost
// c_h(node, a) = theta_h . psi_h(node, a) minus the exploration bonus
// exploration_bonus(est, phi(node, a), per_step_bound[h]). The returned
// embedding is a Monte-Carlo estimate under the *estimated* dynamics with the
// greedy grid policy (nearest-node lookup), using mc_n rollouts keyed by
// mc_seed.
struct KnrPlanInputs {
  const KnrEstimate* estimate = nullptr;
  const KnrModel* dynamics = nullptr;   // estimated dynamics (W = estimate->What)
  const KnrObjectiveFeatures* features = nullptr;
  const StateGrid* grid = nullptr;
  Vec theta;
  std::vector<double> per_step_bound;   // size H
  int mc_n = 2000;
  std::uint64_t mc_seed = 0;
};

struct KnrPlanResult {
  KnrPolicy policy;
  StagePolicy grid_policy;  // greedy actions on grid nodes
  double V1 = 0.0;
  Vec psi;
  bool coarse_grid_warning = false;
};

KnrPlanResult optimistic_plan_knr(const KnrPlanInputs& in);

// Exact two-sided evaluation of the value-difference identity
//   V_1^{pi,P1}(s1) - V_1^{pi,P2}(s1)
//     = E_{pi,P2} [ sum_h (P1_h - P2_h) V_{h+1}^{pi,P1} (s_h, a_h) ].
// Returns (lhs, rhs), both computed by exact DP.
std::pair<double, double> value_difference_check(const FiniteModel& m1, const FiniteModel& m2,
                                                 const std::vector<Vec>& cost,
                                                 const StagePolicy& policy);

}  // namespace ccmdp
