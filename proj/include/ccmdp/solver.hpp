#pragma once

// The optimistic primal-dual episode loop, ground-truth comparators, and
// regret/violation accounting.
//
// Each episode t: (1) the dual variables take one projected ascent step fed
// by the previously planned embedding Psi^t, (2) the recombined cost
// direction theta^{t+1} is handed to the optimistic planner over the current
// confidence set, (3) the environment is rolled once under the episode policy
// and the confidence set is refreshed. Episode records carry both the
// learner-visible quantities and privileged true-environment embeddings used
// by the harness for regret accounting.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccmdp/dualopt.hpp"
#include "ccmdp/embedding.hpp"
#include "ccmdp/fenchel.hpp"
#include "ccmdp/knr.hpp"
#include "ccmdp/lowrank.hpp"
#include "ccmdp/planner.hpp"

namespace ccmdp {

enum class EnvKind { kKnown, kLowRank, kKnr };

struct ExperimentSpec {
  EnvKind kind = EnvKind::kKnown;

  // Finite environments (known model and low-rank classes).
  FiniteModel truth;
  TabularFeatureMap features;
  ModelClass model_class;  // low-rank only
  int truth_index = 0;     // index of the truth inside the class (low-rank)

  // Regulator environments.
  KnrModel knr_truth;
  KnrObjectiveFeatures knr_features;
  StateGrid grid;
  int knr_mc_n = 2000;         // rollouts for the planned embedding
  int knr_privileged_n = 1000; // rollouts per episode for the true embedding

  // Problem.
  ConvexOracle f;
  std::optional<ConvexOracle> g;
  double Gamma = 1.0;  // dual cap and step-size scale
  double B = 1.0;      // feature norm bound (enters the bonus cost bound)
  int T = 100;
  double delta = 0.1;
  bool anytime = true;
  double kappa = 1.0;
  double lambda = 1.0;       // ridge regularizer; <= 0 means max(sigma^2, 1)
  double lowrank_c = 2.0;
  long long plan_budget = 10000;
  LowRankPlanMode plan_mode = LowRankPlanMode::kFactored;
  std::uint64_t seed = 1;

  int horizon() const;
  int embed_dim() const;  // H * d
  void validate() const;  // throws ConfigError
};

struct EpisodeRecord {
  int t = 0;
  DualState dual;        // the iterate that produced this episode's plan
  double V1_plan = 0.0;
  int model_id = 0;
  bool coverage = true;  // truth inside the confidence set used for the plan
  bool warning = false;
  Vec psi_plan;          // Psi^t under the chosen optimistic model
  Vec psi_true;          // privileged embedding of pi_t under the truth
  Vec realized_psi;      // features along the single executed trajectory
  Vec psi_hat_avg;       // (1/t) sum_{i<=t} psi_plan
  Vec psi_mixed_avg;     // (1/t) sum_{i<=t} psi_true
  double f_hat = 0.0, g_hat = 0.0;      // at psi_hat_avg (g only if constrained)
  double f_mixed = 0.0, g_mixed = 0.0;  // at psi_mixed_avg
};

struct RunResult {
  std::vector<EpisodeRecord> records;
  // Upper bound on the Monte-Carlo standard error of the final mixed
  // embedding (0 for environments with exact privileged embeddings).
  double mixed_embedding_se = 0.0;
};

RunResult run(const ExperimentSpec& spec);

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

// Dual cap from a strictly feasible comparison policy:
//   Gamma = -(f_at_slater - f_at_opt) / g_at_slater,  g_at_slater < 0.
double bound_gamma(double f_at_slater, double f_at_opt, double g_at_slater);

struct GroundTruth {
  Vec psi_star;
  double f_star = 0.0;
  double g_star = 0.0;  // 0 when unconstrained
  std::vector<double> weights;                    // mixture over support vertices
  std::vector<Vec> support_embeddings;
  std::vector<std::vector<std::vector<int>>> support_policies;  // action tables
  double certified_gap = 0.0;   // proven optimality gap of f_star
  double kkt_residual = 0.0;    // projected-subgradient fixed-point diagnostic
  double rho_used = 0.0;        // accepted penalty parameter (0 if unconstrained)
};

enum class TruthMode { kEnumeration, kFrankWolfe };

// Solves min f(Psi) s.t. g(Psi) <= 0 over the reachable embedding polytope.
//
//  - Enumeration mode materializes every deterministic-policy embedding
//    (throws NumericalError if A^(S*H) exceeds `budget`), then solves over
//    simplex mixture weights by projected subgradient descent with Polyak
//    steps driven by a vertex-gap lower bound, sweeping the penalty parameter
//    over {1e0..1e4} with the feasibility certificate ||[g]_+|| <= 2*gap/rho.
//  - Frank-Wolfe mode grows an active vertex set with value iteration as the
//    linear minimization oracle and reuses the same master solver; the global
//    duality gap from the oracle certifies optimality within tol.
GroundTruth ground_truth_solve(const FiniteModel& model, const TabularFeatureMap& features,
                               const ConvexOracle& f, const std::optional<ConvexOracle>& g,
                               TruthMode mode, double tol = 1e-7, long long budget = 100000);

// ---------------------------------------------------------------------------
// Performance accounting
// ---------------------------------------------------------------------------

struct RegretCurves {
  std::vector<double> regret;     // Regret(t) = t * (f(mixed_t) - f_star)
  std::vector<double> violation;  // Violation(t) = t * g(mixed_t), unclipped
  double final_regret = 0.0;
  double final_violation = 0.0;
};

RegretCurves regret_violation(const RunResult& result, const GroundTruth& truth,
                              const ConvexOracle& f, const std::optional<ConvexOracle>& g);

}  // namespace ccmdp
