#pragma once

// Kernelized nonlinear regulator dynamics and their confidence sets.
//
// Dynamics: s_{h+1} = W* phi(s_h, a_h) + eps, eps ~ N(0, sigma^2 I), with
// ||W*||_2 <= 1 and ||phi|| <= 1. The estimator is ridge regression
//   W_hat = (sum s' phi^T) Lambda^{-1},  Lambda = lambda I + sum phi phi^T,
// and the confidence set is the spectral ellipsoid
//   { W : ||(W - W_hat) Lambda^{1/2}||_2^2 <= R^t }.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ccmdp/rng.hpp"

namespace ccmdp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Dynamics feature map phi(s, a) with ||phi|| <= 1 (enforced by construction
// in the builders below).
struct KnrFeatures {
  int d_phi = 0;
  std::function<Vec(const Vec& s, int a)> eval;

  // [s ; onehot(a) ; 1] rescaled onto the unit ball.
  static KnrFeatures identity(int state_dim, int num_actions);
  // Seeded random linear map of the identity features, rescaled per-vector
  // onto the unit ball.
  static KnrFeatures random_projection(int state_dim, int num_actions, int d_phi,
                                       std::uint64_t seed);
};

// A (true or estimated) regulator: state dim d_s, finite action set, horizon.
struct KnrModel {
  Mat W;          // d_s x d_phi
  double sigma = 0.0;
  int H = 1;
  int num_actions = 1;
  Vec initial_state;
  KnrFeatures phi;
};

// One transition sample s' = W phi(s,a) + sigma * N(0, I).
Vec knr_sample_step(const KnrModel& model, const Vec& s, int a, CounterRng& rng);

// Policies over continuous states.
using KnrPolicy = std::function<int(int h, const Vec& s)>;

// Roll one trajectory; returns the visited states s_1..s_{H+1} and actions.
struct KnrTrajectory {
  std::vector<Vec> states;  // size H+1
  std::vector<int> actions; // size H
};
KnrTrajectory knr_rollout(const KnrModel& model, const KnrPolicy& policy, CounterRng rng);

// Regression data: (phi(s_h, a_h), s_{h+1}) pairs.
using KnrDataset = std::vector<std::pair<Vec, Vec>>;
void append_transitions(const KnrModel& model, const KnrTrajectory& traj, KnrDataset* data);

// Ridge estimate plus everything the planner needs to score uncertainty.
struct KnrEstimate {
  Mat What;    // d_s x d_phi
  Mat Lambda;  // d_phi x d_phi
  double lambda = 1.0;
  int n = 0;        // number of transition pairs
  double R = 0.0;   // confidence radius (set via knr_radius)
  double sigma = 0.0;
  double kappa = 1.0;  // bonus scale knob
};

// Least squares with ridge lambda. Empty data yields What = 0, Lambda =
// lambda I. Throws ConfigError on lambda <= 0 or inconsistent dimensions.
KnrEstimate ridge_fit(const KnrDataset& data, int d_state, int d_phi, double lambda);

// Confidence radius
//   R^t = 2 lambda + 8 sigma^2 ( d log 5 + 2 log t + log 4
//                                + log(det_ratio * pi^2 t^2 / (3 delta)) )
// where d is the state dimension and det_ratio = det(Lambda^t)/det(Lambda^0).
// Requires t >= 1, delta in (0,1), det_ratio >= 1, lambda > 0.
double knr_radius(int t, int d_state, double lambda, double sigma, double delta,
                  double det_ratio);

// ||(W - What) Lambda^{1/2}||_2^2, the ellipsoid test statistic.
double spectral_ellipsoid_stat(const KnrEstimate& est, const Mat& W);

// Exploration bonus min(kappa * 2 sqrt(R) ||phi||_{Lambda^-1} / sigma, 2) *
// per_step_cost_bound; returns 0 when R = 0 or phi = 0, and clips at the
// total-variation ceiling 2 when sigma = 0.
double exploration_bonus(const KnrEstimate& est, const Vec& phi_sa, double per_step_cost_bound);

// chi-square divergence between N(mu1, sigma^2 I) and N(mu2, sigma^2 I):
//   exp(||mu1 - mu2||^2 / sigma^2) - 1.
// Throws ConfigError when sigma <= 0.
double gaussian_chi_square(const Vec& mu1, const Vec& mu2, double sigma);

// Objective features psi_h(s, a) for regulator environments.
struct KnrObjectiveFeatures {
  int d = 0;
  double B = 1.0;
  std::function<Vec(int h, const Vec& s, int a)> eval;
};

// Monte-Carlo embedding of a policy under the model dynamics; counter-based
// streams keyed (seed, episode, stage).
Vec knr_monte_carlo_embedding(const KnrModel& model, const KnrObjectiveFeatures& features,
                              const KnrPolicy& policy, int n, std::uint64_t seed);

}  // namespace ccmdp
