#pragma once

// Dual iterates, projections, and the per-episode dual ascent step.
//
// The saddle objective being ascended in the dual variables is
//
//   D(alpha, beta, gamma) = (alpha + beta) . Psi - f*(alpha) - gamma g*(beta/gamma)
//
// with alpha in the conjugate domain of f, gamma in [0, Gamma], and
// ||beta|| <= gamma * L_g. One dual step performs a projected supergradient
// ascent in alpha and in (beta, gamma) at the supplied step size, then
// recombines theta = alpha + beta, the cost direction handed to the planner.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ccmdp/fenchel.hpp"
#include "ccmdp/rng.hpp"

namespace ccmdp {

// ---------------------------------------------------------------------------
// Projections
// ---------------------------------------------------------------------------

// Euclidean projection onto the centered ball of the given radius.
Vec project_ball(const Vec& v, double radius);

// Euclidean projection onto
//   G = { (beta, gamma) : ||beta||_2 <= gamma * L_g, 0 <= gamma <= Gamma }
// by Dykstra's alternating projections between the second-order cone and the
// gamma slab. Converges to the exact projection onto the intersection;
// iteration stops when a full sweep moves the point by <= 1e-10, and a
// NumericalError with diagnostics is thrown after 1000 sweeps. Requires
// Gamma > 0 and L_g > 0 (ConfigError otherwise).
struct ConeSlabResult {
  Vec beta;
  double gamma = 0.0;
  int sweeps = 0;
};
ConeSlabResult project_cone_slab(const Vec& beta, double gamma, double Gamma, double L_g);

// ---------------------------------------------------------------------------
// Dual state and step
// ---------------------------------------------------------------------------

struct DualState {
  Vec alpha;
  Vec beta;
  double gamma = 0.0;
  Vec theta;  // alpha + beta, refreshed by dual_step / init
};

// Problem description for the dual machinery. `g` empty means unconstrained
// (beta and gamma stay pinned at zero).
struct SaddleProblem {
  ConvexOracle f;
  std::optional<ConvexOracle> g;
  double Gamma = 1.0;  // dual cap; also the step-size scale in eta_t
};

// Initial duals: alpha = 0 (or the pinned point c for linear f), beta = 0,
// gamma = Gamma/2 when constrained, 0 otherwise.
DualState initial_dual_state(const SaddleProblem& problem, int dim);

// One projected ascent step at step size eta given the current planned
// embedding Psi. Linear f pins alpha at c; a linear constraint pins beta to
// the ray gamma * c_g and ascends gamma along it. Returns the new state with
// theta recomposed.
DualState dual_step(const SaddleProblem& problem, const DualState& state, const Vec& psi,
                    double eta);

// Step-size schedule eta_t = 2 Gamma / (H sqrt(t)) (anytime) or
// 2 Gamma / (H sqrt(T)) (fixed horizon, T pre-declared).
struct StepSchedule {
  double Gamma = 1.0;
  int H = 1;
  bool anytime = true;
  int T = 1;  // used when !anytime

  double eta(int t) const;  // t >= 1
};

// ---------------------------------------------------------------------------
// Online projected supergradient ascent (generic, used by the regret tests)
// ---------------------------------------------------------------------------

// Maximizes a stream of concave reward functions over a centered ball of
// radius R: x_{t+1} = proj( x_t + eta_t * grad f_t(x_t) ), eta_t = R/(G
// sqrt(t)) (anytime) or R/(G sqrt(T)). Returns the visited iterates
// x_1..x_T. `grad` must return a supergradient of f_t at x_t.
struct OnlineAscentSpec {
  double R = 1.0;       // ball radius
  double G = 1.0;       // gradient bound
  bool anytime = true;
  int T = 1;
  Vec x1;               // start point (defaults to the origin when empty)
};

std::vector<Vec> online_projected_subgradient(
    const OnlineAscentSpec& spec, int dim,
    const std::function<Vec(int t, const Vec& x)>& grad);

}  // namespace ccmdp
