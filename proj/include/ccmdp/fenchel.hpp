#pragma once

// Convex objective/constraint oracles and the perspective of a conjugate.
//
// Each oracle is an immutable bundle for one convex, L-Lipschitz function f:
// the value f(x), the conjugate f*(alpha), a conjugate subgradient (a primal
// point attaining the conjugate supremum), a subgradient of f itself, and a
// description of the effective dual domain. For L-Lipschitz f the conjugate
// is finite exactly on a subset of the radius-L ball; linear f degenerates to
// the singleton {c}.
//
// The constraint enters the saddle objective through the perspective
//   (beta, gamma) |-> gamma * g*(beta / gamma),
// which is jointly convex on { ||beta|| <= gamma * L, gamma >= 0 } and is
// evaluated here with the clamp gamma' = max(gamma, eps_gamma) so the apex is
// well defined.

#include <Eigen/Dense>
#include <functional>
#include <utility>

namespace ccmdp {

using Vec = Eigen::VectorXd;

// Effective dual domain of a conjugate: a centered ball of radius L, or the
// singleton {point} for linear functions.
struct DualDomain {
  bool singleton = false;
  double radius = 1.0;  // meaningful when !singleton
  Vec point;            // meaningful when singleton
};

// Structural descriptor of an oracle. Exact solvers (the ground-truth
// comparator) use it to pick specialized algorithms; kGeneric falls back to
// subgradient methods, which certify far less tightly.
enum class OracleShape {
  kGeneric,    // structure unknown
  kLinear,     // f(x) = shape_vec . x
  kDistPoint,  // f(x) = ||x - shape_vec||
  kDistBall,   // f(x) = max(||x - shape_vec|| - shape_radius, 0)
};

struct ConvexOracle {
  std::function<double(const Vec&)> value;            // f(x)
  std::function<double(const Vec&)> conjugate;        // f*(alpha), alpha in the dual domain
  std::function<Vec(const Vec&)> conjugate_subgrad;   // element of the subdifferential of f*
  std::function<Vec(const Vec&)> subgrad;             // element of the subdifferential of f
  std::function<Vec(const Vec&)> fenchel_maximizer;   // argmax_{alpha in dom} alpha.x - f*(alpha)
  double lipschitz = 1.0;                             // L
  DualDomain domain;
  bool nonnegative = false;  // true when f >= 0 everywhere (distance kinds)
  OracleShape shape = OracleShape::kGeneric;
  Vec shape_vec;             // coefficient vector or anchor, per the shape
  double shape_radius = 0.0;

  // max_{alpha in dom} alpha.x - f*(alpha); equals value(x) by duality.
  double reconstruct(const Vec& x) const {
    const Vec a = fenchel_maximizer(x);
    return a.dot(x) - conjugate(a);
  }
};

// f(x) = c.x. Conjugate domain {c}, f*(c) = 0, conjugate subgradient fixed to
// the zero vector (every primal point attains the supremum), L = ||c||.
ConvexOracle make_linear_oracle(const Vec& c);

// f(x) = ||x - point||_2. f*(alpha) = alpha.point on ||alpha|| <= 1.
ConvexOracle make_distance_to_point_oracle(const Vec& point);

// f(x) = max(||x - center||_2 - radius, 0). Throws ConfigError if radius < 0.
// f*(alpha) = alpha.center + radius*||alpha|| on ||alpha|| <= 1.
ConvexOracle make_distance_to_ball_oracle(const Vec& center, double radius);

// Constraint-side perspective term.
struct PerspectiveTerm {
  ConvexOracle g;
  double eps_gamma = 1e-8;
};

// gamma' * g*(beta/gamma') with gamma' = max(gamma, eps); returns exactly 0
// when gamma = 0 and beta = 0. Requires gamma >= 0 and ||beta|| <= gamma *
// L_g + 1e-9 (throws ConfigError otherwise).
double perspective_value(const PerspectiveTerm& term, const Vec& beta, double gamma);

// Subgradient of the perspective at (beta, gamma):
//   d_beta  = dg*(beta/gamma'),
//   d_gamma = g*(beta/gamma') - (beta/gamma') . dg*(beta/gamma').
std::pair<Vec, double> perspective_subgrads(const PerspectiveTerm& term, const Vec& beta,
                                            double gamma);

}  // namespace ccmdp
