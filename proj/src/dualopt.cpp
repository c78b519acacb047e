#include "ccmdp/dualopt.hpp"

#include <cmath>
#include <sstream>

#include "ccmdp/errors.hpp"

namespace ccmdp {

Vec project_ball(const Vec& v, double radius) {
  if (radius < 0.0) throw ConfigError("project_ball: radius must be >= 0");
  const double n = v.norm();
  return n <= radius ? v : Vec((radius / n) * v);
}

namespace {

// Exact projection onto the cone { (x, t) : ||x|| <= s * t }, s > 0.
void project_soc(Vec& x, double& t, double s) {
  const double n = x.norm();
  if (n <= s * t) return;                    // already inside
  if (s * n + t <= 0.0) {                    // apex region
    x.setZero();
    t = 0.0;
    return;
  }
  const double tt = (s * n + t) / (s * s + 1.0);
  x *= (s * tt) / n;
  t = tt;
}

}  // namespace

ConeSlabResult project_cone_slab(const Vec& beta, double gamma, double Gamma, double L_g) {
  if (!(Gamma > 0.0)) throw ConfigError("project_cone_slab: Gamma must be > 0");
  if (!(L_g > 0.0)) throw ConfigError("project_cone_slab: L_g must be > 0");

  // Dykstra with two sets: K1 = second-order cone, K2 = gamma slab.
  Vec x = beta;
  double t = gamma;
  Vec p = Vec::Zero(beta.size());  // correction for K1
  double pt = 0.0;
  Vec q = Vec::Zero(beta.size());  // correction for K2
  double qt = 0.0;

  for (int sweep = 1; sweep <= 1000; ++sweep) {
    const Vec x_prev = x;
    const double t_prev = t;

    Vec y = x + p;
    double yt = t + pt;
    Vec y0 = y;
    double yt0 = yt;
    project_soc(y, yt, L_g);
    p = y0 - y;
    pt = yt0 - yt;

    Vec z = y + q;
    double zt = yt + qt;
    const Vec z0 = z;
    const double zt0 = zt;
    zt = std::min(std::max(zt, 0.0), Gamma);  // slab clamps gamma only
    q = z0 - z;
    qt = zt0 - zt;

    x = z;
    t = zt;

    const double moved = std::sqrt((x - x_prev).squaredNorm() + (t - t_prev) * (t - t_prev));
    const bool feasible = x.norm() <= L_g * t + 1e-12 && t >= -1e-15 && t <= Gamma + 1e-12;
    if (moved <= 1e-10 && feasible) {
      // Snap the last epsilons so invariants hold exactly.
      t = std::min(std::max(t, 0.0), Gamma);
      if (x.norm() > L_g * t && x.norm() > 0.0) x *= (L_g * t) / x.norm();
      return {x, t, sweep};
    }
  }
  std::ostringstream msg;
  msg << "project_cone_slab: no convergence after 1000 sweeps (input ||beta||=" << beta.norm()
      << ", gamma=" << gamma << ", Gamma=" << Gamma << ", L_g=" << L_g << ")";
  throw NumericalError(msg.str());
}

DualState initial_dual_state(const SaddleProblem& problem, int dim) {
  DualState s;
  s.alpha = problem.f.domain.singleton ? problem.f.domain.point : Vec(Vec::Zero(dim));
  s.beta = Vec::Zero(dim);
  s.gamma = problem.g.has_value() ? problem.Gamma / 2.0 : 0.0;
  if (problem.g && problem.g->domain.singleton) s.beta = s.gamma * problem.g->domain.point;
  s.theta = s.alpha + s.beta;
  return s;
}

DualState dual_step(const SaddleProblem& problem, const DualState& state, const Vec& psi,
                    double eta) {
  if (psi.size() != state.alpha.size()) throw ConfigError("dual_step: embedding dimension mismatch");
  if (!(eta > 0.0)) throw ConfigError("dual_step: step size must be > 0");
  DualState next = state;

  // Objective side: ascend alpha.
  if (!problem.f.domain.singleton) {
    const Vec grad = psi - problem.f.conjugate_subgrad(state.alpha);
    next.alpha = project_ball(state.alpha + eta * grad, problem.f.lipschitz);
  }

  // Constraint side: ascend (beta, gamma), then project onto the cone-slab.
  if (problem.g.has_value()) {
    const ConvexOracle& g = *problem.g;
    if (g.domain.singleton) {
      // Dual domain degenerates to the ray beta = gamma * c_g.
      const Vec& cg = g.domain.point;
      const double slope = cg.dot(psi) - g.conjugate(cg);
      next.gamma = std::min(std::max(state.gamma + eta * slope, 0.0), problem.Gamma);
      next.beta = next.gamma * cg;
    } else {
      PerspectiveTerm term{g, 1e-8};
      const auto [db, dg] = perspective_subgrads(term, state.beta, state.gamma);
      const Vec beta_hat = state.beta + eta * (psi - db);
      const double gamma_hat = state.gamma - eta * dg;
      const ConeSlabResult proj = project_cone_slab(beta_hat, gamma_hat, problem.Gamma, g.lipschitz);
      next.beta = proj.beta;
      next.gamma = proj.gamma;
    }
  }

  next.theta = next.alpha + next.beta;
  return next;
}

double StepSchedule::eta(int t) const {
  if (t < 1) throw ConfigError("StepSchedule: t must be >= 1");
  if (!(Gamma > 0.0) || H < 1) throw ConfigError("StepSchedule: need Gamma > 0 and H >= 1");
  const double denom = anytime ? std::sqrt(static_cast<double>(t)) : std::sqrt(static_cast<double>(T));
  return 2.0 * Gamma / (H * denom);
}

std::vector<Vec> online_projected_subgradient(
    const OnlineAscentSpec& spec, int dim,
    const std::function<Vec(int t, const Vec& x)>& grad) {
  if (spec.T < 1) throw ConfigError("online_projected_subgradient: T must be >= 1");
  if (!(spec.R > 0.0) || !(spec.G > 0.0))
    throw ConfigError("online_projected_subgradient: R and G must be positive");
  Vec x = spec.x1.size() == dim ? spec.x1 : Vec(Vec::Zero(dim));
  x = project_ball(x, spec.R);
  std::vector<Vec> iterates;
  iterates.reserve(spec.T);
  for (int t = 1; t <= spec.T; ++t) {
    iterates.push_back(x);
    const double eta =
        spec.R / (spec.G * std::sqrt(static_cast<double>(spec.anytime ? t : spec.T)));
    x = project_ball(x + eta * grad(t, x), spec.R);
  }
  return iterates;
}

}  // namespace ccmdp
