#include "ccmdp/fenchel.hpp"

#include <cmath>

#include "ccmdp/errors.hpp"

namespace ccmdp {

ConvexOracle make_linear_oracle(const Vec& c) {
  ConvexOracle o;
  const Vec cc = c;
  o.value = [cc](const Vec& x) { return cc.dot(x); };
  o.conjugate = [](const Vec&) { return 0.0; };  // finite only at c; callers respect the domain
  o.conjugate_subgrad = [cc](const Vec&) { return Vec(Vec::Zero(cc.size())); };
  o.subgrad = [cc](const Vec&) { return cc; };
  o.fenchel_maximizer = [cc](const Vec&) { return cc; };
  o.lipschitz = cc.norm();
  o.domain.singleton = true;
  o.domain.point = cc;
  o.domain.radius = 0.0;
  o.shape = OracleShape::kLinear;
  o.shape_vec = cc;
  return o;
}

ConvexOracle make_distance_to_point_oracle(const Vec& point) {
  ConvexOracle o;
  const Vec p = point;
  o.value = [p](const Vec& x) { return (x - p).norm(); };
  o.conjugate = [p](const Vec& a) { return a.dot(p); };
  o.conjugate_subgrad = [p](const Vec&) { return p; };
  o.subgrad = [p](const Vec& x) {
    const Vec r = x - p;
    const double n = r.norm();
    return n > 0.0 ? Vec(r / n) : Vec(Vec::Zero(p.size()));
  };
  o.fenchel_maximizer = [p](const Vec& x) {
    const Vec r = x - p;
    const double n = r.norm();
    return n > 0.0 ? Vec(r / n) : Vec(Vec::Zero(p.size()));
  };
  o.lipschitz = 1.0;
  o.domain.singleton = false;
  o.domain.radius = 1.0;
  o.nonnegative = true;
  o.shape = OracleShape::kDistPoint;
  o.shape_vec = p;
  return o;
}

ConvexOracle make_distance_to_ball_oracle(const Vec& center, double radius) {
  if (radius < 0.0) throw ConfigError("make_distance_to_ball_oracle: radius must be >= 0");
  ConvexOracle o;
  const Vec c = center;
  const double r = radius;
  o.value = [c, r](const Vec& x) { return std::max((x - c).norm() - r, 0.0); };
  o.conjugate = [c, r](const Vec& a) { return a.dot(c) + r * a.norm(); };
  o.conjugate_subgrad = [c, r](const Vec& a) {
    const double n = a.norm();
    return n > 0.0 ? Vec(c + (r / n) * a) : c;
  };
  o.subgrad = [c, r](const Vec& x) {
    const Vec d = x - c;
    const double n = d.norm();
    return n > r && n > 0.0 ? Vec(d / n) : Vec(Vec::Zero(c.size()));
  };
  o.fenchel_maximizer = [c, r](const Vec& x) {
    const Vec d = x - c;
    const double n = d.norm();
    return n > r && n > 0.0 ? Vec(d / n) : Vec(Vec::Zero(c.size()));
  };
  o.lipschitz = 1.0;
  o.domain.singleton = false;
  o.domain.radius = 1.0;
  o.nonnegative = true;
  o.shape = OracleShape::kDistBall;
  o.shape_vec = c;
  o.shape_radius = r;
  return o;
}

namespace {

void check_perspective_domain(const PerspectiveTerm& term, const Vec& beta, double gamma) {
  if (gamma < 0.0) throw ConfigError("perspective: gamma must be >= 0");
  if (term.g.domain.singleton) {
    // Scaled singleton domain: beta must lie on the ray gamma * c.
    if ((beta - gamma * term.g.domain.point).norm() > 1e-9)
      throw ConfigError("perspective: beta off the singleton ray gamma*c");
  } else if (beta.norm() > gamma * term.g.lipschitz + 1e-9) {
    throw ConfigError("perspective: ||beta|| exceeds gamma * L_g");
  }
}

}  // namespace

double perspective_value(const PerspectiveTerm& term, const Vec& beta, double gamma) {
  check_perspective_domain(term, beta, gamma);
  if (gamma == 0.0 && beta.norm() == 0.0) return 0.0;
  const double gp = std::max(gamma, term.eps_gamma);
  return gp * term.g.conjugate(beta / gp);
}

std::pair<Vec, double> perspective_subgrads(const PerspectiveTerm& term, const Vec& beta,
                                            double gamma) {
  check_perspective_domain(term, beta, gamma);
  const double gp = std::max(gamma, term.eps_gamma);
  const Vec u = beta / gp;
  const Vec db = term.g.conjugate_subgrad(u);
  const double dg = term.g.conjugate(u) - u.dot(db);
  return {db, dg};
}

}  // namespace ccmdp
