// Convex oracles, conjugates, and the perspective term.
//
// Oracle strategy: conjugates are validated against brute-force maximization
// of alpha.x - f(x) over random search clouds before any identity is relied
// on; inequalities (conjugate duality, subgradients, convexity) then run as
// bulk property tests.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ccmdp/errors.hpp"
#include "ccmdp/fenchel.hpp"
#include "ccmdp/rng.hpp"
#include "doctest.h"

using namespace ccmdp;

namespace {

Vec random_vec(CounterRng& rng, int d, double scale) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

// Direction uniform on the sphere, scaled by a uniform radius factor.
Vec random_in_ball(CounterRng& rng, int d, double radius) {
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.normal();
  const double n = v.norm();
  if (n == 0.0) return Vec::Zero(d);
  return (radius * rng.uniform01() / n) * v;
}

struct Named {
  const char* name;
  ConvexOracle oracle;
};

std::vector<Named> oracle_zoo(int d, CounterRng& rng) {
  std::vector<Named> zoo;
  zoo.push_back({"linear", make_linear_oracle(random_vec(rng, d, 1.5))});
  zoo.push_back({"dist_point", make_distance_to_point_oracle(random_vec(rng, d, 2.0))});
  zoo.push_back(
      {"dist_ball", make_distance_to_ball_oracle(random_vec(rng, d, 2.0), 0.75)});
  return zoo;
}

}  // namespace

TEST_CASE("conjugate values match brute force search over primal points") {
  // f*(a) = sup_x a.x - f(x). For 1-Lipschitz f and ||a|| <= 1 the sup is
  // attained at bounded x, so a dense random cloud plus the known maximizer
  // candidates brackets it from below; the closed forms must dominate every
  // sample and be attained somewhere.
  CounterRng rng(2024);
  const int d = 3;
  for (auto& [name, o] : oracle_zoo(d, rng)) {
    CAPTURE(name);
    for (int trial = 0; trial < 20; ++trial) {
      const Vec a = o.domain.singleton ? o.domain.point
                                       : random_in_ball(rng, d, o.domain.radius * 0.999);
      double brute = -1e300;
      for (int i = 0; i < 4000; ++i) {
        const Vec x = random_vec(rng, d, 6.0);
        brute = std::max(brute, a.dot(x) - o.value(x));
      }
      // Include the oracle's own attaining point in the search cloud.
      const Vec attain = o.conjugate_subgrad(a);
      brute = std::max(brute, a.dot(attain) - o.value(attain));
      const double closed = o.conjugate(a);
      CHECK(closed >= brute - 1e-9);          // never under the sup
      CHECK(closed <= brute + 1e-9);          // attained by the candidate point
    }
  }
}

TEST_CASE("young fenchel inequality holds for random primal dual pairs") {
  CounterRng rng(77);
  const int d = 4;
  for (auto& [name, o] : oracle_zoo(d, rng)) {
    CAPTURE(name);
    for (int i = 0; i < 3000; ++i) {
      const Vec x = random_vec(rng, d, 5.0);
      const Vec a = o.domain.singleton ? o.domain.point
                                       : random_in_ball(rng, d, o.domain.radius);
      CHECK(o.value(x) + o.conjugate(a) >= a.dot(x) - 1e-10);
    }
  }
}

TEST_CASE("fenchel maximizer reconstructs the primal value") {
  CounterRng rng(78);
  const int d = 4;
  for (auto& [name, o] : oracle_zoo(d, rng)) {
    CAPTURE(name);
    for (int i = 0; i < 2000; ++i) {
      const Vec x = random_vec(rng, d, 5.0);
      CHECK(o.reconstruct(x) == doctest::Approx(o.value(x)).epsilon(1e-9));
    }
  }
}

TEST_CASE("conjugate subgradient attains fenchel equality") {
  // x* in the subdifferential of f* at a iff f(x*) + f*(a) = a.x*.
  CounterRng rng(79);
  const int d = 3;
  for (auto& [name, o] : oracle_zoo(d, rng)) {
    CAPTURE(name);
    for (int i = 0; i < 500; ++i) {
      const Vec a = o.domain.singleton ? o.domain.point
                                       : random_in_ball(rng, d, o.domain.radius * 0.999);
      const Vec xs = o.conjugate_subgrad(a);
      CHECK(o.value(xs) + o.conjugate(a) == doctest::Approx(a.dot(xs)).epsilon(1e-9));
    }
  }
}

TEST_CASE("subgradient inequality holds for random pairs") {
  CounterRng rng(80);
  const int d = 4;
  for (auto& [name, o] : oracle_zoo(d, rng)) {
    CAPTURE(name);
    for (int i = 0; i < 3000; ++i) {
      const Vec x = random_vec(rng, d, 4.0);
      const Vec y = random_vec(rng, d, 4.0);
      const Vec g = o.subgrad(x);
      CHECK(o.value(y) >= o.value(x) + g.dot(y - x) - 1e-10);
      CHECK(g.norm() <= o.lipschitz + 1e-12);
    }
  }
}

TEST_CASE("distance oracles evaluate their closed forms") {
  Vec p(2);
  p << 1.0, 2.0;
  const ConvexOracle dp = make_distance_to_point_oracle(p);
  Vec x(2);
  x << 4.0, 6.0;
  CHECK(dp.value(x) == doctest::Approx(5.0));
  CHECK(dp.value(p) == 0.0);
  CHECK(dp.nonnegative);

  const ConvexOracle db = make_distance_to_ball_oracle(p, 2.0);
  CHECK(db.value(x) == doctest::Approx(3.0));   // 5 - 2
  CHECK(db.value(p) == 0.0);                    // center
  Vec inside(2);
  inside << 1.5, 2.5;                           // distance ~0.707 < 2
  CHECK(db.value(inside) == 0.0);
  CHECK(db.subgrad(inside).norm() == 0.0);      // flat region
  CHECK(db.nonnegative);

  Vec c(2);
  c << 3.0, -1.0;
  const ConvexOracle lin = make_linear_oracle(c);
  CHECK(lin.value(x) == doctest::Approx(3.0 * 4.0 - 6.0));
  CHECK(lin.domain.singleton);
  CHECK(lin.lipschitz == doctest::Approx(c.norm()));
  CHECK_THROWS_AS(make_distance_to_ball_oracle(p, -0.5), ConfigError);
}

TEST_CASE("oracles carry their structural descriptors") {
  Vec p(2);
  p << 0.5, -0.25;
  CHECK(make_linear_oracle(p).shape == OracleShape::kLinear);
  CHECK(make_distance_to_point_oracle(p).shape == OracleShape::kDistPoint);
  const ConvexOracle db = make_distance_to_ball_oracle(p, 1.25);
  CHECK(db.shape == OracleShape::kDistBall);
  CHECK(db.shape_radius == 1.25);
  CHECK((db.shape_vec - p).norm() == 0.0);
}

TEST_CASE("perspective value matches the scaled conjugate and is exact at the apex") {
  CounterRng rng(90);
  const int d = 3;
  const ConvexOracle g = make_distance_to_ball_oracle(random_vec(rng, d, 1.0), 0.5);
  PerspectiveTerm term{g, 1e-8};
  for (int i = 0; i < 500; ++i) {
    const double gamma = rng.uniform(1e-6, 3.0);
    const Vec beta = random_in_ball(rng, d, gamma * g.lipschitz);
    const double direct = gamma * g.conjugate(beta / gamma);
    CHECK(perspective_value(term, beta, gamma) ==
          doctest::Approx(direct).epsilon(1e-9));
  }
  CHECK(perspective_value(term, Vec::Zero(d), 0.0) == 0.0);
}

TEST_CASE("perspective is jointly convex along random segments") {
  CounterRng rng(91);
  const int d = 3;
  const ConvexOracle g = make_distance_to_ball_oracle(random_vec(rng, d, 1.0), 0.75);
  PerspectiveTerm term{g, 1e-8};
  for (int i = 0; i < 2000; ++i) {
    const double g1 = rng.uniform(0.0, 2.0), g2 = rng.uniform(0.0, 2.0);
    const Vec b1 = random_in_ball(rng, d, g1 * g.lipschitz);
    const Vec b2 = random_in_ball(rng, d, g2 * g.lipschitz);
    const double lam = rng.uniform01();
    const double mid = perspective_value(term, lam * b1 + (1.0 - lam) * b2,
                                         lam * g1 + (1.0 - lam) * g2);
    const double chord = lam * perspective_value(term, b1, g1) +
                         (1.0 - lam) * perspective_value(term, b2, g2);
    CHECK(mid <= chord + 1e-9);
  }
}

TEST_CASE("perspective subgradients satisfy the first order inequality") {
  CounterRng rng(92);
  const int d = 3;
  const ConvexOracle g = make_distance_to_point_oracle(random_vec(rng, d, 1.0));
  PerspectiveTerm term{g, 1e-8};
  for (int i = 0; i < 2000; ++i) {
    // Keep base points off the apex so the clamp does not bend the tangent.
    const double g1 = rng.uniform(1e-4, 2.0), g2 = rng.uniform(0.0, 2.0);
    const Vec b1 = random_in_ball(rng, d, g1 * g.lipschitz * 0.999);
    const Vec b2 = random_in_ball(rng, d, g2 * g.lipschitz);
    const auto [db, dg] = perspective_subgrads(term, b1, g1);
    const double v1 = perspective_value(term, b1, g1);
    const double v2 = perspective_value(term, b2, g2);
    CHECK(v2 >= v1 + db.dot(b2 - b1) + dg * (g2 - g1) - 1e-9);
  }
}

TEST_CASE("perspective rejects points outside its domain") {
  Vec c(2);
  c << 1.0, 0.0;
  PerspectiveTerm term{make_distance_to_point_oracle(c), 1e-8};
  Vec beta(2);
  beta << 2.0, 0.0;
  CHECK_THROWS_AS(perspective_value(term, beta, 1.0), ConfigError);   // ||b|| > g*L
  CHECK_THROWS_AS(perspective_value(term, beta, -0.5), ConfigError);  // negative gamma
}
