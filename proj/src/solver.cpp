#include "ccmdp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <sstream>

#include "ccmdp/errors.hpp"

namespace ccmdp {

namespace {

constexpr std::uint64_t kTrajStream = 1;
constexpr std::uint64_t kCollectStream = 2;
constexpr std::uint64_t kPlanStream = 3;
constexpr std::uint64_t kPrivilegedStream = 4;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  CounterRng r = CounterRng(seed).fork(a).fork(b);
  return r.next_u64();
}

}  // namespace

int ExperimentSpec::horizon() const {
  return kind == EnvKind::kKnr ? knr_truth.H : truth.H;
}

int ExperimentSpec::embed_dim() const {
  return horizon() * (kind == EnvKind::kKnr ? knr_features.d : features.d);
}

void ExperimentSpec::validate() const {
  if (T < 1) throw ConfigError("ExperimentSpec: T must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("ExperimentSpec: delta must be in (0,1)");
  if (!(Gamma > 0.0)) throw ConfigError("ExperimentSpec: Gamma (dual cap / step scale) must be > 0");
  if (!(B > 0.0)) throw ConfigError("ExperimentSpec: feature bound B must be > 0");
  switch (kind) {
    case EnvKind::kKnown:
      truth.validate();
      features.validate();
      break;
    case EnvKind::kLowRank: {
      truth.validate();
      features.validate();
      model_class.validate();
      if (truth_index < 0 || truth_index >= model_class.size())
        throw ConfigError("ExperimentSpec: truth_index outside the model class");
      const FiniteModel& member = model_class.candidates[truth_index];
      if (member.S != truth.S || member.A != truth.A || member.H != truth.H)
        throw ConfigError("ExperimentSpec: class shape does not match the truth");
      break;
    }
    case EnvKind::kKnr: {
      grid.validate();
      if (knr_truth.num_actions < 1) throw ConfigError("ExperimentSpec: regulator needs actions");
      if (knr_truth.sigma < 0.0) throw ConfigError("ExperimentSpec: sigma must be >= 0");
      if (knr_truth.initial_state.size() != grid.dims())
        throw ConfigError("ExperimentSpec: initial state dimension mismatch");
      Eigen::JacobiSVD<Mat> svd(knr_truth.W);
      if (svd.singularValues().size() && svd.singularValues()(0) > 1.0 + 1e-9)
        throw ConfigError("ExperimentSpec: ||W*||_2 must be <= 1");
      if (knr_mc_n < 1 || knr_privileged_n < 1)
        throw ConfigError("ExperimentSpec: Monte-Carlo rollout counts must be >= 1");
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Episode loop
// ---------------------------------------------------------------------------

namespace {

void finish_record(const ExperimentSpec& spec, EpisodeRecord* rec, Vec* hat_sum, Vec* mixed_sum) {
  *hat_sum += rec->psi_plan;
  *mixed_sum += rec->psi_true;
  rec->psi_hat_avg = *hat_sum / rec->t;
  rec->psi_mixed_avg = *mixed_sum / rec->t;
  rec->f_hat = spec.f.value(rec->psi_hat_avg);
  rec->f_mixed = spec.f.value(rec->psi_mixed_avg);
  rec->g_hat = spec.g ? spec.g->value(rec->psi_hat_avg) : 0.0;
  rec->g_mixed = spec.g ? spec.g->value(rec->psi_mixed_avg) : 0.0;
}

RunResult run_finite(const ExperimentSpec& spec) {
  const FiniteModel& truth = spec.truth;
  const int H = truth.H;
  const int d = spec.features.d;
  const int dim = H * d;
  const bool lowrank = spec.kind == EnvKind::kLowRank;

  SaddleProblem prob{spec.f, spec.g, spec.Gamma};
  DualState dual = initial_dual_state(prob, dim);
  StepSchedule sched{spec.Gamma, H, spec.anytime, spec.T};
  CounterRng root(spec.seed);

  StageDataset data(H);
  std::vector<std::vector<int>> members(H);
  if (lowrank) {
    for (int h = 0; h < H; ++h)
      for (int i = 0; i < spec.model_class.size(); ++i) members[h].push_back(i);
  }

  const auto make_plan = [&](const Vec& theta) {
    if (!lowrank) return plan_known_model(truth, spec.features, theta);
    return optimistic_plan_lowrank(spec.model_class, members, spec.features, theta,
                                   spec.plan_mode, spec.plan_budget);
  };

  bool coverage = true;  // the initial confidence set is the whole class
  PlanResult plan = make_plan(dual.theta);

  RunResult out;
  out.records.reserve(spec.T);
  Vec hat_sum = Vec::Zero(dim);
  Vec mixed_sum = Vec::Zero(dim);

  for (int t = 1; t <= spec.T; ++t) {
    EpisodeRecord rec;
    rec.t = t;
    rec.dual = dual;
    rec.V1_plan = plan.V1;
    rec.model_id = plan.model_id;
    rec.coverage = coverage;
    rec.psi_plan = plan.psi;

    dual = dual_step(prob, dual, plan.psi, sched.eta(t));

    const Trajectory traj =
        sample_trajectory(truth, plan.policy, root.fork(kTrajStream).fork(t));
    rec.realized_psi = Vec::Zero(dim);
    for (int h = 0; h < H; ++h)
      rec.realized_psi.segment(static_cast<Eigen::Index>(h) * d, d) =
          spec.features.psi(h, traj.states[h], traj.actions[h], truth.A);
    rec.psi_true = exact_embedding(truth, spec.features, plan.policy);
    finish_record(spec, &rec, &hat_sum, &mixed_sum);

    if (lowrank) {
      collect_augmented_tuples(truth, plan.policy, root.fork(kCollectStream).fork(t), &data);
      const std::vector<int> mle = mle_fit(data, spec.model_class);
      const double R =
          lowrank_radius(t, spec.T, H, spec.model_class.theta_count,
                         spec.model_class.upsilon_count, spec.delta, spec.lowrank_c);
      members = confidence_members(spec.model_class, data, mle, R);
      coverage = true;
      for (int h = 0; h < H; ++h)
        if (std::find(members[h].begin(), members[h].end(), spec.truth_index) ==
            members[h].end())
          coverage = false;
    }

    plan = make_plan(dual.theta);
    out.records.push_back(std::move(rec));
  }
  return out;
}

RunResult run_knr(const ExperimentSpec& spec) {
  const KnrModel& truth = spec.knr_truth;
  const int H = truth.H;
  const int d = spec.knr_features.d;
  const int dim = H * d;
  const int d_state = static_cast<int>(truth.initial_state.size());
  const int d_phi = truth.phi.d_phi;
  const double sigma = truth.sigma;
  const double lambda = spec.lambda > 0.0 ? spec.lambda : std::max(sigma * sigma, 1.0);

  SaddleProblem prob{spec.f, spec.g, spec.Gamma};
  DualState dual = initial_dual_state(prob, dim);
  StepSchedule sched{spec.Gamma, H, spec.anytime, spec.T};
  CounterRng root(spec.seed);

  const double cost_scale =
      spec.B * (spec.f.lipschitz + (spec.g ? spec.Gamma * spec.g->lipschitz : 0.0));
  std::vector<double> bounds(H);
  for (int h = 0; h < H; ++h) bounds[h] = cost_scale * (H - h);

  KnrDataset data;
  KnrEstimate est = ridge_fit(data, d_state, d_phi, lambda);
  est.sigma = sigma;
  est.kappa = spec.kappa;
  est.R = knr_radius(1, d_state, lambda, sigma, spec.delta, 1.0);
  KnrModel est_dyn = truth;
  est_dyn.W = est.What;

  const auto make_plan = [&](const Vec& theta, std::uint64_t t) {
    KnrPlanInputs in;
    in.estimate = &est;
    in.dynamics = &est_dyn;
    in.features = &spec.knr_features;
    in.grid = &spec.grid;
    in.theta = theta;
    in.per_step_bound = bounds;
    in.mc_n = spec.knr_mc_n;
    in.mc_seed = derive_seed(spec.seed, kPlanStream, t);
    return optimistic_plan_knr(in);
  };

  bool coverage = spectral_ellipsoid_stat(est, truth.W) <= est.R;
  KnrPlanResult plan = make_plan(dual.theta, 0);

  RunResult out;
  out.records.reserve(spec.T);
  Vec hat_sum = Vec::Zero(dim);
  Vec mixed_sum = Vec::Zero(dim);

  for (int t = 1; t <= spec.T; ++t) {
    EpisodeRecord rec;
    rec.t = t;
    rec.dual = dual;
    rec.V1_plan = plan.V1;
    rec.model_id = -1;
    rec.coverage = coverage;
    rec.warning = plan.coarse_grid_warning;
    rec.psi_plan = plan.psi;

    dual = dual_step(prob, dual, plan.psi, sched.eta(t));

    const KnrTrajectory traj = knr_rollout(truth, plan.policy, root.fork(kTrajStream).fork(t));
    append_transitions(truth, traj, &data);
    rec.realized_psi = Vec::Zero(dim);
    for (int h = 0; h < H; ++h)
      rec.realized_psi.segment(static_cast<Eigen::Index>(h) * d, d) =
          spec.knr_features.eval(h, traj.states[h], traj.actions[h]);
    rec.psi_true =
        knr_monte_carlo_embedding(truth, spec.knr_features, plan.policy, spec.knr_privileged_n,
                                  derive_seed(spec.seed, kPrivilegedStream, t));
    finish_record(spec, &rec, &hat_sum, &mixed_sum);

    est = ridge_fit(data, d_state, d_phi, lambda);
    est.sigma = sigma;
    est.kappa = spec.kappa;
    const double det_ratio =
        std::max(est.Lambda.determinant() / std::pow(lambda, d_phi), 1.0);
    est.R = knr_radius(t, d_state, lambda, sigma, spec.delta, det_ratio);
    est_dyn.W = est.What;
    coverage = spectral_ellipsoid_stat(est, truth.W) <= est.R;

    plan = make_plan(dual.theta, t);
    out.records.push_back(std::move(rec));
  }
  const double n_eff = static_cast<double>(spec.knr_privileged_n) * spec.T;
  out.mixed_embedding_se = spec.knr_features.B * std::sqrt(static_cast<double>(H) / n_eff);
  return out;
}

}  // namespace

RunResult run(const ExperimentSpec& spec) {
  spec.validate();
  return spec.kind == EnvKind::kKnr ? run_knr(spec) : run_finite(spec);
}

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

double bound_gamma(double f_at_slater, double f_at_opt, double g_at_slater) {
  if (!(g_at_slater < 0.0))
    throw ConfigError("bound_gamma: the comparison policy must satisfy g < 0 strictly");
  return -(f_at_slater - f_at_opt) / g_at_slater;
}

namespace {

Vec proj_simplex(const Vec& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    cumsum += u[i];
    const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) tau = t;
  }
  Vec w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = std::max(v[i] - tau, 0.0);
  return w;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// F(x) = f(x) + rho * [g(x)]_+ over mixture weights on the simplex.
struct PenaltyObjective {
  const ConvexOracle* f = nullptr;
  const ConvexOracle* g = nullptr;  // null = unconstrained
  double rho = 0.0;

  bool constrained() const { return g != nullptr && rho > 0.0; }
  double value(const Vec& x) const {
    double v = f->value(x);
    if (constrained()) v += rho * std::max(g->value(x), 0.0);
    return v;
  }
  // One-sided penalty weight; with it f(x) + s*g(x) equals F(x) exactly.
  double onesided_s(const Vec& x) const {
    return constrained() && g->value(x) > 0.0 ? rho : 0.0;
  }
  double floor() const { return f->nonnegative ? 0.0 : -kInf; }
};

// Structured view of an oracle term. For the three concrete shapes the true
// value is u(x) (linear, distance-to-point) or [u(x)]_+ (distance-to-ball)
// with u the signed surrogate below; u is smooth away from the anchor and its
// gradient stays meaningful on both sides of the hinge, which the raw oracle
// subgradient (zero inside the ball) does not.
struct TermShape {
  OracleShape kind = OracleShape::kGeneric;
  Vec v;         // linear coefficients or anchor
  double r = 0.0;

  bool valid() const { return kind != OracleShape::kGeneric; }
  bool is_linear() const { return kind == OracleShape::kLinear; }
  bool hinged() const { return kind == OracleShape::kDistBall; }
  double signed_value(const Vec& x) const {
    return is_linear() ? v.dot(x) : (x - v).norm() - r;
  }
  Vec dir(const Vec& x) const {
    if (is_linear()) return v;
    const Vec d = x - v;
    const double n = d.norm();
    return n > 1e-30 ? Vec(d / n) : Vec(Vec::Zero(x.size()));
  }
};

TermShape shape_of(const ConvexOracle& o) {
  TermShape t;
  t.kind = o.shape;
  t.v = o.shape_vec;
  t.r = o.shape_radius;
  return t;
}

// min over the feasible embedding hull of gx . v; fills the minimizing vertex
// and its deterministic-policy id when requested.
using HullMin = std::function<double(const Vec& gx, Vec* vertex, long long* id)>;

// Lower bound on min_hull F via the valid linearization family
//   F(y) >= f(y) + s*g(y) >= f(x) + s*g(x) + (df + s*dg)(x) . (y - x)
// for every s in [0, rho] (the right inequality is convexity, the left one
// holds pointwise because rho*[u]_+ >= s*u for 0 <= s <= rho). The bound is
// concave in s and is maximized by ternary search; the nonnegativity floor of
// distance-type objectives tightens it further (covering the kink at F = 0
// where linearization bounds degenerate).
struct CertBound {
  double lb = -kInf;
  double s = 0.0;
  Vec vertex;          // hull argmin at the maximizing s (empty if unused)
  long long vertex_id = -1;
};

CertBound certified_lower_bound(const Vec& x, const PenaltyObjective& obj,
                                const HullMin& hull_min, double s_hint = -1.0,
                                double tau_hint = 1.0) {
  // Shaped terms linearize the signed surrogate u (valid: the true term
  // dominates u everywhere, and rho*[u]_+ >= s*u for every s in [0, rho]);
  // generic terms fall back to the oracle's own value and subgradient. When a
  // master solve supplies its dual weights (s_hint, tau_hint), the family is
  // also evaluated exactly there: at a primal-dual optimal pair that value
  // closes the gap completely.
  const TermShape sf = shape_of(*obj.f);
  const double fv = sf.valid() ? sf.signed_value(x) : obj.f->value(x);
  Vec gf = sf.valid() ? sf.dir(x) : obj.f->subgrad(x);
  double gv = 0.0;
  Vec gg;
  if (obj.constrained()) {
    const TermShape sg = shape_of(*obj.g);
    gv = sg.valid() ? sg.signed_value(x) : obj.g->value(x);
    gg = sg.valid() ? sg.dir(x) : obj.g->subgrad(x);
  }
  // At the kink of a distance term (x exactly on the anchor) every unit
  // vector is a valid subgradient; the zero choice discards the objective
  // pull and leaves the family loose, while opposing the constraint
  // direction makes the bound exact at the balancing weight s.
  if (sf.valid() && !sf.is_linear() && gf.squaredNorm() == 0.0 && gg.size() &&
      gg.squaredNorm() > 0.0)
    gf = -gg;

  CertBound best;
  auto eval_pair = [&](double tau, double s) {
    Vec gx = tau * gf;
    if (obj.constrained() && s != 0.0) gx += s * gg;
    Vec vertex;
    long long id = -1;
    const double m = hull_min(gx, &vertex, &id);
    const double lb = tau * fv + s * gv - gx.dot(x) + m;
    if (lb > best.lb) {
      best.lb = lb;
      best.s = s;
      best.vertex = vertex;
      best.vertex_id = id;
    }
    return lb;
  };
  auto eval = [&](double s) { return eval_pair(1.0, s); };

  if (!obj.constrained()) {
    eval(0.0);
  } else {
    eval(0.0);
    eval(obj.rho);
    eval(0.5 * obj.rho);
    double lo = 0.0, hi = obj.rho;
    for (int it = 0; it < 72 && hi - lo > 1e-14 * obj.rho; ++it) {
      const double m1 = lo + (hi - lo) / 3.0;
      const double m2 = hi - (hi - lo) / 3.0;
      if (eval(m1) < eval(m2))
        lo = m1;
      else
        hi = m2;
    }
    eval(0.5 * (lo + hi));
    if (s_hint >= 0.0) {
      // tau scaling below 1 is only valid for a hinged objective term.
      const double tau = sf.valid() && sf.hinged() ? std::clamp(tau_hint, 0.0, 1.0) : 1.0;
      eval_pair(tau, std::min(s_hint, obj.rho));
    }
  }
  if (best.lb < obj.floor()) {
    best.lb = obj.floor();
    best.vertex = Vec();
    best.vertex_id = -1;
  }
  return best;
}

// Projected-gradient fixed-point residual min_s || w - proj(w - J^T dF_s) ||
// over the penalty weights s valid at x: on the boundary band |u_g| <= 1e-6
// the hinge subdifferential is the whole segment {d_f + s d_g : s in [0,rho]},
// scanned by a coarse grid plus golden-section refinement; off the band the
// selection is one-sided.
double kkt_residual(const Mat& J, const Vec& w, const Vec& x, const PenaltyObjective& obj,
                    double* s_star = nullptr) {
  const TermShape sf = shape_of(*obj.f);
  Vec gf = sf.valid() ? sf.dir(x) : obj.f->subgrad(x);
  if (s_star) *s_star = 0.0;
  if (!obj.constrained()) {
    const Vec gw = J.transpose() * gf;
    return (w - proj_simplex(w - gw)).norm();
  }
  const TermShape sg = shape_of(*obj.g);
  const Vec dg = sg.valid() ? sg.dir(x) : obj.g->subgrad(x);
  const double gv = sg.valid() ? sg.signed_value(x) : obj.g->value(x);
  // Same kink convention as the certificate: at a distance-term anchor the
  // subgradient is chosen to oppose the constraint direction.
  if (sf.valid() && !sf.is_linear() && gf.squaredNorm() == 0.0 && dg.squaredNorm() > 0.0)
    gf = -dg;
  const Vec base = J.transpose() * gf;
  const Vec dir = J.transpose() * dg;
  auto residual = [&](double s) { return (w - proj_simplex(w - base - s * dir)).norm(); };
  constexpr double kBand = 1e-6;
  if (gv > kBand) {
    if (s_star) *s_star = obj.rho;
    return residual(obj.rho);
  }
  if (gv < -kBand) return residual(0.0);

  constexpr int kGrid = 64;
  double best = kInf;
  double best_s = 0.0;
  int best_k = 0;
  for (int k = 0; k <= kGrid; ++k) {
    const double s = obj.rho * k / kGrid;
    const double r = residual(s);
    if (r < best) {
      best = r;
      best_s = s;
      best_k = k;
    }
  }
  double lo = obj.rho * std::max(best_k - 1, 0) / kGrid;
  double hi = obj.rho * std::min(best_k + 1, kGrid) / kGrid;
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double m1 = hi - invphi * (hi - lo), m2 = lo + invphi * (hi - lo);
  double r1 = residual(m1), r2 = residual(m2);
  for (int it = 0; it < 120 && hi - lo > 0.0; ++it) {
    if (r1 <= r2) {
      hi = m2;
      m2 = m1;
      r2 = r1;
      m1 = hi - invphi * (hi - lo);
      r1 = residual(m1);
    } else {
      lo = m1;
      m1 = m2;
      r1 = r2;
      m2 = lo + invphi * (hi - lo);
      r2 = residual(m2);
    }
    if (r1 < best) {
      best = r1;
      best_s = m1;
    }
    if (r2 < best) {
      best = r2;
      best_s = m2;
    }
  }
  if (s_star) *s_star = best_s;
  return best;
}

struct MasterResult {
  Vec w;
  Vec x;
  double ub = kInf;
  double lb = -kInf;    // running one-sided linearization bound (may be loose)
  double s_opt = 0.0;   // dual penalty weight at the returned point
  double tau_opt = 1.0; // dual objective-hinge weight at the returned point
};

// Projected subgradient over simplex mixture weights with Polyak-type steps;
// the target level adapts by halving when reached or stalled, so the method
// homes in without knowing the optimal value. Exits early when the running
// lower bound already certifies the requested gap.
MasterResult solve_simplex_penalized(const Mat& J, const PenaltyObjective& obj, double tol,
                                     int max_iter, const Vec* warm = nullptr) {
  const Eigen::Index K = J.cols();
  Vec w = warm && warm->size() == K ? *warm : Vec(Vec::Constant(K, 1.0 / K));
  Vec x = J * w;
  double fx = obj.value(x);

  MasterResult res;
  res.w = w;
  res.x = x;
  res.ub = fx;
  res.lb = obj.floor();

  double eps = -1.0;  // initialized from the first computed bound
  int since_improve = 0;
  for (int it = 0; it < max_iter; ++it) {
    const double s = obj.onesided_s(x);
    Vec gx = obj.f->subgrad(x);
    if (s != 0.0) gx += s * obj.g->subgrad(x);
    const Vec gw = J.transpose() * gx;
    // With the one-sided s, f(x) + s g(x) = F(x), so the linearization bound
    // reads F(x) + min_j gw_j - gw . w.
    res.lb = std::max(res.lb, fx + gw.minCoeff() - gw.dot(w));
    if (fx < res.ub - 1e-18) {
      res.ub = fx;
      res.w = w;
      res.x = x;
      since_improve = 0;
    } else {
      ++since_improve;
    }
    if (res.ub - res.lb <= 0.5 * tol) break;
    if (eps < 0.0)
      eps = std::max(res.lb > -kInf ? res.ub - res.lb : std::max(std::abs(res.ub), 1.0),
                     64.0 * tol);
    if (eps <= tol / 16.0) break;
    if (since_improve > 500) {
      eps *= 0.5;
      since_improve = 0;
    }
    double target = std::max(res.lb, res.ub - eps);
    if (fx - target <= eps / 4.0) {
      eps *= 0.5;
      target = std::max(res.lb, res.ub - eps);
    }
    const double gn2 = gw.squaredNorm();
    if (gn2 <= 1e-30) break;
    const double step = (fx - target) / gn2;
    if (step <= 0.0) {
      eps *= 0.5;
      continue;
    }
    w = proj_simplex(w - step * gw);
    x = J * w;
    fx = obj.value(x);
  }
  res.s_opt = obj.onesided_s(res.x);
  return res;
}

// ---------------------------------------------------------------------------
// Structured master: exact dual reduction for shaped oracles.
//
// With shaped terms, F(x) = f(x) + rho*[g(x)]_+ equals the pointwise maximum
// of tau*u_f(x) + s*u_g(x) over (tau, s) in [0,1] x [0,rho] (tau fixed at 1
// unless f is a hinge), with u the signed surrogates. Sion's minimax theorem
// turns min_hull F into a concave maximization of the dual
//   phi(tau, s) = min_{w in simplex} tau*u_f(Jw) + s*u_g(Jw),
// whose inner problem is smooth away from the anchors. The scalar maxima are
// located by bisecting the dual derivatives (envelope theorem: phi' in s is
// u_g at the inner argmin, nonincreasing), and the final bracket endpoints
// are mixed to put the iterate exactly on the hinge boundary; at a kink of
// phi that mixture is the exact primal optimum.
// ---------------------------------------------------------------------------

struct NormTerm {
  Vec q;
  double c = 0.0;
};

// Inner weighted problem of the dual reduction, over x = Jw, w in the simplex:
//   sum_i c_i ||x - q_i||  +  a . x.
struct InnerProblem {
  const Mat* J = nullptr;
  Vec a;                        // embedding-space linear coefficients (may be empty)
  std::vector<NormTerm> norms;  // at most two in practice
};

// Exact projection onto the convex hull of the columns of J: active-set
// (min-norm-point style) solve of min ||Jw - p||^2 over the simplex. Each
// pivot solves the affine-optimal weights on the support and either drops a
// vertex (Wolfe step) or adds the most negative reduced cost. Finite
// termination up to the pivot budget; warm-started from the support of w.
Vec hull_project(const Mat& J, const Vec& p, Vec w) {
  const Eigen::Index K = J.cols();
  std::vector<Eigen::Index> support;
  if (w.size() != K) w = Vec::Constant(K, 1.0 / static_cast<double>(K));
  for (Eigen::Index j = 0; j < K; ++j)
    if (w[j] > 1e-12) support.push_back(j);
  if (support.empty() || static_cast<Eigen::Index>(support.size()) == K) {
    Eigen::Index j0 = 0;
    (J.colwise() - p).colwise().squaredNorm().minCoeff(&j0);
    support.assign(1, j0);
    w = Vec::Zero(K);
    w[j0] = 1.0;
  } else {
    // Renormalize the warm weights on the support.
    double sum = 0.0;
    for (Eigen::Index j : support) sum += w[j];
    Vec wn = Vec::Zero(K);
    for (Eigen::Index j : support) wn[j] = w[j] / sum;
    w = wn;
  }

  for (int pivot = 0; pivot < 2000; ++pivot) {
    const int m = static_cast<int>(support.size());
    // Affine-optimal weights on the support: KKT of min ||J_S u - p||^2 with
    // sum(u) = 1 and u free, ridge-stabilized for duplicate columns.
    Mat kkt = Mat::Zero(m + 1, m + 1);
    Vec rhs(m + 1);
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k <= i; ++k) {
        const double gik = J.col(support[i]).dot(J.col(support[k]));
        kkt(i, k) = gik;
        kkt(k, i) = gik;
      }
      kkt(i, m) = 1.0;
      kkt(m, i) = 1.0;
      rhs[i] = J.col(support[i]).dot(p);
    }
    const double ridge = 1e-13 * (1.0 + kkt.topLeftCorner(m, m).trace() / m);
    for (int i = 0; i < m; ++i) kkt(i, i) += ridge;
    rhs[m] = 1.0;
    const Vec sol = kkt.ldlt().solve(rhs);

    bool interior = true;
    for (int i = 0; i < m; ++i)
      if (sol[i] < -1e-13) interior = false;

    if (!interior) {
      // Wolfe step: move toward the affine solution until a weight hits zero.
      double theta = 1.0;
      for (int i = 0; i < m; ++i) {
        const double wi = w[support[i]], ui = sol[i];
        if (ui < wi && ui < 0.0) theta = std::min(theta, wi / (wi - ui));
      }
      Vec wn = Vec::Zero(K);
      std::vector<Eigen::Index> kept;
      for (int i = 0; i < m; ++i) {
        const double v = (1.0 - theta) * w[support[i]] + theta * sol[i];
        if (v > 1e-13) {
          wn[support[i]] = v;
          kept.push_back(support[i]);
        }
      }
      if (kept.empty()) {  // numerical collapse: keep the largest weight
        Eigen::Index jbest = support[0];
        for (int i = 1; i < m; ++i)
          if (sol[i] > sol[0]) jbest = support[i];
        wn[jbest] = 1.0;
        kept.assign(1, jbest);
      } else {
        double sum = 0.0;
        for (Eigen::Index j : kept) sum += wn[j];
        for (Eigen::Index j : kept) wn[j] /= sum;
      }
      w = wn;
      support = kept;
      continue;
    }

    Vec wn = Vec::Zero(K);
    for (int i = 0; i < m; ++i) wn[support[i]] = std::max(sol[i], 0.0);
    wn /= wn.sum();
    w = wn;
    // Reduced costs: on the support they all equal -nu; globally optimal when
    // no column goes below that level.
    const Vec r = J * w - p;
    const Vec d = J.transpose() * r;
    double level = 0.0;
    for (Eigen::Index j : support) level += d[j];
    level /= static_cast<double>(m);
    Eigen::Index jmin = 0;
    const double dmin = d.minCoeff(&jmin);
    if (dmin >= level - 1e-11 * (1.0 + d.cwiseAbs().maxCoeff())) return w;
    support.push_back(jmin);
  }
  return w;
}

// Fermat-Weber over the hull by majorize-minimize: each step bounds every
// norm by its tangent parabola at the current point, giving an exact hull
// projection of a shifted anchor. Monotone decrease, warm-startable; a single
// pure-norm term converges in one projection.
//
// The plain tangent-parabola step is undefined at an anchor, and an iterate
// that lands exactly on one (anchors that are hull vertices are natural
// landing spots, e.g. warm starts) is absorbed there even when the anchor is
// not optimal. When that happens the pass is redone through a smoothing
// homotopy sqrt(||x-q||^2 + eps^2), which keeps every weight finite, then
// polished exact; the better of the two points wins.
Vec irls_minimize(const InnerProblem& prob, Vec w, int max_iter) {
  const Mat& J = *prob.J;
  const Eigen::Index K = J.cols();
  if (w.size() != K) w = Vec::Constant(K, 1.0 / static_cast<double>(K));
  if (prob.norms.empty()) {
    if (!prob.a.size()) return w;  // constant objective
    Eigen::Index jmin = 0;
    (J.transpose() * prob.a).minCoeff(&jmin);
    Vec v = Vec::Zero(K);
    v[jmin] = 1.0;
    return v;
  }

  const auto objective = [&](const Vec& x) {
    double v = prob.a.size() ? prob.a.dot(x) : 0.0;
    for (const NormTerm& t : prob.norms) v += t.c * (x - t.q).norm();
    return v;
  };
  const auto sweep = [&](Vec w_in, double eps, int iters) -> Vec {
    Vec x = J * w_in;
    for (int it = 0; it < iters; ++it) {
      double lam_sum = 0.0;
      Vec z = Vec::Zero(x.size());
      for (const NormTerm& t : prob.norms) {
        const double dist = std::sqrt((x - t.q).squaredNorm() + eps * eps);
        const double lam = t.c / std::max(2.0 * dist, 1e-18);
        lam_sum += lam;
        z += lam * t.q;
      }
      if (prob.a.size()) z -= 0.5 * prob.a;
      z /= lam_sum;
      w_in = hull_project(J, z, w_in);
      const Vec x_new = J * w_in;
      const double step = (x_new - x).norm();
      x = x_new;
      if (step <= 1e-15 * (1.0 + x.norm())) break;
    }
    return w_in;
  };

  const Vec w_exact = sweep(w, 0.0, max_iter);
  const Vec x_exact = J * w_exact;
  bool on_anchor = false;
  for (const NormTerm& t : prob.norms)
    on_anchor = on_anchor || (x_exact - t.q).norm() <= 1e-9 * (1.0 + t.q.norm());
  // A single pure norm term is exact either way; only an anchor competing
  // with other terms can absorb a non-optimal iterate.
  if (on_anchor && (prob.norms.size() > 1 || prob.a.size())) {
    Vec w_h = w_exact;
    for (const double eps : {1e-2, 1e-4, 1e-6, 1e-8}) w_h = sweep(w_h, eps, max_iter / 4 + 1);
    w_h = sweep(w_h, 0.0, max_iter);
    if (objective(J * w_h) < objective(x_exact)) return w_h;
  }
  return w_exact;
}

InnerProblem make_inner(const Mat& J, const TermShape& sf, double tau, const TermShape* sg,
                        double s) {
  InnerProblem prob;
  prob.J = &J;
  Vec a = Vec::Zero(J.rows());
  bool has_lin = false;
  if (sf.is_linear()) {
    a += sf.v;  // linear f enters unscaled (no hinge to dualize)
    has_lin = true;
  } else if (tau > 0.0) {
    prob.norms.push_back({sf.v, tau});
  }
  if (sg) {
    if (sg->is_linear()) {
      if (s != 0.0) {
        a += s * sg->v;
        has_lin = true;
      }
    } else if (s > 0.0) {
      prob.norms.push_back({sg->v, s});
    }
  }
  if (has_lin) prob.a = a;
  return prob;
}

struct EvalPoint {
  double s = 0.0;
  Vec w, x;
  double u2 = 0.0;  // signed constraint surrogate at x
};

EvalPoint eval_inner(const Mat& J, const TermShape& sf, double tau, const TermShape* sg, double s,
                     const Vec& warm, int iters) {
  EvalPoint p;
  p.s = s;
  p.w = irls_minimize(make_inner(J, sf, tau, sg, s), warm, iters);
  p.x = J * p.w;
  if (sg) p.u2 = sg->signed_value(p.x);
  return p;
}

// Mix two iterates so a signed quantity crosses zero: the linear-combination
// root uses the endpoint values; convexity of the quantity along the segment
// keeps the mixed point on the feasible side, and a bisection refines it onto
// the boundary. Returns the candidate with the smallest true penalized value.
EvalPoint mix_to_boundary(const EvalPoint& pos, const EvalPoint& neg, const PenaltyObjective& obj,
                          const std::function<double(const Vec&)>& signed_value) {
  std::vector<EvalPoint> cands{pos, neg};
  const double vp = signed_value(pos.x), vn = signed_value(neg.x);
  if (vp > 0.0 && vn < 0.0) {
    auto mixed = [&](double lam) {
      EvalPoint m;
      m.s = lam * pos.s + (1.0 - lam) * neg.s;
      m.w = lam * pos.w + (1.0 - lam) * neg.w;
      m.x = lam * pos.x + (1.0 - lam) * neg.x;
      m.u2 = obj.constrained() ? shape_of(*obj.g).signed_value(m.x) : 0.0;
      return m;
    };
    cands.push_back(mixed(-vn / (vp - vn)));
    double lo = 0.0, hi = 1.0;  // signed_value(hi side) > 0 > signed_value(lo side)
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (signed_value(mixed(mid).x) > 0.0 ? hi : lo) = mid;
    }
    cands.push_back(mixed(lo));
  }
  EvalPoint best = cands.front();
  double best_val = kInf;
  for (const EvalPoint& c : cands) {
    const double v = obj.value(c.x);
    if (v < best_val) {
      best_val = v;
      best = c;
    }
  }
  return best;
}

// Maximize phi(s) = min_w tau*u_f + s*u_g over s in [0, rho] by bisecting its
// derivative u_g(x_s), then polish onto the boundary.
EvalPoint maximize_over_s(const Mat& J, const TermShape& sf, double tau, const TermShape& sg,
                          const PenaltyObjective& obj, const Vec& warm) {
  constexpr int kCold = 800, kWarm = 300;
  EvalPoint lo = eval_inner(J, sf, tau, &sg, 0.0, warm, kCold);
  if (lo.u2 <= 0.0) return lo;  // constraint slack at the unpenalized optimum
  EvalPoint hi = eval_inner(J, sf, tau, &sg, obj.rho, lo.w, kCold);
  if (hi.u2 >= 0.0) return hi;  // still violating with the penalty exhausted
  const double u_scale = 1.0 + std::abs(lo.u2);
  for (int it = 0; it < 100 && hi.s - lo.s > 1e-15 * obj.rho; ++it) {
    const Vec& start = std::abs(lo.u2) <= std::abs(hi.u2) ? lo.w : hi.w;
    const EvalPoint mid = eval_inner(J, sf, tau, &sg, 0.5 * (lo.s + hi.s), start, kWarm);
    if (std::abs(mid.u2) <= 1e-14 * u_scale) return mid;
    (mid.u2 > 0.0 ? lo : hi) = mid;
  }
  return mix_to_boundary(lo, hi, obj, [&sg](const Vec& x) { return sg.signed_value(x); });
}

MasterResult solve_master_structured(const Mat& J, const PenaltyObjective& obj, const Vec* warm) {
  const Eigen::Index K = J.cols();
  const Vec w0 = warm && warm->size() == K ? *warm : Vec(Vec::Constant(K, 1.0 / K));
  const TermShape sf = shape_of(*obj.f);

  EvalPoint sol;
  double tau_final = 1.0;
  if (!obj.constrained()) {
    sol = eval_inner(J, sf, 1.0, nullptr, 0.0, w0, 800);
  } else {
    const TermShape sg = shape_of(*obj.g);
    sol = maximize_over_s(J, sf, 1.0, sg, obj, w0);
    if (sf.hinged() && sf.signed_value(sol.x) < 0.0) {
      // Objective hinge inactive at the tau = 1 solution: the dual maximum
      // sits at a smaller tau. Bisect tau on the sign of u_f (nonincreasing
      // in tau by the same envelope argument), then mix onto u_f = 0.
      EvalPoint hi_tau = sol;  // u_f < 0 here
      EvalPoint lo_tau = maximize_over_s(J, sf, 0.0, sg, obj, sol.w);
      if (sf.signed_value(lo_tau.x) <= 0.0) {
        sol = lo_tau;  // the whole tau range keeps the hinge inactive
        tau_final = 0.0;
      } else {
        double tl = 0.0, th = 1.0;
        for (int it = 0; it < 80 && th - tl > 1e-14; ++it) {
          const double tm = 0.5 * (tl + th);
          const EvalPoint mid = maximize_over_s(J, sf, tm, sg, obj, lo_tau.w);
          if (sf.signed_value(mid.x) > 0.0) {
            tl = tm;
            lo_tau = mid;
          } else {
            th = tm;
            hi_tau = mid;
          }
        }
        sol = mix_to_boundary(lo_tau, hi_tau, obj,
                              [&sf](const Vec& x) { return sf.signed_value(x); });
        tau_final = 0.5 * (tl + th);
      }
    }
  }

  MasterResult res;
  res.w = sol.w;
  res.x = sol.x;
  res.ub = obj.value(sol.x);
  res.lb = obj.floor();  // the certificate recomputes the tight bound
  res.s_opt = sol.s;
  res.tau_opt = tau_final;
  return res;
}

std::vector<std::vector<int>> decode_policy(long long index, int S, int A, int H) {
  std::vector<std::vector<int>> actions(H, std::vector<int>(S, 0));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s) {
      actions[h][s] = static_cast<int>(index % A);
      index /= A;
    }
  return actions;
}

struct RhoResult {
  MasterResult master;
  double rho = 0.0;
  double gap = kInf;       // ub minus the certified lower bound over the hull
  double kkt = kInf;
  double s_kkt = 0.0;      // penalty weight minimizing the fixed-point residual
  bool vertex_ok = false;  // no hull vertex improves the penalized objective
  double violation = 0.0;
  bool accepted = false;
};

bool solver_trace() {
  static const bool on = std::getenv("CCMDP_SOLVER_TRACE") != nullptr;
  return on;
}

RhoResult solve_one_rho(const Mat& J, const ConvexOracle& f, const ConvexOracle* g, double rho,
                        double tol, const Vec* warm) {
  PenaltyObjective obj{&f, g, rho};
  RhoResult out;
  out.rho = rho;
  const bool structured = shape_of(f).valid() && (!g || shape_of(*g).valid());
  out.master = structured ? solve_master_structured(J, obj, warm)
                          : solve_simplex_penalized(J, obj, tol, 200000, warm);

  const HullMin enum_min = [&J](const Vec& gx, Vec* vertex, long long* id) {
    const Vec gw = J.transpose() * gx;
    Eigen::Index jmin = 0;
    const double m = gw.minCoeff(&jmin);
    if (vertex) *vertex = J.col(jmin);
    if (id) *id = jmin;  // positional; the caller maps to policy ids
    return m;
  };
  const CertBound cert =
      certified_lower_bound(out.master.x, obj, enum_min, out.master.s_opt, out.master.tau_opt);
  out.gap = std::max(out.master.ub - std::max(cert.lb, out.master.lb), 0.0);
  out.kkt = kkt_residual(J, out.master.w, out.master.x, obj, &out.s_kkt);

  double vmin = kInf;
  for (Eigen::Index j = 0; j < J.cols(); ++j) vmin = std::min(vmin, obj.value(J.col(j)));
  out.vertex_ok = vmin >= out.master.ub - tol;

  out.violation = g ? std::max(g->value(out.master.x), 0.0) : 0.0;
  const bool optimal = out.gap <= tol || (out.kkt <= tol && out.vertex_ok);
  // Near-feasibility certificate: once rho dominates the optimal multiplier,
  // a gap-optimal penalized point violates by at most 2*gap/rho.
  const bool feasible =
      !g || (out.violation <= 1e-7 &&
             (out.violation <= 2.0 * std::max(out.gap, tol) / rho || out.violation <= 1e-9));
  out.accepted = optimal && feasible;
  if (solver_trace()) {
    const double u2 = g && shape_of(*g).valid() ? shape_of(*g).signed_value(out.master.x)
                                                : (g ? g->value(out.master.x) : 0.0);
    std::fprintf(stderr,
                 "[rho %g] K=%td ub=%.12g gap=%.3g kkt=%.3g viol=%.3g u2=%.6g s_opt=%.6g "
                 "tau=%.6g vertex_ok=%d accepted=%d\n",
                 rho, J.cols(), out.master.ub, out.gap, out.kkt, out.violation, u2,
                 out.master.s_opt, out.master.tau_opt, int(out.vertex_ok), int(out.accepted));
  }
  return out;
}

// Sweep rho upward until a solution is certified optimal and near-feasible;
// returns the first accepted rho (or the last attempt, not accepted).
RhoResult penalty_sweep(const Mat& J, const ConvexOracle& f, const ConvexOracle* g, double tol) {
  if (!g) return solve_one_rho(J, f, nullptr, 0.0, tol, nullptr);
  Vec warm;
  RhoResult last;
  for (const double rho : {1.0, 10.0, 100.0, 1000.0, 10000.0}) {
    last = solve_one_rho(J, f, g, rho, tol, warm.size() ? &warm : nullptr);
    warm = last.master.w;
    if (last.accepted) return last;
  }
  return last;
}

long long greedy_policy_id(const StagePolicy& greedy, int S, int A, int H) {
  // Positional encoding overflows for large state spaces; ids are then
  // reported as -1 and deduplication falls back to embedding comparison.
  if (static_cast<double>(S) * H * std::log2(std::max(A, 2)) > 62.0) return -1;
  long long id = 0;
  for (int h = H - 1; h >= 0; --h)
    for (int s = S - 1; s >= 0; --s) {
      int a = 0;
      greedy.probs[h].row(s).maxCoeff(&a);
      id = id * A + a;
    }
  return id;
}

}  // namespace

GroundTruth ground_truth_solve(const FiniteModel& model, const TabularFeatureMap& features,
                               const ConvexOracle& f, const std::optional<ConvexOracle>& g,
                               TruthMode mode, double tol, long long budget) {
  model.validate();
  features.validate();
  const int S = model.S, A = model.A, H = model.H;
  const ConvexOracle* gptr = g ? &*g : nullptr;

  std::vector<Vec> vertex_psi;
  std::vector<long long> vertex_ids;  // deterministic-policy id of each vertex

  // Exact linear minimization over the full policy polytope.
  const HullMin vi_min = [&](const Vec& gx, Vec* vertex, long long* id) {
    const ValueIterationResult vi = value_iteration(model, make_cost_tables(features, gx, S, A, H));
    if (vertex) *vertex = exact_embedding(model, features, vi.greedy);
    if (id) *id = greedy_policy_id(vi.greedy, S, A, H);
    return vi.V1;
  };

  RhoResult outcome;
  if (mode == TruthMode::kEnumeration) {
    long long count = 1;
    for (int i = 0; i < S * H; ++i) {
      count *= A;
      if (count > budget) {
        std::ostringstream msg;
        msg << "ground_truth_solve: A^(S*H) exceeds the enumeration budget " << budget;
        throw NumericalError(msg.str());
      }
    }
    vertex_psi.reserve(count);
    for (long long j = 0; j < count; ++j) {
      const StagePolicy pi = StagePolicy::deterministic(decode_policy(j, S, A, H), S, A);
      vertex_psi.push_back(exact_embedding(model, features, pi));
      vertex_ids.push_back(j);
    }
    Mat J(vertex_psi.front().size(), static_cast<Eigen::Index>(vertex_psi.size()));
    for (size_t j = 0; j < vertex_psi.size(); ++j)
      J.col(static_cast<Eigen::Index>(j)) = vertex_psi[j];
    outcome = penalty_sweep(J, f, gptr, tol);
    if (!outcome.accepted) {
      std::ostringstream msg;
      msg << "ground_truth_solve: enumeration certificate failed (gap=" << outcome.gap
          << ", kkt=" << outcome.kkt << ", violation=" << outcome.violation
          << ", rho=" << outcome.rho << ")";
      throw NumericalError(msg.str());
    }
  } else {
    // Frank-Wolfe: grow an active vertex set with value iteration as the
    // linear minimization oracle; certify against the full polytope.
    {
      const Vec x0 = exact_embedding(model, features, StagePolicy::uniform(S, A, H));
      Vec theta0 = f.subgrad(x0);
      if (theta0.norm() == 0.0) theta0 = Vec::Ones(x0.size());
      Vec v0;
      long long id0 = -1;
      vi_min(theta0, &v0, &id0);
      vertex_psi.push_back(v0);
      vertex_ids.push_back(id0);
    }
    constexpr int kMaxVertices = 500;
    while (true) {
      Mat J(vertex_psi.front().size(), static_cast<Eigen::Index>(vertex_psi.size()));
      for (size_t j = 0; j < vertex_psi.size(); ++j)
        J.col(static_cast<Eigen::Index>(j)) = vertex_psi[j];
      outcome = penalty_sweep(J, f, gptr, tol);

      // Certify over the full polytope at the returned point.
      PenaltyObjective obj{&f, gptr, outcome.rho};
      const CertBound global = certified_lower_bound(outcome.master.x, obj, vi_min,
                                                     outcome.master.s_opt,
                                                     outcome.master.tau_opt);
      const double global_gap = std::max(outcome.master.ub - global.lb, 0.0);
      if (solver_trace())
        std::fprintf(stderr, "[fw] vertices=%zu rho=%g restricted_gap=%.3g global_gap=%.3g "
                             "cert_s=%.6g\n",
                     vertex_psi.size(), outcome.rho, outcome.gap, global_gap, global.s);
      if (outcome.accepted && global_gap <= tol) {
        outcome.gap = global_gap;
        break;
      }

      // Collect candidate vertices from the certifying direction and a coarse
      // penalty-weight probe, then add the first unseen one.
      std::vector<long long> cand_ids;
      std::vector<Vec> cand_psi;
      if (global.vertex_id >= 0) {
        cand_ids.push_back(global.vertex_id);
        cand_psi.push_back(global.vertex);
      }
      const TermShape sfp = shape_of(f);
      Vec gf = sfp.valid() ? sfp.dir(outcome.master.x) : f.subgrad(outcome.master.x);
      Vec gdir;
      if (gptr) {
        const TermShape sgp = shape_of(*gptr);
        gdir = sgp.valid() ? sgp.dir(outcome.master.x) : gptr->subgrad(outcome.master.x);
        // At a distance-term anchor the probe family would otherwise collapse
        // onto multiples of the constraint direction alone.
        if (sfp.valid() && !sfp.is_linear() && gf.squaredNorm() == 0.0 &&
            gdir.squaredNorm() > 0.0)
          gf = -gdir;
      }
      // Probe weights: the fixed-point multiplier first (the most precise
      // estimate of the active dual weight, hence the true reduced-cost
      // direction), then the master's own dual pair, then a coarse grid.
      std::vector<std::pair<double, double>> probes;  // (tau, s)
      probes.emplace_back(outcome.master.tau_opt, outcome.s_kkt);
      probes.emplace_back(outcome.master.tau_opt, outcome.master.s_opt);
      const int n_probe = gptr ? 8 : 0;
      for (int k = 0; k <= n_probe; ++k)
        probes.emplace_back(1.0, gptr ? outcome.rho * k / std::max(n_probe, 1) : 0.0);
      for (const auto& [tau, s] : probes) {
        Vec gx = (sfp.valid() && sfp.hinged() ? std::clamp(tau, 0.0, 1.0) : 1.0) * gf;
        if (gptr && s != 0.0) gx += s * gdir;
        Vec v;
        long long id = -1;
        vi_min(gx, &v, &id);
        cand_ids.push_back(id);
        cand_psi.push_back(v);
      }
      // Deduplicate by the embedding itself (policy ids can collide once the
      // positional encoding saturates, and distinct policies with identical
      // embeddings add nothing to the hull either way).
      auto is_active = [&](const Vec& cand) {
        for (const Vec& v : vertex_psi)
          if ((cand - v).cwiseAbs().maxCoeff() <= 1e-11 * (1.0 + v.cwiseAbs().maxCoeff()))
            return true;
        return false;
      };
      bool added = false;
      for (size_t c = 0; c < cand_ids.size(); ++c) {
        if (!is_active(cand_psi[c])) {
          vertex_ids.push_back(cand_ids[c]);
          vertex_psi.push_back(cand_psi[c]);
          added = true;
          break;
        }
      }
      if (!added) {
        std::ostringstream msg;
        msg << "ground_truth_solve: Frank-Wolfe stalled before certification (gap="
            << global_gap << ", kkt=" << outcome.kkt << ", violation=" << outcome.violation
            << ", rho=" << outcome.rho << ", vertices=" << vertex_psi.size() << ")";
        throw NumericalError(msg.str());
      }
      if (static_cast<int>(vertex_psi.size()) > kMaxVertices)
        throw NumericalError("ground_truth_solve: Frank-Wolfe active set exceeded its budget");
    }
  }

  GroundTruth truth;
  truth.psi_star = outcome.master.x;
  truth.f_star = f.value(outcome.master.x);
  truth.g_star = g ? g->value(outcome.master.x) : 0.0;
  truth.certified_gap = outcome.gap;
  truth.kkt_residual = outcome.kkt;
  truth.rho_used = outcome.rho;
  for (Eigen::Index j = 0; j < outcome.master.w.size(); ++j) {
    if (outcome.master.w[j] > 1e-10) {
      truth.weights.push_back(outcome.master.w[j]);
      truth.support_embeddings.push_back(vertex_psi[j]);
      // Ids of -1 mark policies whose positional encoding saturated; their
      // action tables are reported empty.
      truth.support_policies.push_back(vertex_ids[j] >= 0
                                           ? decode_policy(vertex_ids[j], S, A, H)
                                           : std::vector<std::vector<int>>{});
    }
  }
  return truth;
}

RegretCurves regret_violation(const RunResult& result, const GroundTruth& truth,
                              const ConvexOracle& f, const std::optional<ConvexOracle>& g) {
  (void)f;
  RegretCurves curves;
  curves.regret.reserve(result.records.size());
  curves.violation.reserve(result.records.size());
  for (const EpisodeRecord& rec : result.records) {
    curves.regret.push_back(rec.t * (rec.f_mixed - truth.f_star));
    curves.violation.push_back(g ? rec.t * rec.g_mixed : 0.0);
  }
  curves.final_regret = curves.regret.empty() ? 0.0 : curves.regret.back();
  curves.final_violation = curves.violation.empty() ? 0.0 : curves.violation.back();
  return curves;
}

}  // namespace ccmdp
