// Acceptance gates for the constrained-MDP primal-dual stack.
//
// Each gate is a self-contained empirical check with its tolerances pinned
// below, printed as exactly one PASS/FAIL line. The process exit code is the
// number of failed gates, so the suite doubles as a CI check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ccmdp/dualopt.hpp"
#include "ccmdp/embedding.hpp"
#include "ccmdp/fenchel.hpp"
#include "ccmdp/harness.hpp"
#include "ccmdp/knr.hpp"
#include "ccmdp/lowrank.hpp"
#include "ccmdp/planner.hpp"
#include "ccmdp/rng.hpp"
#include "ccmdp/solver.hpp"

namespace {

using ccmdp::CounterRng;
using ccmdp::Mat;
using ccmdp::Vec;

// ---------------------------------------------------------------------------
// Shared fixture helpers
// ---------------------------------------------------------------------------

ccmdp::FiniteModel random_model(CounterRng& rng, int S, int A, int H) {
  ccmdp::FiniteModel m;
  m.S = S;
  m.A = A;
  m.H = H;
  m.initial_state = rng.uniform_int(S);
  m.tensors.resize(H);
  for (int h = 0; h < H; ++h) {
    Mat T(S * A, S);
    for (int r = 0; r < S * A; ++r) {
      double sum = 0.0;
      for (int c = 0; c < S; ++c) {
        T(r, c) = 0.05 + rng.uniform01();
        sum += T(r, c);
      }
      T.row(r) /= sum;
    }
    m.tensors[h] = T;
  }
  return m;
}

ccmdp::StagePolicy random_stochastic(CounterRng& rng, int S, int A, int H) {
  ccmdp::StagePolicy pol;
  pol.probs.resize(H);
  for (int h = 0; h < H; ++h) {
    Mat P(S, A);
    for (int s = 0; s < S; ++s) {
      double sum = 0.0;
      for (int a = 0; a < A; ++a) {
        P(s, a) = 0.05 + rng.uniform01();
        sum += P(s, a);
      }
      P.row(s) /= sum;
    }
    pol.probs[h] = P;
  }
  return pol;
}

std::vector<std::vector<int>> random_action_table(CounterRng& rng, int S, int A, int H) {
  std::vector<std::vector<int>> acts(H, std::vector<int>(S, 0));
  for (int h = 0; h < H; ++h)
    for (int s = 0; s < S; ++s) acts[h][s] = rng.uniform_int(A);
  return acts;
}

Mat random_spectral(CounterRng& rng, int rows, int cols, double spectral_norm) {
  Mat M(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) M(r, c) = rng.normal();
  Eigen::JacobiSVD<Mat> svd(M);
  const double top = svd.singularValues()(0);
  if (top > 0.0) M *= spectral_norm / top;
  return M;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return num / den;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Gate 1: conjugate reconstruction.
//
// For each built-in convex oracle and random points in the operating box,
// the closed-form dual maximizer must rebuild f(x) to 1e-7, and a stochastic
// hill climb over the dual domain must land within 1e-3 of f(x) from below.
// ---------------------------------------------------------------------------

double climb_dual(const ccmdp::ConvexOracle& o, const Vec& x, CounterRng& rng) {
  const auto score = [&](const Vec& a) { return a.dot(x) - o.conjugate(a); };
  if (o.domain.singleton) return score(o.domain.point);
  const double L = o.domain.radius;
  const int d = static_cast<int>(x.size());
  static const double kScales[] = {1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001};
  double best = -1e300;
  for (int start = 0; start < 3; ++start) {
    Vec a = Vec::Zero(d);
    if (start > 0) {
      for (int i = 0; i < d; ++i) a[i] = rng.normal();
      a = ccmdp::project_ball(a, L * rng.uniform01());
    }
    double val = score(a);
    for (double s : kScales) {
      for (int k = 0; k < 80; ++k) {
        Vec cand = a;
        for (int i = 0; i < d; ++i) cand[i] += s * L * rng.normal();
        cand = ccmdp::project_ball(cand, L);
        const double v = score(cand);
        if (v > val) {
          val = v;
          a = cand;
        }
      }
    }
    best = std::max(best, val);
  }
  return best;
}

bool gate_conjugate_reconstruction(std::string* detail) {
  constexpr double kClosedTol = 1e-7;
  constexpr double kSearchTol = 1e-3;
  constexpr int kPoints = 1000;
  constexpr int kDim = 4;

  CounterRng rng(20260801);
  Vec c(kDim), p(kDim), center(kDim);
  for (int i = 0; i < kDim; ++i) {
    c[i] = rng.normal();
    p[i] = rng.uniform(-2.0, 2.0);
    center[i] = rng.uniform(-2.0, 2.0);
  }
  const ccmdp::ConvexOracle oracles[] = {
      ccmdp::make_linear_oracle(c),
      ccmdp::make_distance_to_point_oracle(p),
      ccmdp::make_distance_to_ball_oracle(center, 0.9),
  };

  double worst_closed = 0.0, worst_search = 0.0;
  for (const auto& o : oracles) {
    for (int n = 0; n < kPoints; ++n) {
      Vec x(kDim);
      for (int i = 0; i < kDim; ++i) x[i] = rng.uniform(-3.0, 3.0);
      const double v = o.value(x);
      worst_closed = std::max(worst_closed, std::abs(o.reconstruct(x) - v));
      const double found = climb_dual(o, x, rng);
      worst_search = std::max(worst_search, std::abs(found - v));
      if (found > v + 1e-9) {
        *detail = "dual search exceeded the primal value (duality broken)";
        return false;
      }
    }
  }
  *detail = "worst closed-form gap " + fmt(worst_closed) + ", worst search gap " +
            fmt(worst_search);
  return worst_closed <= kClosedTol && worst_search <= kSearchTol;
}

// ---------------------------------------------------------------------------
// Gate 2: cone-slab projection.
//
// The returned point must beat every random feasible probe in distance to
// the input (variational characterization) and projecting twice must not
// move the point.
// ---------------------------------------------------------------------------

bool gate_projection(std::string* detail) {
  constexpr double kSlack = 1e-8;
  constexpr double kIdem = 1e-12;
  constexpr int kInputs = 200;
  constexpr int kProbes = 10000;
  constexpr double kGamma = 1.5;
  constexpr double kLg = 0.8;
  constexpr int kDim = 3;

  CounterRng rng(20260802);
  double worst_margin = -1e300, worst_idem = 0.0;
  for (int n = 0; n < kInputs; ++n) {
    Vec beta(kDim);
    for (int i = 0; i < kDim; ++i) beta[i] = rng.uniform(-4.0, 4.0);
    const double gamma = rng.uniform(-2.0, 3.5);
    const auto res = ccmdp::project_cone_slab(beta, gamma, kGamma, kLg);
    const double d_out =
        std::sqrt((beta - res.beta).squaredNorm() + (gamma - res.gamma) * (gamma - res.gamma));

    for (int k = 0; k < kProbes; ++k) {
      const double gp = rng.uniform01() * kGamma;
      Vec dir(kDim);
      for (int i = 0; i < kDim; ++i) dir[i] = rng.normal();
      dir.normalize();
      // Mix interior and boundary probes of the ||b|| <= gp * L_g ball.
      const double rad = (k % 4 == 0) ? gp * kLg : gp * kLg * std::cbrt(rng.uniform01());
      const Vec bp = rad * dir;
      const double d_probe =
          std::sqrt((beta - bp).squaredNorm() + (gamma - gp) * (gamma - gp));
      worst_margin = std::max(worst_margin, d_out - d_probe);
      if (d_out > d_probe + kSlack) {
        *detail = "a probe beat the projection by " + fmt(d_out - d_probe);
        return false;
      }
    }

    const auto again = ccmdp::project_cone_slab(res.beta, res.gamma, kGamma, kLg);
    const double moved = std::sqrt((again.beta - res.beta).squaredNorm() +
                                   (again.gamma - res.gamma) * (again.gamma - res.gamma));
    worst_idem = std::max(worst_idem, moved);
  }
  *detail =
      "worst probe margin " + fmt(worst_margin) + ", worst reprojection move " + fmt(worst_idem);
  return worst_idem <= kIdem;
}

// ---------------------------------------------------------------------------
// Gate 3: the two-model value-difference decomposition balances exactly.
// ---------------------------------------------------------------------------

bool gate_value_difference(std::string* detail) {
  constexpr double kTol = 1e-9;
  constexpr int kPairs = 100;

  CounterRng rng(20260803);
  double worst = 0.0;
  for (int n = 0; n < kPairs; ++n) {
    const int S = 2 + rng.uniform_int(3);
    const int A = 2 + rng.uniform_int(2);
    const int H = 2 + rng.uniform_int(3);
    ccmdp::FiniteModel m1 = random_model(rng, S, A, H);
    ccmdp::FiniteModel m2 = random_model(rng, S, A, H);
    m2.initial_state = m1.initial_state;
    std::vector<Vec> cost(H);
    for (int h = 0; h < H; ++h) {
      cost[h] = Vec(S * A);
      for (int i = 0; i < S * A; ++i) cost[h][i] = rng.uniform(-1.0, 1.0);
    }
    const auto pol = random_stochastic(rng, S, A, H);
    const auto [lhs, rhs] = ccmdp::value_difference_check(m1, m2, cost, pol);
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  *detail = "worst identity residual " + fmt(worst);
  return worst <= kTol;
}

// ---------------------------------------------------------------------------
// Gate 4: episodic design-matrix potential.
//
// With unit ridge and unit-bounded features updated once per episode of
// length H, the summed inverse-design norms stay under 2H times the
// log-determinant growth.
// ---------------------------------------------------------------------------

bool gate_elliptical_potential(std::string* detail) {
  constexpr int kStreams = 100;
  constexpr int kEpisodes = 50;
  constexpr int kH = 4;

  CounterRng rng(20260804);
  double worst_ratio = 0.0;
  for (int n = 0; n < kStreams; ++n) {
    const int d = 2 + rng.uniform_int(5);
    const int type = n % 4;
    Vec b1(d), b2(d);
    for (int i = 0; i < d; ++i) {
      b1[i] = rng.normal();
      b2[i] = rng.normal();
    }
    b1.normalize();
    b2 = (b2 - b1.dot(b2) * b1).normalized();

    const auto draw = [&](int step) -> Vec {
      Vec v(d);
      switch (type) {
        case 0:
          for (int i = 0; i < d; ++i) v[i] = rng.normal();
          v.normalize();
          v *= std::pow(rng.uniform01(), 1.0 / d);
          return v;
        case 1:
          v = rng.uniform(-1.0, 1.0) * b1 + rng.uniform(-1.0, 1.0) * b2;
          if (v.norm() > 1.0) v.normalize();
          return v;
        case 2:
          return b1;
        default:
          return std::cos(0.05 * step) * b1 + std::sin(0.05 * step) * b2;
      }
    };

    Mat lambda = Mat::Identity(d, d);
    double potential = 0.0;
    int step = 0;
    for (int t = 0; t < kEpisodes; ++t) {
      const Eigen::LLT<Mat> llt(lambda);
      Mat gram = Mat::Zero(d, d);
      for (int h = 0; h < kH; ++h) {
        const Vec phi = draw(step++);
        potential += phi.dot(llt.solve(phi));
        gram += phi * phi.transpose();
      }
      lambda += gram;
    }
    const double budget = 2.0 * kH * std::log(lambda.determinant());
    if (potential > budget + 1e-9) {
      *detail = "potential " + fmt(potential) + " exceeded budget " + fmt(budget);
      return false;
    }
    if (budget > 0.0) worst_ratio = std::max(worst_ratio, potential / budget);
  }
  *detail = "worst potential/budget ratio " + fmt(worst_ratio);
  return true;
}

// ---------------------------------------------------------------------------
// Gate 5: regulator confidence ellipsoid coverage.
//
// Across seeded runs of ridge estimation on rolled trajectories, the true
// dynamics matrix must stay inside the spectral ellipsoid at every episode
// in at least 90% of runs.
// ---------------------------------------------------------------------------

bool gate_knr_coverage(std::string* detail) {
  constexpr int kRuns = 200;
  constexpr int kT = 100;
  constexpr int kH = 4;
  constexpr int kStateDim = 2;
  constexpr int kDPhi = 3;
  constexpr int kActions = 3;
  constexpr double kSigma = 0.5;
  constexpr double kLambda = 1.0;
  constexpr double kDelta = 0.1;
  constexpr double kMinCovered = 0.90;

  int covered_runs = 0;
  for (int run = 0; run < kRuns; ++run) {
    CounterRng rng(900000ULL + run);
    ccmdp::KnrModel model;
    model.phi = ccmdp::KnrFeatures::random_projection(kStateDim, kActions, kDPhi,
                                                      7000ULL + run);
    model.W = random_spectral(rng, kStateDim, kDPhi, 0.9);
    model.sigma = kSigma;
    model.H = kH;
    model.num_actions = kActions;
    model.initial_state = Vec::Zero(kStateDim);

    CounterRng pol_rng = rng.fork(1);
    ccmdp::KnrPolicy policy = [pol_rng](int, const Vec&) mutable {
      return pol_rng.uniform_int(kActions);
    };

    ccmdp::KnrDataset data;
    bool covered = true;
    for (int t = 1; t <= kT && covered; ++t) {
      const auto traj = ccmdp::knr_rollout(model, policy, rng.fork(100 + t));
      ccmdp::append_transitions(model, traj, &data);
      const auto est = ccmdp::ridge_fit(data, kStateDim, kDPhi, kLambda);
      const double det_ratio = std::max(1.0, est.Lambda.determinant());
      const double radius =
          ccmdp::knr_radius(t, kStateDim, kLambda, kSigma, kDelta, det_ratio);
      covered = ccmdp::spectral_ellipsoid_stat(est, model.W) <= radius;
    }
    covered_runs += covered ? 1 : 0;
  }
  const double frac = static_cast<double>(covered_runs) / kRuns;
  *detail = std::to_string(covered_runs) + "/" + std::to_string(kRuns) + " runs covered";
  return frac >= kMinCovered;
}

// ---------------------------------------------------------------------------
// Gate 6: candidate-class confidence coverage and MLE error decay.
//
// The truth must stay in the per-stage confidence set at every episode in at
// least 90% of runs, and the median empirical L1^2 gap of the MLE to the
// truth must at least halve between episodes 25 and 100.
// ---------------------------------------------------------------------------

// Distractors at geometrically spread distances from the truth, so candidate
// elimination is spread across the sample sizes the decay check probes.
ccmdp::ModelClass perturbed_candidates(CounterRng& rng, const ccmdp::FiniteModel& truth,
                                       int truth_idx) {
  static const double kMix[] = {0.45, 0.30, 0.20, 0.13, 0.08};
  std::vector<ccmdp::FiniteModel> list;
  for (double w : kMix) {
    ccmdp::FiniteModel m = truth;
    for (auto& T : m.tensors) {
      for (int r = 0; r < T.rows(); ++r) {
        Vec noise(T.cols());
        double sum = 0.0;
        for (int c = 0; c < T.cols(); ++c) {
          noise[c] = 0.05 + rng.uniform01();
          sum += noise[c];
        }
        noise /= sum;
        T.row(r) = (1.0 - w) * T.row(r) + w * noise.transpose();
      }
    }
    list.push_back(std::move(m));
  }
  list.insert(list.begin() + truth_idx, truth);
  return ccmdp::ModelClass::from_list(std::move(list));
}

bool gate_lowrank_coverage(std::string* detail) {
  constexpr int kRuns = 200;
  constexpr int kDecayRuns = 50;
  constexpr int kT = 100;
  constexpr int kS = 3, kA = 2, kH = 3, kK = 6;
  constexpr double kDelta = 0.1;
  constexpr double kC = 2.0;
  constexpr double kMinCovered = 0.90;

  int covered_runs = 0;
  std::vector<double> stat25, stat100;
  for (int run = 0; run < kRuns; ++run) {
    CounterRng rng(910000ULL + run);
    const ccmdp::FiniteModel truth = random_model(rng, kS, kA, kH);
    const int truth_idx = run % kK;
    const ccmdp::ModelClass cls = perturbed_candidates(rng, truth, truth_idx);
    const auto policy = ccmdp::StagePolicy::uniform(kS, kA, kH);

    ccmdp::StageDataset data(kH);
    bool covered = true;
    for (int t = 1; t <= kT; ++t) {
      ccmdp::collect_augmented_tuples(truth, policy, rng.fork(200 + t), &data);
      const auto mle = ccmdp::mle_fit(data, cls);
      const double radius =
          ccmdp::lowrank_radius(t, kT, kH, cls.theta_count, cls.upsilon_count, kDelta, kC);
      const auto members = ccmdp::confidence_members(cls, data, mle, radius);
      for (int h = 0; h < kH && covered; ++h)
        covered = std::find(members[h].begin(), members[h].end(), truth_idx) !=
                  members[h].end();
      if (!covered) break;

      if (run < kDecayRuns && (t == 25 || t == kT)) {
        double stat = 0.0;
        for (int h = 0; h < kH; ++h)
          stat += ccmdp::l1_sq_empirical(data, h, cls.candidates[mle[h]], truth);
        stat /= kH;
        (t == 25 ? stat25 : stat100).push_back(stat);
      }
    }
    covered_runs += covered ? 1 : 0;
  }

  const double frac = static_cast<double>(covered_runs) / kRuns;
  // Runs that lose coverage early never reach the decay checkpoints; require
  // the full panel so the medians are comparable.
  if (stat25.size() < kDecayRuns || stat100.size() < kDecayRuns) {
    *detail = "decay panel incomplete (" + std::to_string(stat100.size()) + "/50 runs)";
    return false;
  }
  const double med25 = median(stat25);
  const double med100 = median(stat100);
  *detail = std::to_string(covered_runs) + "/" + std::to_string(kRuns) +
            " runs covered; median MLE gap " + fmt(med25) + " @25 -> " + fmt(med100) + " @100";
  return frac >= kMinCovered && med100 <= 0.5 * med25;
}

// ---------------------------------------------------------------------------
// Gate 7: aggregate optimism.
//
// Along any run whose confidence sets always contained the truth, the
// planned embeddings scored by the episode's own dual costs never beat the
// optimal mixture by more than numerical dust, summed across episodes.
// ---------------------------------------------------------------------------

bool gate_optimism(std::string* detail) {
  constexpr double kTol = 1e-6;
  const std::uint64_t kSeeds[] = {1, 2, 3};

  double worst_sum = -1e300;
  int covered_runs = 0;

  for (std::uint64_t seed : kSeeds) {
    ccmdp::ExperimentSpec spec = ccmdp::make_multiobjective_finite(seed, 2, false);
    const auto truth = ccmdp::ground_truth_solve(spec.truth, spec.features, spec.f, spec.g,
                                                 ccmdp::TruthMode::kEnumeration, 1e-8, 100000);
    const auto result = ccmdp::run(spec);
    double sum = 0.0;
    for (const auto& rec : result.records)
      sum += rec.dual.theta.dot(rec.psi_plan - truth.psi_star);
    worst_sum = std::max(worst_sum, sum);
    ++covered_runs;  // the known-model confidence set is exact
    if (sum > kTol) {
      *detail = "known-model optimism sum " + fmt(sum) + " (seed " + std::to_string(seed) + ")";
      return false;
    }
  }

  for (std::uint64_t seed : kSeeds) {
    const ccmdp::RunConfig rc = ccmdp::make_multiobjective_lowrank(seed);
    const ccmdp::ExperimentSpec& spec = rc.spec;
    const auto result = ccmdp::run(spec);
    bool covered = true;
    for (const auto& rec : result.records) covered = covered && rec.coverage;
    if (!covered) continue;
    ++covered_runs;
    const auto truth = ccmdp::ground_truth_solve(spec.truth, spec.features, spec.f, spec.g,
                                                 ccmdp::TruthMode::kEnumeration, 1e-8, 100000);
    double sum = 0.0;
    for (const auto& rec : result.records)
      sum += rec.dual.theta.dot(rec.psi_plan - truth.psi_star);
    worst_sum = std::max(worst_sum, sum);
    if (sum > kTol) {
      *detail = "candidate-class optimism sum " + fmt(sum) + " (seed " + std::to_string(seed) + ")";
      return false;
    }
  }

  if (covered_runs <= 3) {
    *detail = "no candidate-class run kept coverage; nothing to certify";
    return false;
  }
  *detail = std::to_string(covered_runs) + " covered runs, worst optimism sum " + fmt(worst_sum);
  return true;
}

// ---------------------------------------------------------------------------
// Gate 8: end-to-end sublinearity on the apprenticeship benchmark.
//
// On the ball-constrained apprenticeship preset, the log-log growth rate of
// cumulative regret and cumulative violation across T in {250..4000} must be
// at most 0.65 in the median over seeds (a square-root law gives 0.5).
// ---------------------------------------------------------------------------

bool gate_sublinearity(std::string* detail) {
  constexpr double kMaxSlope = 0.65;
  constexpr double kFloor = 1e-6;
  constexpr int kSeeds = 10;
  const std::vector<int> checkpoints = {250, 500, 1000, 2000, 4000};

  std::vector<double> regret_slopes, violation_slopes;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    ccmdp::RunConfig rc = ccmdp::make_preset("apprenticeship_tabular_ball", seed);
    rc.spec.T = checkpoints.back();
    const auto result = ccmdp::run(rc.spec);
    const auto truth = ccmdp::solve_ground_truth(rc.spec, ccmdp::ComparatorMode::kFrankWolfe,
                                                 1e-8, 100000);
    const auto curves = ccmdp::regret_violation(result, truth, rc.spec.f, rc.spec.g);

    std::vector<double> lx, ly_r, ly_v;
    for (int T : checkpoints) {
      lx.push_back(std::log(static_cast<double>(T)));
      ly_r.push_back(std::log(std::max(curves.regret[T - 1], kFloor)));
      ly_v.push_back(std::log(std::max(curves.violation[T - 1], kFloor)));
    }
    regret_slopes.push_back(ls_slope(lx, ly_r));
    violation_slopes.push_back(ls_slope(lx, ly_v));
  }
  const double med_r = median(regret_slopes);
  const double med_v = median(violation_slopes);
  *detail = "median slope regret " + fmt(med_r) + ", violation " + fmt(med_v);
  return med_r <= kMaxSlope && med_v <= kMaxSlope;
}

// ---------------------------------------------------------------------------
// Gate 9: online projected ascent against random linear adversaries.
// ---------------------------------------------------------------------------

bool gate_online_regret(std::string* detail) {
  constexpr int kT = 10000;
  constexpr int kSeeds = 20;
  constexpr int kDim = 5;
  constexpr double kR = 1.3;
  constexpr double kG = 0.7;

  double worst_ratio = 0.0;
  const double budget = 3.0 * kR * kG * std::sqrt(static_cast<double>(kT));
  for (int seed = 0; seed < kSeeds; ++seed) {
    CounterRng rng(930000ULL + seed);
    std::vector<Vec> rewards(kT);
    for (int t = 0; t < kT; ++t) {
      Vec c(kDim);
      for (int i = 0; i < kDim; ++i) c[i] = rng.normal();
      rewards[t] = kG * c.normalized();
    }

    ccmdp::OnlineAscentSpec spec;
    spec.R = kR;
    spec.G = kG;
    spec.anytime = true;
    spec.T = kT;
    const auto iterates = ccmdp::online_projected_subgradient(
        spec, kDim, [&](int t, const Vec&) { return rewards[t - 1]; });

    Vec total = Vec::Zero(kDim);
    double earned = 0.0;
    for (int t = 0; t < kT; ++t) {
      earned += rewards[t].dot(iterates[t]);
      total += rewards[t];
    }
    const double regret = kR * total.norm() - earned;
    worst_ratio = std::max(worst_ratio, regret / budget);
    if (regret > budget) {
      *detail = "seed " + std::to_string(seed) + " regret " + fmt(regret) + " > budget " +
                fmt(budget);
      return false;
    }
  }
  *detail = "worst regret/budget ratio " + fmt(worst_ratio);
  return true;
}

// ---------------------------------------------------------------------------
// Gate 10: closed-form Gaussian chi-square versus quadrature.
// ---------------------------------------------------------------------------

double simpson_axis_integral(double mu1, double mu2, double sigma) {
  const double lo = std::min({mu1, mu2, 2.0 * mu1 - mu2}) - 12.0 * sigma;
  const double hi = std::max({mu1, mu2, 2.0 * mu1 - mu2}) + 12.0 * sigma;
  const int n = 24000;  // even interval count
  const double h = (hi - lo) / n;
  const double z = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
  const auto f = [&](double x) {
    const double p1 = z * std::exp(-0.5 * (x - mu1) * (x - mu1) / (sigma * sigma));
    const double p2 = z * std::exp(-0.5 * (x - mu2) * (x - mu2) / (sigma * sigma));
    return p1 * p1 / p2;
  };
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

bool gate_chi_square(std::string* detail) {
  constexpr double kTol = 1e-6;
  constexpr int kTriples = 20;

  CounterRng rng(20260810);
  double worst = 0.0;
  for (int n = 0; n < kTriples; ++n) {
    const int d = (n < 10) ? 1 : 2;
    const double sigma = rng.uniform(0.4, 1.4);
    Vec mu1(d), mu2(d);
    for (int i = 0; i < d; ++i) {
      mu1[i] = rng.uniform(-1.0, 1.0);
      mu2[i] = rng.uniform(-1.0, 1.0);
    }
    const double gap = (mu1 - mu2).norm();
    if (gap > 1.5 * sigma) mu2 = mu1 + (mu2 - mu1) * (1.5 * sigma / gap);

    double quad = 1.0;
    for (int i = 0; i < d; ++i) quad *= simpson_axis_integral(mu1[i], mu2[i], sigma);
    quad -= 1.0;
    worst = std::max(worst, std::abs(quad - ccmdp::gaussian_chi_square(mu1, mu2, sigma)));
  }
  *detail = "worst quadrature gap " + fmt(worst);
  return worst <= kTol;
}

// ---------------------------------------------------------------------------
// Gate 11: the two ground-truth comparators agree.
// ---------------------------------------------------------------------------

bool gate_comparators_agree(std::string* detail) {
  constexpr double kTol = 1e-5;
  constexpr int kInstances = 20;
  constexpr int kS = 2, kA = 2, kH = 2, kD = 2;

  CounterRng rng(20260811);
  double worst = 0.0;
  for (int n = 0; n < kInstances; ++n) {
    const ccmdp::FiniteModel model = random_model(rng, kS, kA, kH);
    const auto feats =
        ccmdp::TabularFeatureMap::random(kS, kA, kH, kD, 1.0, 5000ULL + n);
    const auto pol_a = ccmdp::StagePolicy::deterministic(
        random_action_table(rng, kS, kA, kH), kS, kA);
    const auto pol_b = ccmdp::StagePolicy::deterministic(
        random_action_table(rng, kS, kA, kH), kS, kA);
    const Vec psi_a = ccmdp::exact_embedding(model, feats, pol_a);
    const Vec psi_b = ccmdp::exact_embedding(model, feats, pol_b);
    Vec target = 0.5 * (psi_a + psi_b);
    for (int i = 0; i < target.size(); ++i) target[i] += rng.uniform(-0.3, 0.3);
    const auto f = ccmdp::make_distance_to_point_oracle(target);
    const double slater_radius = std::max(0.6 * (psi_a - target).norm(), 0.05);
    const std::optional<ccmdp::ConvexOracle> g =
        ccmdp::make_distance_to_ball_oracle(psi_a, slater_radius);

    const auto enumeration = ccmdp::ground_truth_solve(model, feats, f, g,
                                                       ccmdp::TruthMode::kEnumeration, 1e-7);
    const auto frank_wolfe = ccmdp::ground_truth_solve(model, feats, f, g,
                                                       ccmdp::TruthMode::kFrankWolfe, 1e-7);
    worst = std::max(worst, std::abs(enumeration.f_star - frank_wolfe.f_star));
  }
  *detail = "worst optimum disagreement " + fmt(worst);
  return worst <= kTol;
}

}  // namespace

int main() {
  struct Gate {
    const char* label;
    double budget_seconds;
    bool (*fn)(std::string*);
  };
  const Gate gates[] = {
      {"conjugate reconstruction matches direct evaluation", 10, gate_conjugate_reconstruction},
      {"cone-slab projection is nearest-feasible and idempotent", 30, gate_projection},
      {"two-model value-difference decomposition balances", 10, gate_value_difference},
      {"episodic design-matrix potential respects its budget", 10, gate_elliptical_potential},
      {"regulator confidence ellipsoid keeps the true dynamics", 300, gate_knr_coverage},
      {"candidate-class confidence set covers and its MLE gap decays", 300,
       gate_lowrank_coverage},
      {"optimistic plans never beat the optimal mixture in aggregate", 120, gate_optimism},
      {"regret and violation grow sublinearly on the apprenticeship preset", 900,
       gate_sublinearity},
      {"online projected ascent meets the adversarial regret budget", 60, gate_online_regret},
      {"closed-form Gaussian chi-square matches quadrature", 5, gate_chi_square},
      {"enumeration and column-generation comparators agree", 120, gate_comparators_agree},
  };

  std::printf("constrained-mdp acceptance suite\n");
  std::printf("--------------------------------\n");
  int failures = 0;
  const int total = static_cast<int>(sizeof(gates) / sizeof(gates[0]));
  for (int i = 0; i < total; ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::string note;
    bool ok = false;
    try {
      ok = gates[i].fn(&note);
    } catch (const std::exception& e) {
      note = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > gates[i].budget_seconds) {
      ok = false;
      note += " [over time budget " + fmt(gates[i].budget_seconds) + " s]";
    }
    failures += ok ? 0 : 1;
    std::printf("[%2d/%d] %s  %-62s (%6.2f s)  %s\n", i + 1, total, ok ? "PASS" : "FAIL",
                gates[i].label, elapsed, note.c_str());
    std::fflush(stdout);
  }
  std::printf("--------------------------------\n");
  std::printf("%d/%d gates passed\n", total - failures, total);
  return failures;
}
