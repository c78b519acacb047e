#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "ccmdp/embedding.hpp"
#include "ccmdp/errors.hpp"
#include "ccmdp/lowrank.hpp"
#include "ccmdp/rng.hpp"

using namespace ccmdp;

namespace {

FiniteModel random_model(CounterRng& rng, int S, int A, int H, int s0 = 0) {
  FiniteModel m;
  m.S = S;
  m.A = A;
  m.H = H;
  m.initial_state = s0;
  for (int h = 0; h < H; ++h) {
    Mat P(S * A, S);
    for (int r = 0; r < S * A; ++r) {
      double total = 0.0;
      for (int c = 0; c < S; ++c) {
        P(r, c) = 0.05 + rng.uniform01();
        total += P(r, c);
      }
      P.row(r) /= total;
    }
    m.tensors.push_back(P);
  }
  m.validate();
  return m;
}

// A model that always lands in `target` regardless of (s, a).
FiniteModel point_model(int S, int A, int H, int target) {
  FiniteModel m;
  m.S = S;
  m.A = A;
  m.H = H;
  m.initial_state = 0;
  for (int h = 0; h < H; ++h) {
    Mat P = Mat::Zero(S * A, S);
    P.col(target).setOnes();
    m.tensors.push_back(P);
  }
  m.validate();
  return m;
}

}  // namespace

TEST_CASE("mle picks the stagewise likelihood maximizer with ties to the lowest index") {
  const int S = 3, A = 2, H = 2;
  // Candidate 0 concentrates on state 1, candidate 1 on state 2.
  ModelClass models = ModelClass::from_list({point_model(S, A, H, 1), point_model(S, A, H, 2)});

  StageDataset data(H);
  // Stage 0 observations land on state 2 -> candidate 1 wins there.
  data.data[0].push_back({0, 0, 2});
  data.data[0].push_back({0, 1, 2});
  // Stage 1 observations land on state 1 -> candidate 0 wins there.
  data.data[1].push_back({2, 0, 1});

  const std::vector<int> idx = mle_fit(data, models);
  REQUIRE(idx.size() == 2);
  CHECK(idx[0] == 1);
  CHECK(idx[1] == 0);

  // Identical candidates tie; the lowest index must win.
  ModelClass tied = ModelClass::from_list({point_model(S, A, H, 1), point_model(S, A, H, 1)});
  const std::vector<int> t = mle_fit(data, tied);
  CHECK(t[0] == 0);
  CHECK(t[1] == 0);

  // Empty stages default to index 0.
  StageDataset empty(H);
  const std::vector<int> e = mle_fit(empty, models);
  CHECK(e[0] == 0);
  CHECK(e[1] == 0);
}

TEST_CASE("mle agrees with a brute force log likelihood recomputation") {
  CounterRng rng(410);
  const int S = 4, A = 3, H = 3, K = 5;
  std::vector<FiniteModel> cands;
  for (int i = 0; i < K; ++i) cands.push_back(random_model(rng, S, A, H));
  ModelClass models = ModelClass::from_list(cands);

  StageDataset data(H);
  for (int n = 0; n < 60; ++n)
    for (int h = 0; h < H; ++h)
      data.data[h].push_back(
          {rng.uniform_int(S), rng.uniform_int(A), rng.uniform_int(S)});

  const std::vector<int> idx = mle_fit(data, models);
  for (int h = 0; h < H; ++h) {
    double best = -1e300;
    int arg = 0;
    for (int i = 0; i < K; ++i) {
      double ll = 0.0;
      for (const StageTuple& t : data.data[h]) {
        const FiniteModel& m = models.candidates[i];
        ll += std::log(m.stage(h)(m.row(t.s, t.a), t.s_next));
      }
      if (ll > best) {
        best = ll;
        arg = i;
      }
    }
    CHECK(idx[h] == arg);
  }
}

TEST_CASE("empirical squared l1 distance matches a direct recomputation") {
  CounterRng rng(411);
  const int S = 4, A = 2, H = 2;
  const FiniteModel m1 = random_model(rng, S, A, H);
  const FiniteModel m2 = random_model(rng, S, A, H);

  StageDataset data(H);
  for (int n = 0; n < 25; ++n)
    data.data[1].push_back({rng.uniform_int(S), rng.uniform_int(A), rng.uniform_int(S)});

  double acc = 0.0;
  for (const StageTuple& t : data.data[1]) {
    double l1 = 0.0;
    for (int c = 0; c < S; ++c)
      l1 += std::abs(m1.stage(1)(m1.row(t.s, t.a), c) - m2.stage(1)(m2.row(t.s, t.a), c));
    acc += l1 * l1;
  }
  acc /= data.data[1].size();

  CHECK(std::abs(l1_sq_empirical(data, 1, m1, m2) - acc) <= 1e-12);
  CHECK(l1_sq_empirical(data, 0, m1, m2) == 0.0);  // empty stage
  CHECK(l1_sq_empirical(data, 1, m1, m1) == 0.0);  // identical models
  CHECK_THROWS_AS(l1_sq_empirical(data, 2, m1, m2), ConfigError);
  CHECK_THROWS_AS(l1_sq_empirical(data, -1, m1, m2), ConfigError);
}

TEST_CASE("confidence radius matches its closed form and shrinks like 1/t") {
  const int t = 7, T = 500, H = 4, n_theta = 12, n_upsilon = 3;
  const double delta = 0.05, c = 2.5;
  const double expect =
      c * std::log(static_cast<double>(T) * H * n_upsilon * n_theta / delta) / t;
  CHECK(std::abs(lowrank_radius(t, T, H, n_theta, n_upsilon, delta, c) - expect) <=
        1e-15 * std::abs(expect));

  // Exact 1/t scaling and monotonicity in the class sizes.
  const double r1 = lowrank_radius(1, T, H, n_theta, n_upsilon, delta, c);
  for (int tt = 2; tt <= 40; ++tt) {
    const double rt = lowrank_radius(tt, T, H, n_theta, n_upsilon, delta, c);
    CHECK(std::abs(rt - r1 / tt) <= 1e-12 * r1);
  }
  CHECK(lowrank_radius(t, T, H, 2 * n_theta, n_upsilon, delta, c) >
        lowrank_radius(t, T, H, n_theta, n_upsilon, delta, c));
  CHECK(lowrank_radius(t, T, H, n_theta, 2 * n_upsilon, delta, c) >
        lowrank_radius(t, T, H, n_theta, n_upsilon, delta, c));
  CHECK(lowrank_radius(t, T, H, n_theta, n_upsilon, delta / 10, c) >
        lowrank_radius(t, T, H, n_theta, n_upsilon, delta, c));

  CHECK_THROWS_AS(lowrank_radius(0, T, H, n_theta, n_upsilon, delta, c), ConfigError);
  CHECK_THROWS_AS(lowrank_radius(t, 0, H, n_theta, n_upsilon, delta, c), ConfigError);
  CHECK_THROWS_AS(lowrank_radius(t, T, 0, n_theta, n_upsilon, delta, c), ConfigError);
  CHECK_THROWS_AS(lowrank_radius(t, T, H, 0, n_upsilon, delta, c), ConfigError);
  CHECK_THROWS_AS(lowrank_radius(t, T, H, n_theta, 0, delta, c), ConfigError);
  CHECK_THROWS_AS(lowrank_radius(t, T, H, n_theta, n_upsilon, 1.5, c), ConfigError);
  CHECK_THROWS_AS(lowrank_radius(t, T, H, n_theta, n_upsilon, 0.0, c), ConfigError);
  CHECK_THROWS_AS(lowrank_radius(t, T, H, n_theta, n_upsilon, delta, 0.0), ConfigError);
}

TEST_CASE("confidence sets contain the mle, grow with the radius, and saturate") {
  CounterRng rng(412);
  const int S = 3, A = 2, H = 3, K = 6;
  std::vector<FiniteModel> cands;
  for (int i = 0; i < K; ++i) cands.push_back(random_model(rng, S, A, H));
  ModelClass models = ModelClass::from_list(cands);

  StageDataset data(H);
  const StagePolicy pol = StagePolicy::uniform(S, A, H);
  for (int ep = 0; ep < 30; ++ep)
    collect_augmented_tuples(models.candidates[2], pol, rng.fork(ep), &data);

  const std::vector<int> mle = mle_fit(data, models);
  const double radii[] = {0.0, 0.02, 0.3, 2.0, 100.0};
  std::vector<std::vector<std::vector<int>>> sets;
  for (double R : radii) sets.push_back(confidence_members(models, data, mle, R));

  for (size_t k = 0; k < sets.size(); ++k) {
    for (int h = 0; h < H; ++h) {
      // MLE index is always a member.
      bool has_mle = false;
      for (int i : sets[k][h]) has_mle |= (i == mle[h]);
      CHECK(has_mle);
      // Nesting: every member at radius k stays a member at radius k+1.
      if (k + 1 < sets.size()) {
        for (int i : sets[k][h]) {
          bool still = false;
          for (int j : sets[k + 1][h]) still |= (j == i);
          CHECK(still);
        }
      }
    }
  }
  // Any l1 distance squared is at most 4, so R = 100 keeps everyone.
  for (int h = 0; h < H; ++h) CHECK(static_cast<int>(sets.back()[h].size()) == K);

  // Membership agrees with the definition.
  const double R = 0.3;
  const auto members = confidence_members(models, data, mle, R);
  for (int h = 0; h < H; ++h)
    for (int i = 0; i < K; ++i) {
      const bool in =
          l1_sq_empirical(data, h, models.candidates[i], models.candidates[mle[h]]) <= R;
      bool listed = false;
      for (int j : members[h]) listed |= (j == i);
      CHECK(listed == in);
    }

  CHECK_THROWS_AS(confidence_members(models, data, mle, -1.0), ConfigError);
  CHECK_THROWS_AS(confidence_members(models, data, {0}, 1.0), ConfigError);
}

TEST_CASE("augmented collection adds one tuple per stage with the right law") {
  CounterRng rng(413);
  const int S = 3, A = 3, H = 3;
  const FiniteModel truth = random_model(rng, S, A, H, 1);
  const StagePolicy pol = StagePolicy::uniform(S, A, H);

  StageDataset data(H);
  collect_augmented_tuples(truth, pol, CounterRng(77), &data);
  for (int h = 0; h < H; ++h) CHECK(static_cast<int>(data.data[h].size()) == 1);

  // Purity: the same seed reproduces the same tuples.
  StageDataset again(H);
  collect_augmented_tuples(truth, pol, CounterRng(77), &again);
  for (int h = 0; h < H; ++h) {
    CHECK(data.data[h][0].s == again.data[h][0].s);
    CHECK(data.data[h][0].a == again.data[h][0].a);
    CHECK(data.data[h][0].s_next == again.data[h][0].s_next);
  }

  // Horizon mismatch is rejected.
  StageDataset wrong(H + 1);
  CHECK_THROWS_AS(collect_augmented_tuples(truth, pol, CounterRng(1), &wrong), ConfigError);

  // Law at stage 0: s is the initial state, a is uniform, s_next follows the
  // stage tensor row. Estimate frequencies over many independent episodes.
  const int N = 30000;
  StageDataset big(H);
  for (int ep = 0; ep < N; ++ep)
    collect_augmented_tuples(truth, pol, CounterRng(500).fork(ep), &big);

  Eigen::VectorXd a_freq = Eigen::VectorXd::Zero(A);
  Mat next_counts = Mat::Zero(A, S);
  for (const StageTuple& t : big.data[0]) {
    CHECK(t.s == truth.initial_state);
    a_freq[t.a] += 1.0;
    next_counts(t.a, t.s_next) += 1.0;
  }
  for (int a = 0; a < A; ++a) {
    CHECK(std::abs(a_freq[a] / N - 1.0 / A) <= 0.02);
    const Eigen::RowVectorXd emp = next_counts.row(a) / a_freq[a];
    const Eigen::RowVectorXd want = truth.stage(0).row(truth.row(truth.initial_state, a));
    CHECK((emp - want).cwiseAbs().maxCoeff() <= 0.03);
  }

  // Law at stage 1: s is one policy step from the initial state under the
  // uniform policy, i.e. distributed as the action-averaged first row block.
  Eigen::RowVectorXd s1_want = Eigen::RowVectorXd::Zero(S);
  for (int a = 0; a < A; ++a)
    s1_want += truth.stage(0).row(truth.row(truth.initial_state, a)) / A;
  Eigen::RowVectorXd s1_emp = Eigen::RowVectorXd::Zero(S);
  for (const StageTuple& t : big.data[1]) s1_emp[t.s] += 1.0;
  s1_emp /= N;
  CHECK((s1_emp - s1_want).cwiseAbs().maxCoeff() <= 0.02);
}

TEST_CASE("factored classes materialize the product of their factor pairs") {
  const int S = 2, A = 2, H = 2, k = 2;
  // phi rows are probability weights over k latent slots; mu rows are
  // probability vectors over S, so every product row is stochastic.
  Mat phiA(S * A, k), phiB(S * A, k);
  phiA << 1.0, 0.0, 0.3, 0.7, 0.5, 0.5, 0.0, 1.0;
  phiB << 0.2, 0.8, 0.9, 0.1, 0.6, 0.4, 0.25, 0.75;
  Mat muA(k, S), muB(k, S);
  muA << 0.5, 0.5, 0.1, 0.9;
  muB << 1.0, 0.0, 0.3, 0.7;

  const std::vector<std::vector<Mat>> phis = {{phiA, phiA}, {phiB, phiB}};
  const std::vector<std::vector<Mat>> mus = {{muA, muA}, {muB, muB}};
  const ModelClass c = ModelClass::from_factors(phis, mus, S, A, H, 0);

  CHECK(c.theta_count == 2);
  CHECK(c.upsilon_count == 2);
  REQUIRE(c.size() == 4);
  // Candidate order is (phi index, mu index) row major.
  const Mat products[4] = {phiA * muA, phiA * muB, phiB * muA, phiB * muB};
  for (int i = 0; i < 4; ++i)
    for (int h = 0; h < H; ++h)
      CHECK((c.candidates[i].stage(h) - products[i]).cwiseAbs().maxCoeff() <= 1e-15);

  // A factor pair whose product rows are not stochastic is rejected.
  Mat bad_mu(k, S);
  bad_mu << 0.9, 0.3, 0.1, 0.9;  // first row sums to 1.2
  CHECK_THROWS_AS(
      ModelClass::from_factors(phis, {{bad_mu, bad_mu}}, S, A, H, 0), ConfigError);
  // Wrong stage count is rejected.
  CHECK_THROWS_AS(ModelClass::from_factors({{phiA}}, mus, S, A, H, 0), ConfigError);
}

TEST_CASE("flat lists and validation enforce the class invariants") {
  CounterRng rng(414);
  const FiniteModel m = random_model(rng, 3, 2, 2);
  const ModelClass c = ModelClass::from_list({m, m, m});
  CHECK(c.theta_count == 3);
  CHECK(c.upsilon_count == 1);
  CHECK(c.size() == 3);

  CHECK_THROWS_AS(ModelClass::from_list({}), ConfigError);

  ModelClass mixed;
  mixed.candidates = {m, random_model(rng, 4, 2, 2)};  // different S
  mixed.theta_count = 2;
  CHECK_THROWS_AS(mixed.validate(), ConfigError);

  ModelClass other;
  FiniteModel shifted = m;
  shifted.initial_state = 1;
  other.candidates = {m, shifted};
  other.theta_count = 2;
  CHECK_THROWS_AS(other.validate(), ConfigError);

  ModelClass bad_counts;
  bad_counts.candidates = {m};
  bad_counts.theta_count = 0;
  CHECK_THROWS_AS(bad_counts.validate(), ConfigError);
}
