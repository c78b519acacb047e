#include "ccmdp/knr.hpp"

#include <cmath>

#include "ccmdp/errors.hpp"

namespace ccmdp {

KnrFeatures KnrFeatures::identity(int state_dim, int num_actions) {
  if (state_dim <= 0 || num_actions <= 0)
    throw ConfigError("KnrFeatures::identity: dimensions must be positive");
  KnrFeatures f;
  f.d_phi = state_dim + num_actions + 1;
  f.eval = [state_dim, num_actions, d = f.d_phi](const Vec& s, int a) {
    Vec phi = Vec::Zero(d);
    phi.head(state_dim) = s;
    phi[state_dim + a] = 1.0;
    phi[d - 1] = 1.0;
    const double n = phi.norm();
    if (n > 1.0) phi /= n;
    return phi;
  };
  return f;
}

KnrFeatures KnrFeatures::random_projection(int state_dim, int num_actions, int d_phi,
                                           std::uint64_t seed) {
  if (d_phi <= 0) throw ConfigError("KnrFeatures::random_projection: d_phi must be positive");
  const KnrFeatures base = identity(state_dim, num_actions);
  Mat proj(d_phi, base.d_phi);
  CounterRng rng(seed);
  for (int r = 0; r < d_phi; ++r)
    for (int c = 0; c < base.d_phi; ++c) proj(r, c) = rng.normal() / std::sqrt(d_phi);
  KnrFeatures f;
  f.d_phi = d_phi;
  f.eval = [proj, base](const Vec& s, int a) {
    Vec phi = proj * base.eval(s, a);
    const double n = phi.norm();
    if (n > 1.0) phi /= n;
    return phi;
  };
  return f;
}

Vec knr_sample_step(const KnrModel& model, const Vec& s, int a, CounterRng& rng) {
  Vec next = model.W * model.phi.eval(s, a);
  if (model.sigma > 0.0)
    for (Eigen::Index i = 0; i < next.size(); ++i) next[i] += model.sigma * rng.normal();
  return next;
}

KnrTrajectory knr_rollout(const KnrModel& model, const KnrPolicy& policy, CounterRng rng) {
  KnrTrajectory traj;
  traj.states.reserve(model.H + 1);
  traj.actions.reserve(model.H);
  Vec s = model.initial_state;
  for (int h = 0; h < model.H; ++h) {
    CounterRng stage_rng = rng.fork(h);
    const int a = policy(h, s);
    traj.states.push_back(s);
    traj.actions.push_back(a);
    s = knr_sample_step(model, s, a, stage_rng);
  }
  traj.states.push_back(s);
  return traj;
}

void append_transitions(const KnrModel& model, const KnrTrajectory& traj, KnrDataset* data) {
  for (int h = 0; h < model.H; ++h)
    data->emplace_back(model.phi.eval(traj.states[h], traj.actions[h]), traj.states[h + 1]);
}

KnrEstimate ridge_fit(const KnrDataset& data, int d_state, int d_phi, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("ridge_fit: lambda must be > 0");
  KnrEstimate est;
  est.lambda = lambda;
  est.Lambda = lambda * Mat::Identity(d_phi, d_phi);
  Mat cross = Mat::Zero(d_state, d_phi);  // sum s' phi^T
  for (const auto& [phi, s_next] : data) {
    if (phi.size() != d_phi || s_next.size() != d_state)
      throw ConfigError("ridge_fit: sample dimension mismatch");
    est.Lambda.noalias() += phi * phi.transpose();
    cross.noalias() += s_next * phi.transpose();
  }
  est.What = est.Lambda.llt().solve(cross.transpose()).transpose();
  est.n = static_cast<int>(data.size());
  return est;
}

double knr_radius(int t, int d_state, double lambda, double sigma, double delta,
                  double det_ratio) {
  if (t < 1) throw ConfigError("knr_radius: t must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("knr_radius: delta must be in (0,1)");
  if (!(det_ratio >= 1.0 - 1e-12)) throw ConfigError("knr_radius: det_ratio must be >= 1");
  if (!(lambda > 0.0)) throw ConfigError("knr_radius: lambda must be > 0");
  if (sigma < 0.0) throw ConfigError("knr_radius: sigma must be >= 0");
  constexpr double kPiSq = 9.869604401089358;
  const double td = static_cast<double>(t);
  return 2.0 * lambda +
         8.0 * sigma * sigma *
             (d_state * std::log(5.0) + 2.0 * std::log(td) + std::log(4.0) +
              std::log(det_ratio * kPiSq * td * td / (3.0 * delta)));
}

double spectral_ellipsoid_stat(const KnrEstimate& est, const Mat& W) {
  const Mat diff = W - est.What;
  // ||M Lambda^{1/2}||_2^2 = lambda_max(M Lambda M^T).
  const Mat m = diff * est.Lambda * diff.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  return eig.eigenvalues().maxCoeff();
}

double exploration_bonus(const KnrEstimate& est, const Vec& phi_sa, double per_step_cost_bound) {
  if (est.R < 0.0) throw ConfigError("exploration_bonus: negative radius");
  if (est.R == 0.0) return 0.0;
  const double wnorm2 = phi_sa.dot(est.Lambda.llt().solve(phi_sa));
  if (wnorm2 <= 0.0) return 0.0;
  double tv;
  if (est.sigma == 0.0) {
    tv = 2.0;
  } else {
    tv = std::min(est.kappa * 2.0 * std::sqrt(est.R * wnorm2) / est.sigma, 2.0);
  }
  return tv * per_step_cost_bound;
}

double gaussian_chi_square(const Vec& mu1, const Vec& mu2, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian_chi_square: sigma must be > 0");
  const double d2 = (mu1 - mu2).squaredNorm();
  return std::exp(d2 / (sigma * sigma)) - 1.0;
}

Vec knr_monte_carlo_embedding(const KnrModel& model, const KnrObjectiveFeatures& features,
                              const KnrPolicy& policy, int n, std::uint64_t seed) {
  if (n <= 0) throw ConfigError("knr_monte_carlo_embedding: n must be positive");
  Vec acc = Vec::Zero(static_cast<Eigen::Index>(model.H) * features.d);
  CounterRng root(seed);
  for (int e = 0; e < n; ++e) {
    const KnrTrajectory traj = knr_rollout(model, policy, root.fork(e));
    for (int h = 0; h < model.H; ++h)
      acc.segment(static_cast<Eigen::Index>(h) * features.d, features.d) +=
          features.eval(h, traj.states[h], traj.actions[h]);
  }
  return acc / n;
}

}  // namespace ccmdp
