#include "ccmdp/planner.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "ccmdp/errors.hpp"

namespace ccmdp {

std::vector<Vec> make_cost_tables(const TabularFeatureMap& features, const Vec& theta, int S,
                                  int A, int H) {
  if (theta.size() != static_cast<Eigen::Index>(H) * features.d)
    throw ConfigError("make_cost_tables: theta size must be H*d");
  std::vector<Vec> cost(H);
  for (int h = 0; h < H; ++h)
    cost[h] = features.stage(h) * theta.segment(static_cast<Eigen::Index>(h) * features.d,
                                                features.d);
  for (int h = 0; h < H; ++h)
    if (cost[h].size() != static_cast<Eigen::Index>(S) * A)
      throw ConfigError("make_cost_tables: feature table shape mismatch");
  return cost;
}

namespace {

// Backward pass over explicit per-(h,s,a) successor rows supplied by `next`.
template <typename NextRow>
ValueIterationResult backward_induction(int S, int A, int H, int initial_state,
                                        const std::vector<Vec>& cost, NextRow&& next_value) {
  ValueIterationResult res;
  res.V = Mat::Zero(H + 1, S);
  res.Q.assign(H, Vec::Zero(S * A));
  std::vector<std::vector<int>> actions(H, std::vector<int>(S, 0));
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      double best = std::numeric_limits<double>::infinity();
      int best_a = 0;
      for (int a = 0; a < A; ++a) {
        const double q = cost[h][s * A + a] + next_value(h, s, a, res.V.row(h + 1));
        res.Q[h][s * A + a] = q;
        if (q < best) {
          best = q;
          best_a = a;
        }
      }
      res.V(h, s) = best;
      actions[h][s] = best_a;
    }
  }
  res.greedy = StagePolicy::deterministic(actions, S, A);
  res.V1 = res.V(0, initial_state);
  return res;
}

}  // namespace

ValueIterationResult value_iteration(const FiniteModel& model, const std::vector<Vec>& cost) {
  if (static_cast<int>(cost.size()) != model.H)
    throw ConfigError("value_iteration: cost table horizon mismatch");
  return backward_induction(
      model.S, model.A, model.H, model.initial_state, cost,
      [&model](int h, int s, int a, const Eigen::Ref<const Eigen::RowVectorXd>& v_next) {
        if (h + 1 >= model.H) return 0.0;  // transitions beyond the horizon do not score
        return model.stage(h).row(model.row(s, a)).dot(v_next);
      });
}

Mat policy_evaluation(const FiniteModel& model, const std::vector<Vec>& cost,
                      const StagePolicy& policy) {
  Mat V = Mat::Zero(model.H + 1, model.S);
  for (int h = model.H - 1; h >= 0; --h) {
    for (int s = 0; s < model.S; ++s) {
      double v = 0.0;
      for (int a = 0; a < model.A; ++a) {
        const double p = policy.probs[h](s, a);
        if (p == 0.0) continue;
        double q = cost[h][s * model.A + a];
        if (h + 1 < model.H) q += model.stage(h).row(model.row(s, a)).dot(V.row(h + 1));
        v += p * q;
      }
      V(h, s) = v;
    }
  }
  return V;
}

PlanResult plan_known_model(const FiniteModel& model, const TabularFeatureMap& features,
                            const Vec& theta) {
  const std::vector<Vec> cost = make_cost_tables(features, theta, model.S, model.A, model.H);
  const ValueIterationResult vi = value_iteration(model, cost);
  PlanResult res;
  res.policy = vi.greedy;
  res.V1 = vi.V1;
  res.psi = exact_embedding(model, features, vi.greedy);
  res.model_id = 0;
  return res;
}

PlanResult optimistic_plan_lowrank(const ModelClass& models,
                                   const std::vector<std::vector<int>>& members,
                                   const TabularFeatureMap& features, const Vec& theta,
                                   LowRankPlanMode mode, long long budget) {
  models.validate();
  const FiniteModel& shape = models.candidates.front();
  const int S = shape.S, A = shape.A, H = shape.H;
  if (static_cast<int>(members.size()) != H)
    throw ConfigError("optimistic_plan_lowrank: member sets must cover H stages");
  for (const auto& m : members)
    if (m.empty()) throw ConfigError("optimistic_plan_lowrank: empty member set");
  const std::vector<Vec> cost = make_cost_tables(features, theta, S, A, H);

  if (mode == LowRankPlanMode::kFactored) {
    // Stage-mixed model assembled row-by-row from the per-backup argmin.
    FiniteModel mixed = shape;
    mixed.tensors.assign(H, Mat::Zero(S * A, S));
    for (int h = 0; h < H; ++h) mixed.tensors[h] = models.candidates[members[h].front()].stage(h);
    bool mixed_rows = false;
    ValueIterationResult vi = backward_induction(
        S, A, H, shape.initial_state, cost,
        [&](int h, int s, int a, const Eigen::Ref<const Eigen::RowVectorXd>& v_next) {
          if (h + 1 >= H) return 0.0;
          double best = std::numeric_limits<double>::infinity();
          int best_j = members[h].front();
          for (int j : members[h]) {
            const double v = models.candidates[j].stage(h).row(shape.row(s, a)).dot(v_next);
            if (v < best) {
              best = v;
              best_j = j;
            }
          }
          if (best_j != members[h].front()) mixed_rows = true;
          mixed.tensors[h].row(shape.row(s, a)) =
              models.candidates[best_j].stage(h).row(shape.row(s, a));
          return best;
        });
    PlanResult res;
    res.policy = vi.greedy;
    res.V1 = vi.V1;
    res.psi = exact_embedding(mixed, features, vi.greedy);
    res.model_id = mixed_rows ? -1 : members[0].front();
    if (!mixed_rows) {
      // All backups agreed per stage only if every member set was effectively
      // acting like its first element on visited rows; report the first
      // member combo as the id when the sets are singletons.
      for (int h = 0; h < H; ++h)
        if (members[h].size() > 1) res.model_id = -1;
    }
    return res;
  }

  // Enumeration over the transition stages 1..H-1 (the stage-H tensor never
  // affects values or occupancy).
  long long combos = 1;
  for (int h = 0; h + 1 < H; ++h) {
    combos *= static_cast<long long>(members[h].size());
    if (combos > budget) {
      std::ostringstream msg;
      msg << "optimistic_plan_lowrank: enumeration needs > " << budget << " combinations";
      throw NumericalError(msg.str());
    }
  }
  PlanResult best;
  best.V1 = std::numeric_limits<double>::infinity();
  std::vector<int> pick(std::max(H - 1, 0), 0);
  for (long long idx = 0; idx < combos; ++idx) {
    long long rem = idx;
    for (int h = 0; h + 1 < H; ++h) {
      pick[h] = members[h][rem % members[h].size()];
      rem /= static_cast<long long>(members[h].size());
    }
    FiniteModel candidate = shape;
    candidate.tensors.assign(H, shape.stage(0));
    for (int h = 0; h < H; ++h)
      candidate.tensors[h] =
          models.candidates[h + 1 < H ? pick[h] : members[h].front()].stage(h);
    const ValueIterationResult vi = value_iteration(candidate, cost);
    if (vi.V1 < best.V1 - 0.0) {
      best.policy = vi.greedy;
      best.V1 = vi.V1;
      best.psi = exact_embedding(candidate, features, vi.greedy);
      best.model_id = static_cast<int>(idx);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// State grid
// ---------------------------------------------------------------------------

int StateGrid::total_nodes() const {
  int n = 1;
  for (int k : nodes_per_dim) n *= k;
  return n;
}

void StateGrid::validate() const {
  if (dims() < 1 || dims() > 3)
    throw ConfigError("StateGrid: between 1 and 3 state dimensions supported");
  if (lo.size() != dims() || hi.size() != dims()) throw ConfigError("StateGrid: bound size mismatch");
  for (int d = 0; d < dims(); ++d) {
    if (nodes_per_dim[d] < 1) throw ConfigError("StateGrid: need at least one node per axis");
    if (nodes_per_dim[d] > 1 && !(hi[d] > lo[d]))
      throw ConfigError("StateGrid: upper bound must exceed lower bound");
  }
}

Vec StateGrid::node(int index) const {
  Vec x(dims());
  for (int d = 0; d < dims(); ++d) {
    const int k = index % nodes_per_dim[d];
    index /= nodes_per_dim[d];
    x[d] = nodes_per_dim[d] == 1 ? lo[d]
                                 : lo[d] + (hi[d] - lo[d]) * k / (nodes_per_dim[d] - 1);
  }
  return x;
}

int StateGrid::nearest(const Vec& x) const {
  int index = 0;
  int stride = 1;
  for (int d = 0; d < dims(); ++d) {
    int k = 0;
    if (nodes_per_dim[d] > 1) {
      const double step = (hi[d] - lo[d]) / (nodes_per_dim[d] - 1);
      k = static_cast<int>(std::lround((x[d] - lo[d]) / step));
      k = std::min(std::max(k, 0), nodes_per_dim[d] - 1);
    }
    index += stride * k;
    stride *= nodes_per_dim[d];
  }
  return index;
}

StateGrid StateGrid::centered(int dims, double extent, int nodes_per_axis) {
  StateGrid g;
  g.lo = Vec::Constant(dims, -extent);
  g.hi = Vec::Constant(dims, extent);
  g.nodes_per_dim.assign(dims, nodes_per_axis);
  g.validate();
  return g;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

DiscretizedKnr discretize_knr(const KnrModel& dynamics, const StateGrid& grid) {
  grid.validate();
  if (dynamics.initial_state.size() != grid.dims())
    throw ConfigError("discretize_knr: state dimension mismatch");
  const int N = grid.total_nodes();
  const int A = dynamics.num_actions;

  DiscretizedKnr out;
  out.model.S = N;
  out.model.A = A;
  out.model.H = dynamics.H;
  out.model.initial_state = grid.nearest(dynamics.initial_state);
  out.model.tensors.assign(1, Mat::Zero(N * A, N));
  Mat& P = out.model.tensors[0];

  // Per-axis node coordinates and midpoint cell boundaries.
  std::vector<std::vector<double>> axis_nodes(grid.dims());
  for (int d = 0; d < grid.dims(); ++d) {
    const int k = grid.nodes_per_dim[d];
    axis_nodes[d].resize(k);
    for (int i = 0; i < k; ++i)
      axis_nodes[d][i] = k == 1 ? grid.lo[d] : grid.lo[d] + (grid.hi[d] - grid.lo[d]) * i / (k - 1);
  }

  std::vector<double> axis_mass;
  for (int node = 0; node < N; ++node) {
    const Vec s = grid.node(node);
    for (int a = 0; a < A; ++a) {
      const Vec mean = dynamics.W * dynamics.phi.eval(s, a);
      if (dynamics.sigma == 0.0) {
        P(node * A + a, grid.nearest(mean)) = 1.0;
        double outside = 0.0;
        for (int d = 0; d < grid.dims(); ++d)
          if (mean[d] < grid.lo[d] - 1e-12 || mean[d] > grid.hi[d] + 1e-12) outside = 1.0;
        out.max_mass_outside = std::max(out.max_mass_outside, outside);
        continue;
      }
      // Row = tensor product of per-axis cell masses.
      double inside_extent = 1.0;
      std::vector<std::vector<double>> mass(grid.dims());
      for (int d = 0; d < grid.dims(); ++d) {
        const auto& nodes = axis_nodes[d];
        const int k = static_cast<int>(nodes.size());
        mass[d].resize(k);
        for (int i = 0; i < k; ++i) {
          const double left =
              i == 0 ? -std::numeric_limits<double>::infinity() : 0.5 * (nodes[i - 1] + nodes[i]);
          const double right =
              i + 1 == k ? std::numeric_limits<double>::infinity() : 0.5 * (nodes[i] + nodes[i + 1]);
          const double cl = std::isinf(left) ? 0.0 : normal_cdf((left - mean[d]) / dynamics.sigma);
          const double cr = std::isinf(right) ? 1.0 : normal_cdf((right - mean[d]) / dynamics.sigma);
          mass[d][i] = std::max(cr - cl, 0.0);
        }
        inside_extent *= normal_cdf((grid.hi[d] - mean[d]) / dynamics.sigma) -
                         normal_cdf((grid.lo[d] - mean[d]) / dynamics.sigma);
      }
      out.max_mass_outside = std::max(out.max_mass_outside, 1.0 - inside_extent);
      for (int nxt = 0; nxt < N; ++nxt) {
        int rem = nxt;
        double w = 1.0;
        for (int d = 0; d < grid.dims(); ++d) {
          w *= mass[d][rem % grid.nodes_per_dim[d]];
          rem /= grid.nodes_per_dim[d];
        }
        P(node * A + a, nxt) = w;
      }
      // Renormalize away floating residue so rows are exactly stochastic.
      const double sum = P.row(node * A + a).sum();
      if (sum > 0.0) P.row(node * A + a) /= sum;
    }
  }
  out.model.validate();
  return out;
}

KnrPlanResult optimistic_plan_knr(const KnrPlanInputs& in) {
  if (!in.estimate || !in.dynamics || !in.features || !in.grid)
    throw ConfigError("optimistic_plan_knr: missing inputs");
  const KnrModel& dyn = *in.dynamics;
  if (static_cast<int>(in.per_step_bound.size()) != dyn.H)
    throw ConfigError("optimistic_plan_knr: need one per-step bound per stage");

  const DiscretizedKnr disc = discretize_knr(dyn, *in.grid);
  const int N = disc.model.S;
  const int A = disc.model.A;

  // Optimistic cost on grid nodes: theta_h . psi_h(node, a) - bonus.
  std::vector<Vec> cost(dyn.H, Vec::Zero(N * A));
  const int d = in.features->d;
  if (in.theta.size() != static_cast<Eigen::Index>(dyn.H) * d)
    throw ConfigError("optimistic_plan_knr: theta size must be H*d");
  for (int node = 0; node < N; ++node) {
    const Vec s = in.grid->node(node);
    for (int a = 0; a < A; ++a) {
      const Vec phi = dyn.phi.eval(s, a);
      for (int h = 0; h < dyn.H; ++h) {
        const double base =
            in.theta.segment(static_cast<Eigen::Index>(h) * d, d).dot(in.features->eval(h, s, a));
        cost[h][node * A + a] = base - exploration_bonus(*in.estimate, phi, in.per_step_bound[h]);
      }
    }
  }

  const ValueIterationResult vi = value_iteration(disc.model, cost);

  KnrPlanResult res;
  res.grid_policy = vi.greedy;
  res.V1 = vi.V1;
  res.coarse_grid_warning = disc.max_mass_outside > 1e-3;
  const StateGrid grid = *in.grid;  // copy so the lambda owns its lookup data
  StagePolicy greedy = vi.greedy;
  res.policy = [grid, greedy](int h, const Vec& s) {
    int best = 0;
    greedy.probs[h].row(grid.nearest(s)).maxCoeff(&best);
    return best;
  };
  res.psi = knr_monte_carlo_embedding(dyn, *in.features, res.policy, in.mc_n, in.mc_seed);
  return res;
}

std::pair<double, double> value_difference_check(const FiniteModel& m1, const FiniteModel& m2,
                                                 const std::vector<Vec>& cost,
                                                 const StagePolicy& policy) {
  const Mat V1 = policy_evaluation(m1, cost, policy);
  const Mat V2 = policy_evaluation(m2, cost, policy);
  const double lhs = V1(0, m1.initial_state) - V2(0, m2.initial_state);

  const OccupancyMeasure occ2 = compute_occupancy(m2, policy);
  double rhs = 0.0;
  for (int h = 0; h + 1 < m1.H; ++h) {
    for (int s = 0; s < m1.S; ++s)
      for (int a = 0; a < m1.A; ++a) {
        const double w = occ2.d[h](s, a);
        if (w == 0.0) continue;
        rhs += w * (m1.stage(h).row(m1.row(s, a)) - m2.stage(h).row(m2.row(s, a)))
                       .dot(V1.row(h + 1));
      }
  }
  return {lhs, rhs};
}

}  // namespace ccmdp
