#include "scrn/rl/algorithms.hpp"

#include <cmath>
#include <functional>
#include <utility>

namespace scrn::rl {

void SpgConfig::validate() const {
  if (m < 1) throw Error(ErrorCode::BadSpec, "m must be >= 1");
  if (max_iters < 0) throw Error(ErrorCode::BadSpec, "max_iters must be >= 0");
  if (!(schedule.a > 0) || !(schedule.b > 0) || schedule.period < 1) {
    throw Error(ErrorCode::BadSpec, "step schedule needs a > 0, b > 0, period >= 1");
  }
  if (!(entropy_coef >= 0)) throw Error(ErrorCode::BadSpec, "entropy_coef must be >= 0");
}

ScrnConfig rl_scrn_defaults() {
  ScrnConfig c;
  c.n1 = 16;
  c.n2 = 16;
  ExactOptions opts;
  opts.dim_cap = 1024;
  c.subsolver = ExactSubsolver{opts};
  return c;
}

void ScrnRlConfig::validate() const { base.validate(); }

void IsVrConfig::validate() const { vr.validate(); }

Vec solve_on_support(const Vec& g, const Mat& h, double m_penalty, const Subsolver& solver, Rng& rng) {
  const Eigen::Index dim = g.size();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (g(i) != 0 || !h.col(i).isZero(0)) idx.push_back(i);
  }
  Vec delta = Vec::Zero(dim);
  if (idx.empty()) return delta;
  const auto k = static_cast<Eigen::Index>(idx.size());
  Vec gs(k);
  Mat hs(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    gs(a) = g(idx[a]);
    for (Eigen::Index b = 0; b < k; ++b) hs(a, b) = h(idx[a], idx[b]);
  }
  const CubicModel<double> model(std::move(gs), SymMat::symmetrized(hs), m_penalty);
  const auto sol = solve_subproblem(model, solver, rng);
  for (Eigen::Index a = 0; a < k; ++a) delta(idx[a]) = sol.delta(a);
  return delta;
}

namespace {

struct BatchStats {
  std::uint64_t episodes = 0;
  std::uint64_t state_actions = 0;
  double reward = 0;
  double length = 0;
  double successes = 0;

  void add(const std::vector<Trajectory>& trajs) {
    for (const auto& tr : trajs) {
      ++episodes;
      state_actions += tr.length();
      reward += tr.total_reward();
      length += static_cast<double>(tr.length());
      successes += tr.reached_goal ? 1.0 : 0.0;
    }
  }
};

/// Counters, stopping checks and row bookkeeping shared by the RL loops.
class RlTracker {
 public:
  RlTracker(long max_iters, std::optional<std::uint64_t> budget, const Vec& theta0)
      : max_iters_(max_iters), budget_(budget) {
    record_.theta_final = theta0;
  }

  bool should_stop(long t) {
    if (budget_ && episodes_ >= *budget_) {
      record_.status = RunStatus::BudgetExhausted;
      return true;
    }
    if (t >= max_iters_) {
      record_.status = RunStatus::MaxIters;
      return true;
    }
    return false;
  }

  std::uint64_t episodes() const { return episodes_; }

  void push(long t, const BatchStats& stats, double step_norm, bool rejected, const Vec& theta) {
    episodes_ += stats.episodes;
    state_actions_ += stats.state_actions;
    RlRow row;
    row.t = t + 1;
    row.episodes = episodes_;
    row.state_actions = state_actions_;
    const double n = static_cast<double>(stats.episodes);
    row.mean_return = stats.reward / n;
    row.mean_length = stats.length / n;
    row.success_rate = stats.successes / n;
    row.step_norm = step_norm;
    row.rejected = rejected;
    if (rejected) ++record_.rejected_count;
    record_.rows.push_back(row);
    record_.theta_final = theta;
  }

  void abort_non_finite() { record_.status = RunStatus::NonFinite; }

  RlRunRecord take() { return std::move(record_); }

 private:
  long max_iters_;
  std::optional<std::uint64_t> budget_;
  std::uint64_t episodes_ = 0;
  std::uint64_t state_actions_ = 0;
  RlRunRecord record_;
};

void check_shapes(const TabularMdp& mdp, const SoftmaxPolicy& policy) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw Error(ErrorCode::DimMismatch, "policy shape does not match MDP");
  }
}

struct Derivatives {
  Vec grad;  // of J
  Mat hess;  // of J, symmetrized
};

/// Shared cubic loop for SCRN and IS-VR. `estimate(t, policy, prev_policy,
/// stats)` returns estimates of ∇J and ∇²J at the current policy.
using RlEstimator = std::function<Derivatives(long, const SoftmaxPolicy&, const SoftmaxPolicy&, BatchStats&)>;

RlRunRecord cubic_rl_loop(const TabularMdp& mdp, const SoftmaxPolicy& policy0, const ScrnConfig& base,
                          std::optional<std::uint64_t> budget, Rng& rng, const RlEstimator& estimate) {
  check_shapes(mdp, policy0);
  SoftmaxPolicy policy = policy0;
  SoftmaxPolicy prev = policy0;
  RlTracker tracker(base.max_iters, budget, policy.theta());
  for (long t = 0; !tracker.should_stop(t); ++t) {
    BatchStats stats;
    Vec delta;
    try {
      const Derivatives d = estimate(t, policy, prev, stats);
      delta = solve_on_support(-d.grad, -d.hess, base.m_penalty, base.subsolver, rng);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      tracker.abort_non_finite();
      break;
    }
    const double norm = delta.norm();
    const bool rejected = base.delta_reject_threshold && norm > *base.delta_reject_threshold;
    prev = policy;
    if (!rejected) policy.set_theta(policy.theta() + delta);
    tracker.push(t, stats, norm, rejected, policy.theta());
  }
  return tracker.take();
}

}  // namespace

RlRunRecord spg_run(const TabularMdp& mdp, const SoftmaxPolicy& policy0, const SpgConfig& config, Rng& rng) {
  config.validate();
  check_shapes(mdp, policy0);
  SoftmaxPolicy policy = policy0;
  RlTracker tracker(config.max_iters, config.episode_budget, policy.theta());
  const Weighting weighting = config.variant == PgVariant::Spg ? Weighting::Gpomdp : Weighting::Reinforce;
  for (long t = 0; !tracker.should_stop(t); ++t) {
    const auto trajs = sample_batch(mdp, policy, config.m, rng);
    BatchStats stats;
    stats.add(trajs);
    Vec direction;
    try {
      direction = batch_estimate(policy, trajs, mdp.discount(), false, weighting).grad;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      tracker.abort_non_finite();
      break;
    }
    if (config.entropy_coef > 0) {
      Vec ent = Vec::Zero(direction.size());
      for (const auto& tr : trajs) {
        for (const auto& st : tr.steps) ent.segment(policy.index(st.state, 0), mdp.n_actions()) += policy.entropy_grad(st.state);
      }
      direction += config.entropy_coef / static_cast<double>(config.m) * ent;
    }
    const double eta = config.schedule.at(static_cast<long>(tracker.episodes()));
    const Vec step = eta * direction;
    if (!step.allFinite()) {
      tracker.abort_non_finite();
      break;
    }
    policy.set_theta(policy.theta() + step);
    tracker.push(t, stats, step.norm(), false, policy.theta());
  }
  return tracker.take();
}

RlRunRecord scrn_rl_run(const TabularMdp& mdp, const SoftmaxPolicy& policy0, const ScrnRlConfig& config, Rng& rng) {
  config.validate();
  const double gamma = mdp.discount();
  return cubic_rl_loop(mdp, policy0, config.base, config.episode_budget, rng,
                       [&](long, const SoftmaxPolicy& policy, const SoftmaxPolicy&, BatchStats& stats) {
                         const auto gtrajs = sample_batch(mdp, policy, config.base.n1, rng);
                         stats.add(gtrajs);
                         if (config.shared_batch) {
                           const auto est = batch_estimate(policy, gtrajs, gamma, true);
                           return Derivatives{est.grad, est.hess.matrix()};
                         }
                         const auto htrajs = sample_batch(mdp, policy, config.base.n2, rng);
                         stats.add(htrajs);
                         Derivatives d;
                         d.grad = batch_estimate(policy, gtrajs, gamma, false).grad;
                         d.hess = batch_estimate(policy, htrajs, gamma, true).hess.matrix();
                         return d;
                       });
}

RlRunRecord isvr_scrn_rl_run(const TabularMdp& mdp, const SoftmaxPolicy& policy0, const IsVrConfig& config,
                             Rng& rng) {
  config.validate();
  const double gamma = mdp.discount();
  const long period = config.vr.period;
  Vec v;
  Mat u;
  return cubic_rl_loop(
      mdp, policy0, config.vr.base, config.episode_budget, rng,
      [&](long t, const SoftmaxPolicy& policy, const SoftmaxPolicy& prev, BatchStats& stats) {
        const double step = (policy.theta() - prev.theta()).norm();
        const VrBatch batch = vr_batch(config.vr, t, step, policy.theta().size());
        const auto gtrajs = sample_batch(mdp, policy, batch.grad, rng);
        const auto htrajs = sample_batch(mdp, policy, batch.hess, rng);
        stats.add(gtrajs);
        stats.add(htrajs);
        if (t % period == 0) {
          v = batch_estimate(policy, gtrajs, gamma, false).grad;
          u = batch_estimate(policy, htrajs, gamma, true).hess.matrix();
        } else {
          Vec dv = Vec::Zero(v.size());
          for (const auto& tr : gtrajs) {
            const double w = importance_weight(tr, prev, policy);
            dv += trajectory_gradient(policy, tr, gamma) - w * trajectory_gradient(prev, tr, gamma);
          }
          Mat du = Mat::Zero(u.rows(), u.cols());
          for (const auto& tr : htrajs) {
            const double w = importance_weight(tr, prev, policy);
            du += trajectory_hessian(policy, tr, gamma) - w * trajectory_hessian(prev, tr, gamma);
          }
          v += dv / static_cast<double>(gtrajs.size());
          u += (du + du.transpose()) / (2.0 * static_cast<double>(htrajs.size()));
          if (!v.allFinite() || !u.allFinite()) throw Error(ErrorCode::NonFinite, "variance-reduced estimate");
        }
        return Derivatives{v, u};
      });
}

PolicyEvaluation evaluate_policy(const TabularMdp& mdp, const SoftmaxPolicy& policy, long episodes, Rng& rng) {
  if (episodes < 1) throw Error(ErrorCode::BadSpec, "episodes must be >= 1");
  PolicyEvaluation out;
  for (long i = 0; i < episodes; ++i) {
    const Trajectory tr = sample_trajectory(mdp, policy, rng);
    out.success_rate += tr.reached_goal ? 1.0 : 0.0;
    out.mean_return += tr.total_reward();
    out.mean_length += static_cast<double>(tr.length());
  }
  const double n = static_cast<double>(episodes);
  out.success_rate /= n;
  out.mean_return /= n;
  out.mean_length /= n;
  return out;
}

}  // namespace scrn::rl
