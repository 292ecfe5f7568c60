#include "scrn/rl/policy.hpp"

#include <cmath>
#include <random>

namespace scrn::rl {

SoftmaxPolicy::SoftmaxPolicy(int n_states, int n_actions)
    : SoftmaxPolicy(n_states, n_actions, Vec::Zero(static_cast<Eigen::Index>(n_states) * n_actions)) {}

SoftmaxPolicy::SoftmaxPolicy(int n_states, int n_actions, Vec theta)
    : n_states_(n_states), n_actions_(n_actions) {
  if (n_states < 1 || n_actions < 1) throw Error(ErrorCode::BadSpec, "policy needs states and actions");
  set_theta(std::move(theta));
}

void SoftmaxPolicy::set_theta(Vec theta) {
  if (theta.size() != static_cast<Eigen::Index>(n_states_) * n_actions_) {
    throw Error(ErrorCode::DimMismatch, "theta size must be n_states * n_actions");
  }
  if (!theta.allFinite()) throw Error(ErrorCode::NonFinite, "theta");
  theta_ = std::move(theta);
}

void SoftmaxPolicy::check_state(int s) const {
  if (s < 0 || s >= n_states_) throw Error(ErrorCode::IndexOutOfRange, "state index");
}

Vec SoftmaxPolicy::probs(int s) const {
  check_state(s);
  const auto block = theta_.segment(index(s, 0), n_actions_);
  Vec p = (block.array() - block.maxCoeff()).exp().matrix();
  return p / p.sum();
}

double SoftmaxPolicy::log_prob(int s, int a) const {
  check_state(s);
  if (a < 0 || a >= n_actions_) throw Error(ErrorCode::IndexOutOfRange, "action index");
  const auto block = theta_.segment(index(s, 0), n_actions_);
  const double mx = block.maxCoeff();
  return block(a) - mx - std::log((block.array() - mx).exp().sum());
}

double SoftmaxPolicy::entropy(int s) const {
  const Vec p = probs(s);
  double h = 0;
  for (Eigen::Index a = 0; a < p.size(); ++a) {
    if (p(a) > 0) h -= p(a) * std::log(p(a));
  }
  return h;
}

Vec SoftmaxPolicy::entropy_grad(int s) const {
  const Vec p = probs(s);
  const double h = entropy(s);
  Vec g(p.size());
  for (Eigen::Index a = 0; a < p.size(); ++a) g(a) = p(a) > 0 ? -p(a) * (std::log(p(a)) + h) : 0.0;
  return g;
}

std::pair<Vec, SymMat> score_and_hessian(const SoftmaxPolicy& policy, int s, int a) {
  if (a < 0 || a >= policy.n_actions()) throw Error(ErrorCode::IndexOutOfRange, "action index");
  const Vec p = policy.probs(s);
  const Eigen::Index dim = policy.theta().size();
  const Eigen::Index off = policy.index(s, 0);
  const Eigen::Index na = policy.n_actions();
  Vec g = Vec::Zero(dim);
  g.segment(off, na) = -p;
  g(off + a) += 1;
  Mat h = Mat::Zero(dim, dim);
  h.block(off, off, na, na) = p * p.transpose();
  h.block(off, off, na, na).diagonal() -= p;
  return {std::move(g), SymMat::symmetrized(h)};
}

double Trajectory::total_reward() const {
  double r = 0;
  for (const auto& st : steps) r += st.reward;
  return r;
}

double Trajectory::discounted_return(double discount) const {
  double r = 0;
  double w = 1;
  for (const auto& st : steps) {
    r += w * st.reward;
    w *= discount;
  }
  return r;
}

namespace {

int draw(const Vec& p, double u) {
  double acc = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    acc += p(i);
    if (u < acc) return static_cast<int>(i);
  }
  for (Eigen::Index i = p.size() - 1; i >= 0; --i) {
    if (p(i) > 0) return static_cast<int>(i);
  }
  return 0;
}

int draw_successor(const std::vector<std::pair<int, double>>& succ, double u) {
  double acc = 0;
  for (const auto& [next, p] : succ) {
    acc += p;
    if (u < acc) return next;
  }
  return succ.back().first;
}

// Ψ_h = Σ_{t≥h} γᵗ r_t for every step h.
std::vector<double> reward_to_go(const Trajectory& traj, double discount) {
  const std::size_t n = traj.steps.size();
  std::vector<double> disc(n);
  double w = 1;
  for (std::size_t t = 0; t < n; ++t) {
    disc[t] = w * traj.steps[t].reward;
    w *= discount;
  }
  std::vector<double> psi(n);
  double acc = 0;
  for (std::size_t t = n; t-- > 0;) {
    acc += disc[t];
    psi[t] = acc;
  }
  return psi;
}

void add_score(const SoftmaxPolicy& policy, int s, int a, double weight, Vec& out) {
  const Vec p = policy.probs(s);
  const Eigen::Index off = policy.index(s, 0);
  out.segment(off, p.size()) -= weight * p;
  out(off + a) += weight;
}

}  // namespace

Trajectory sample_trajectory(const TabularMdp& mdp, const SoftmaxPolicy& policy, Rng& rng) {
  if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
    throw Error(ErrorCode::DimMismatch, "policy shape does not match MDP");
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Trajectory traj;
  int s = draw(mdp.start_dist(), unif(rng));
  if (mdp.terminal(s)) return traj;
  traj.steps.reserve(static_cast<std::size_t>(mdp.horizon()));
  for (int h = 0; h < mdp.horizon(); ++h) {
    const int a = draw(policy.probs(s), unif(rng));
    traj.steps.push_back({s, a, mdp.reward(s, a)});
    const auto& succ = mdp.successors(s, a);
    s = succ.size() == 1 ? succ.front().first : draw_successor(succ, unif(rng));
    if (mdp.terminal(s)) {
      traj.reached_goal = mdp.goal(s);
      break;
    }
  }
  return traj;
}

Vec trajectory_gradient(const SoftmaxPolicy& policy, const Trajectory& traj, double discount, Weighting weighting) {
  Vec g = Vec::Zero(policy.theta().size());
  if (weighting == Weighting::Gpomdp) {
    const auto psi = reward_to_go(traj, discount);
    for (std::size_t h = 0; h < traj.steps.size(); ++h) {
      add_score(policy, traj.steps[h].state, traj.steps[h].action, psi[h], g);
    }
  } else {
    const double ret = traj.discounted_return(discount);
    for (const auto& st : traj.steps) add_score(policy, st.state, st.action, ret, g);
  }
  return g;
}

Mat trajectory_hessian(const SoftmaxPolicy& policy, const Trajectory& traj, double discount) {
  const Eigen::Index dim = policy.theta().size();
  const Eigen::Index na = policy.n_actions();
  const auto psi = reward_to_go(traj, discount);
  Vec grad_phi = Vec::Zero(dim);
  Vec grad_logp = Vec::Zero(dim);
  Mat hess = Mat::Zero(dim, dim);
  for (std::size_t h = 0; h < traj.steps.size(); ++h) {
    const int s = traj.steps[h].state;
    const int a = traj.steps[h].action;
    add_score(policy, s, a, psi[h], grad_phi);
    add_score(policy, s, a, 1.0, grad_logp);
    const Vec p = policy.probs(s);
    const Eigen::Index off = policy.index(s, 0);
    auto block = hess.block(off, off, na, na);
    block.noalias() += psi[h] * (p * p.transpose());
    block.diagonal() -= psi[h] * p;
  }
  // ∇Φ∇log pᵀ is supported on visited-state rows and columns only
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (grad_phi(i) != 0 || grad_logp(i) != 0) support.push_back(i);
  }
  for (Eigen::Index j : support) {
    if (grad_logp(j) == 0) continue;
    for (Eigen::Index i : support) hess(i, j) += grad_phi(i) * grad_logp(j);
  }
  return hess;
}

PgBatchEstimate batch_estimate(const SoftmaxPolicy& policy, const std::vector<Trajectory>& trajs, double discount,
                               bool with_hessian, Weighting weighting) {
  if (trajs.empty()) throw Error(ErrorCode::BadSpec, "batch needs at least one trajectory");
  const Eigen::Index dim = policy.theta().size();
  PgBatchEstimate est;
  est.m = static_cast<long>(trajs.size());
  est.grad = Vec::Zero(dim);
  Mat hess = Mat::Zero(dim, dim);
  for (const auto& traj : trajs) {
    est.grad += trajectory_gradient(policy, traj, discount, weighting);
    if (with_hessian) hess += trajectory_hessian(policy, traj, discount);
    est.est_return += traj.discounted_return(discount);
    est.mean_reward += traj.total_reward();
    est.mean_length += static_cast<double>(traj.length());
    est.success_rate += traj.reached_goal ? 1.0 : 0.0;
    est.state_actions += traj.length();
  }
  const double inv = 1.0 / static_cast<double>(est.m);
  est.grad *= inv;
  est.hess = SymMat::symmetrized(hess * inv);
  est.est_return *= inv;
  est.mean_reward *= inv;
  est.mean_length *= inv;
  est.success_rate *= inv;
  if (!est.grad.allFinite() || !est.hess.matrix().allFinite()) {
    throw Error(ErrorCode::NonFinite, "policy gradient estimate");
  }
  return est;
}

std::vector<Trajectory> sample_batch(const TabularMdp& mdp, const SoftmaxPolicy& policy, long m, Rng& rng) {
  if (m < 1) throw Error(ErrorCode::BadSpec, "batch size m must be >= 1");
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(m));
  for (long i = 0; i < m; ++i) out.push_back(sample_trajectory(mdp, policy, rng));
  return out;
}

PgBatchEstimate estimate_gradient(const TabularMdp& mdp, const SoftmaxPolicy& policy, long m, Rng& rng) {
  return batch_estimate(policy, sample_batch(mdp, policy, m, rng), mdp.discount(), false);
}

PgBatchEstimate estimate_hessian(const TabularMdp& mdp, const SoftmaxPolicy& policy, long m, Rng& rng) {
  return batch_estimate(policy, sample_batch(mdp, policy, m, rng), mdp.discount(), true);
}

double importance_weight(const Trajectory& traj, const SoftmaxPolicy& old_policy, const SoftmaxPolicy& new_policy) {
  double log_w = 0;
  for (const auto& st : traj.steps) {
    const double ln_new = new_policy.log_prob(st.state, st.action);
    if (std::exp(ln_new) == 0.0) throw Error(ErrorCode::ZeroDenominator, "action has zero probability under new policy");
    log_w += old_policy.log_prob(st.state, st.action) - ln_new;
  }
  const double w = std::exp(log_w);
  if (!std::isfinite(w)) throw Error(ErrorCode::NonFinite, "importance weight overflow");
  return w;
}

namespace {

struct Enumerator {
  const TabularMdp& mdp;
  const SoftmaxPolicy& policy;
  long max_paths;
  long paths = 0;
  ExactPg out;

  // ∇J = Σ_τ p(τ)R(τ)∇log p(τ),  ∇²J = Σ_τ p(τ)R(τ)(∇log p ∇log pᵀ + ∇²log p)
  void finish(double prob, double ret, const Vec& score, const Mat& score_hess) {
    if (++paths > max_paths) throw Error(ErrorCode::BadSpec, "enumeration exceeds path limit");
    out.value += prob * ret;
    out.grad += prob * ret * score;
    out.hess += prob * ret * (score * score.transpose() + score_hess);
  }

  void walk(int s, int h, double prob, double ret, double disc, const Vec& score, const Mat& score_hess) {
    if (h == mdp.horizon() || mdp.terminal(s)) {
      finish(prob, ret, score, score_hess);
      return;
    }
    const Vec p = policy.probs(s);
    for (int a = 0; a < mdp.n_actions(); ++a) {
      if (p(a) == 0) continue;
      auto [sc, sh] = score_and_hessian(policy, s, a);
      const Vec next_score = score + sc;
      const Mat next_hess = score_hess + sh.matrix();
      for (const auto& [next, pt] : mdp.successors(s, a)) {
        walk(next, h + 1, prob * p(a) * pt, ret + disc * mdp.reward(s, a), disc * mdp.discount(), next_score,
             next_hess);
      }
    }
  }
};

}  // namespace

ExactPg enumerate_policy_gradient(const TabularMdp& mdp, const SoftmaxPolicy& policy, long max_paths) {
  const Eigen::Index dim = policy.theta().size();
  Enumerator e{mdp, policy, max_paths, 0, {0.0, Vec::Zero(dim), Mat::Zero(dim, dim)}};
  const Vec zero_v = Vec::Zero(dim);
  const Mat zero_m = Mat::Zero(dim, dim);
  for (int s = 0; s < mdp.n_states(); ++s) {
    const double rho = mdp.start_dist()(s);
    if (rho > 0) e.walk(s, 0, rho, 0.0, 1.0, zero_v, zero_m);
  }
  return e.out;
}

Vec state_occupancy(const TabularMdp& mdp, const SoftmaxPolicy& policy) {
  const int n = mdp.n_states();
  Vec dist = mdp.start_dist();
  Vec occ = Vec::Zero(n);
  for (int h = 0; h < mdp.horizon(); ++h) {
    Vec next = Vec::Zero(n);
    for (int s = 0; s < n; ++s) {
      if (dist(s) == 0 || mdp.terminal(s)) continue;
      occ(s) += dist(s);
      const Vec p = policy.probs(s);
      for (int a = 0; a < mdp.n_actions(); ++a) {
        for (const auto& [s2, pt] : mdp.successors(s, a)) next(s2) += dist(s) * p(a) * pt;
      }
    }
    dist = std::move(next);
  }
  return occ;
}

}  // namespace scrn::rl
