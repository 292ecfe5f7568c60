#pragma once

#include <utility>
#include <vector>

#include "scrn/oracle.hpp"
#include "scrn/rl/mdp.hpp"

namespace scrn::rl {

/// Tabular softmax policy π_θ(a|s) = exp θ_{s,a} / Σ_{a′} exp θ_{s,a′}.
/// The flattened parameter index of (s, a) is s·A + a.
class SoftmaxPolicy {
 public:
  SoftmaxPolicy(int n_states, int n_actions);
  SoftmaxPolicy(int n_states, int n_actions, Vec theta);

  static SoftmaxPolicy uniform(const TabularMdp& mdp) { return {mdp.n_states(), mdp.n_actions()}; }

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  const Vec& theta() const { return theta_; }
  void set_theta(Vec theta);
  Eigen::Index index(int s, int a) const { return static_cast<Eigen::Index>(s) * n_actions_ + a; }

  /// π(·|s), computed with the max-shift.
  Vec probs(int s) const;
  double log_prob(int s, int a) const;
  double entropy(int s) const;
  /// ∂H(π(·|s))/∂θ_{s,·} = −π ⊙ (log π + H).
  Vec entropy_grad(int s) const;

 private:
  void check_state(int s) const;

  int n_states_;
  int n_actions_;
  Vec theta_;
};

/// ∇_θ log π(a|s) and ∇²_θ log π(a|s) over the full parameter vector.
/// Nonzero only on the state-s block: 1_a − π and ππᵀ − Diag(π).
std::pair<Vec, SymMat> score_and_hessian(const SoftmaxPolicy& policy, int s, int a);

struct Step {
  int state = 0;
  int action = 0;
  double reward = 0;
};

struct Trajectory {
  std::vector<Step> steps;
  bool reached_goal = false;

  std::size_t length() const { return steps.size(); }
  double total_reward() const;
  double discounted_return(double discount) const;
};

/// s₀ ∼ ρ, a_h ∼ π(·|s_h), s_{h+1} ∼ P(·|s_h,a_h), stopping at a terminal
/// state or after H steps.
Trajectory sample_trajectory(const TabularMdp& mdp, const SoftmaxPolicy& policy, Rng& rng);

enum class Weighting {
  Gpomdp,     // score at step h weighted by Ψ_h = Σ_{t≥h} γᵗ r_t
  Reinforce,  // every score weighted by the full discounted return
};

/// Single-trajectory estimates evaluated at `policy` (which need not be the
/// sampling policy).
Vec trajectory_gradient(const SoftmaxPolicy& policy, const Trajectory& traj, double discount,
                        Weighting weighting = Weighting::Gpomdp);
/// ∇Φ·∇log pᵀ + ∇²Φ, not symmetrized.
Mat trajectory_hessian(const SoftmaxPolicy& policy, const Trajectory& traj, double discount);

struct PgBatchEstimate {
  Vec grad;
  SymMat hess;  // zero when not requested
  long m = 0;
  double est_return = 0;     // mean discounted return
  double mean_reward = 0;    // mean undiscounted return
  double mean_length = 0;
  double success_rate = 0;
  std::uint64_t state_actions = 0;
};

/// Averages over already-sampled trajectories.
PgBatchEstimate batch_estimate(const SoftmaxPolicy& policy, const std::vector<Trajectory>& trajs, double discount,
                               bool with_hessian, Weighting weighting = Weighting::Gpomdp);

std::vector<Trajectory> sample_batch(const TabularMdp& mdp, const SoftmaxPolicy& policy, long m, Rng& rng);

PgBatchEstimate estimate_gradient(const TabularMdp& mdp, const SoftmaxPolicy& policy, long m, Rng& rng);
PgBatchEstimate estimate_hessian(const TabularMdp& mdp, const SoftmaxPolicy& policy, long m, Rng& rng);

/// w(τ|θ_old, θ_new) = Π_h π_old(a_h|s_h)/π_new(a_h|s_h), accumulated in log
/// space. Throws ZeroDenominator when some π_new(a_h|s_h) underflows to 0.
double importance_weight(const Trajectory& traj, const SoftmaxPolicy& old_policy, const SoftmaxPolicy& new_policy);

/// Exact J_H, ∇J_H and ∇²J_H by enumerating every trajectory. Intended for
/// tiny MDPs; throws BadSpec when the enumeration would exceed `max_paths`.
struct ExactPg {
  double value = 0;
  Vec grad;
  Mat hess;
};
ExactPg enumerate_policy_gradient(const TabularMdp& mdp, const SoftmaxPolicy& policy, long max_paths = 2000000);

/// Expected number of visits to each state within the horizon.
Vec state_occupancy(const TabularMdp& mdp, const SoftmaxPolicy& policy);

}  // namespace scrn::rl
