#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "scrn/optimizers.hpp"
#include "scrn/rl/policy.hpp"

namespace scrn::rl {

/// One row per iteration, describing the trajectories drawn at θ_t and the
/// update that followed. Counters are cumulative.
struct RlRow {
  long t = 0;
  std::uint64_t episodes = 0;
  std::uint64_t state_actions = 0;
  double mean_return = 0;  // undiscounted, over this iteration's episodes
  double mean_length = 0;
  double success_rate = 0;
  double step_norm = 0;  // ‖Δ_t‖ as proposed
  bool rejected = false;
};

struct RlRunRecord {
  std::vector<RlRow> rows;
  RunStatus status = RunStatus::MaxIters;
  Vec theta_final;
  long rejected_count = 0;
};

enum class PgVariant { Spg, Reinforce };

struct SpgConfig {
  StepSchedule schedule;  // t counts episodes consumed so far
  long m = 16;
  long max_iters = 100;
  std::optional<std::uint64_t> episode_budget;
  double entropy_coef = 0;
  PgVariant variant = PgVariant::Spg;

  void validate() const;
};

/// θ ← θ + η_t(∇̂_m J(θ) + β·(1/m)Σ_τ Σ_h ∇H(π(·|s_h))).
RlRunRecord spg_run(const TabularMdp& mdp, const SoftmaxPolicy& policy0, const SpgConfig& config, Rng& rng);

/// n1 = n2 = 16 trajectories and an exact subsolver allowed up to 1024
/// parameters.
ScrnConfig rl_scrn_defaults();

/// base.n1 trajectories feed the gradient and another base.n2 the Hessian.
/// With shared_batch one batch of n1 trajectories feeds both.
/// Uses m_penalty, max_iters, subsolver and delta_reject_threshold of base.
struct ScrnRlConfig {
  ScrnConfig base = rl_scrn_defaults();
  std::optional<std::uint64_t> episode_budget;
  bool shared_batch = false;

  void validate() const;
};

/// SCRN on F = −J_H.
RlRunRecord scrn_rl_run(const TabularMdp& mdp, const SoftmaxPolicy& policy0, const ScrnRlConfig& config, Rng& rng);

struct IsVrConfig {
  VrScrnConfig vr;
  std::optional<std::uint64_t> episode_budget;

  void validate() const;
};

/// Importance-sampled variance reduction. At checkpoints v_t and U_t are
/// fresh batch estimates; otherwise, with τ drawn from θ_t,
///   v_t = v_{t−1} + (1/n)Σ[∇̂J(θ_t;τ) − w(τ|θ_{t−1},θ_t)∇̂J(θ_{t−1};τ)]
/// and U_t likewise with per-trajectory Hessians.
RlRunRecord isvr_scrn_rl_run(const TabularMdp& mdp, const SoftmaxPolicy& policy0, const IsVrConfig& config,
                             Rng& rng);

struct PolicyEvaluation {
  double success_rate = 0;
  double mean_return = 0;  // undiscounted
  double mean_length = 0;
};

PolicyEvaluation evaluate_policy(const TabularMdp& mdp, const SoftmaxPolicy& policy, long episodes, Rng& rng);

/// argmin over Δ of ⟨g,Δ⟩ + ½ΔᵀHΔ + (M/6)‖Δ‖³, solved on the coordinates where
/// g or H is nonzero. The remaining coordinates of the minimizer are zero.
Vec solve_on_support(const Vec& g, const Mat& h, double m_penalty, const Subsolver& solver, Rng& rng);

}  // namespace scrn::rl
