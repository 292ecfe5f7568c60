#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "scrn/cubic.hpp"
#include "scrn/oracle.hpp"

namespace scrn {

struct ExactSubsolver {
  ExactOptions options;
};

struct GdSubsolver {
  GdOptions options;
};

using Subsolver = std::variant<ExactSubsolver, GdSubsolver>;

/// Dispatches to solve_exact or solve_gd.
CubicSolution<double> solve_subproblem(const CubicModel<double>& model, const Subsolver& solver, Rng& rng);

struct ScrnConfig {
  double m_penalty = 10.0;  // M
  double alpha = 1.0;       // gradient-dominance exponent, [1, 2]
  double epsilon = 1e-2;
  long max_iters = 100;  // T
  long n1 = 1;           // gradient batch
  long n2 = 1;           // Hessian batch
  double batch_growth = 1.0;  // batches at iteration t are ⌈n·growth^t⌉
  Subsolver subsolver = ExactSubsolver{};
  bool stop_on_small_step = false;  // stop once ‖Δ_{t−1}‖ < ε^{1/(2α)}
  std::optional<double> delta_reject_threshold;
  // Harness truncation: stop before an iteration once cumulative samples
  // reach the budget, or once the exact gap is at most target_gap.
  std::optional<std::uint64_t> sample_budget;
  std::optional<double> target_gap;
  bool record_timing = false;

  void validate() const;
  double small_step_threshold() const;
};

enum class RunStatus { SmallStep, MaxIters, BudgetExhausted, TargetReached, NonFinite };

std::string_view to_string(RunStatus status);

struct OptRow {
  long t = 0;                       // iterations completed
  double gap = 0;                   // F(x_t) − F*
  double step_norm = 0;             // ‖Δ_{t−1}‖ (proposed, even if rejected)
  std::uint64_t grad_samples = 0;   // cumulative
  std::uint64_t hess_samples = 0;   // cumulative
  double wall_ms = 0;               // 0 unless record_timing
  bool rejected = false;
  double model_value = 0;           // m(Δ_{t−1})
  double g_dot_delta = 0;           // gᵀΔ_{t−1}
};

/// rows[0] is the initial point.
struct OptRunRecord {
  std::vector<OptRow> rows;
  RunStatus status = RunStatus::MaxIters;
  Vec x_final;
  long rejected_count = 0;
};

/// Stochastic cubic Newton. Each iteration draws g_t (n1 samples) then H_t (n2 samples),
/// solves the cubic model and moves to x_t + Δ_t. A step longer than
/// delta_reject_threshold is discarded but its samples stay counted.
OptRunRecord scrn_run(StochasticOracle& oracle, const ScrnConfig& config, const Vec& x0, Rng& rng);

/// Cubic regularized Newton with exact derivatives. No samples are counted.
OptRunRecord crn_run(const StochasticOracle& oracle, const ScrnConfig& config, const Vec& x0, Rng& rng);

struct RecursionConstants {
  double c;    // C
  double c_g;  // C_g
  double c_h;  // C_H
};

/// Constants of the per-iteration recursion
/// F(x_{t+1}) − F* ≤ C(F(x_t) − F(x_{t+1}))^{2α/3} + C_g E‖∇F − g‖^α + C_H E‖∇²F − H‖^{2α}.
/// Throws BadSpec unless 3M − 2L₂ − 8 > 0.
RecursionConstants recursion_constants(double m_penalty, double l2, double tau, double alpha);

/// C'_H = C_H·2^{2α}·(e·max{2α, log d})^α.
double c_h_prime(double c_h, double alpha, Eigen::Index dim);

struct BatchConstants {
  double c = 1;
  double c_g = 1;
  double c_h_prime = 1;
};

struct BatchSizes {
  std::int64_t n1 = 1;
  std::int64_t n2 = 1;
};

/// n1 = ⌈C_g^{2/α}/C^{6/α}·4^{2/α}σ₁^{2/α}/ε^{2/α}⌉,
/// n2 = ⌈C'_H^{1/α}/C^{3/α}·4^{1/α}σ₂^{2/α}/ε^{1/α}⌉. Saturates at INT64_MAX.
BatchSizes theorem1_batches(double epsilon, double alpha, double sigma1, double sigma2a,
                            const BatchConstants& constants);

/// 2L₂ + 10.
double default_m_penalty(double l2);

/// Variance-reduction batch shapes, with the accuracy in epoch
/// k set to ε_k = (kS)^{−β}:
///   checkpoint  n_g = 2σ₁²/ε_k^{2/α},  n_H = 2^{1/α}(8e·log d)²σ₂^{2/α}S^{1−1/α}/ε_k^{1/α}
///   otherwise   n_g = 4L'₁²S‖Δ‖²/ε_k^{2/α},  n_H = 4·2^{1/α}(8e·log d)²L'₂²S‖Δ‖²/ε_k^{1/α}
/// each times `multiplier`, with log d floored at 1.
struct AccuracySchedule {
  double multiplier = 1.0;
  double sigma_grad = 0.0;
  double sigma_hess = 0.0;
  double grad_lipschitz = 1.0;  // L'₁
  double hess_lipschitz = 1.0;  // L'₂
};

struct FixedSchedule {
  long checkpoint_grad = 1;
  long checkpoint_hess = 1;
  long inner_grad = 1;
  long inner_hess = 1;
};

struct VrScrnConfig {
  ScrnConfig base;
  long period = 1;  // S
  long batch_cap = 10000;
  double epoch_error_exponent = 2.0;  // β
  std::variant<AccuracySchedule, FixedSchedule> schedule = FixedSchedule{};

  void validate() const;
};

struct VrBatch {
  long grad = 1;
  long hess = 1;
};

/// Batch sizes for iteration t (0-based) given ‖x_t − x_{t−1}‖.
VrBatch vr_batch(const VrScrnConfig& config, long t, double step_norm, Eigen::Index dim);

/// Variance-reduced SCRN. At t mod S == 0 fresh estimates v_t, U_t are drawn; otherwise
/// v_t = v_{t−1} + mean(∇f(x_t, ξ) − ∇f(x_{t−1}, ξ)) and U_t likewise, with
/// shared samples at both points.
OptRunRecord vr_scrn_run(StochasticOracle& oracle, const VrScrnConfig& config, const Vec& x0, Rng& rng);

/// η_t = a/(⌊t/P⌋ + b)^exponent
struct StepSchedule {
  double a = 1.0;
  double b = 1.0;
  long period = 1;  // P
  double exponent = 1.0;

  double at(long t) const;
};

struct SgdConfig {
  StepSchedule schedule;
  long batch = 1;
  long max_iters = 1000;
  std::optional<std::uint64_t> sample_budget;
  std::optional<double> target_gap;
  bool record_timing = false;

  void validate() const;
};

/// x_{t+1} = x_t − η_t·ĝ_t with ĝ_t a mean of `batch` stochastic gradients.
OptRunRecord sgd_run(StochasticOracle& oracle, const SgdConfig& config, const Vec& x0, Rng& rng);

}  // namespace scrn
