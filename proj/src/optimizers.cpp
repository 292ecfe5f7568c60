#include "scrn/optimizers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

namespace scrn {

CubicSolution<double> solve_subproblem(const CubicModel<double>& model, const Subsolver& solver, Rng& rng) {
  if (const auto* exact = std::get_if<ExactSubsolver>(&solver)) return solve_exact(model, exact->options);
  return solve_gd(model, std::get<GdSubsolver>(solver).options, rng);
}

void ScrnConfig::validate() const {
  if (!(m_penalty > 0)) throw Error(ErrorCode::BadSpec, "m_penalty must be positive");
  if (!(alpha >= 1.0 && alpha <= 2.0)) throw Error(ErrorCode::BadSpec, "alpha must lie in [1, 2]");
  if (!(epsilon > 0)) throw Error(ErrorCode::BadSpec, "epsilon must be positive");
  if (max_iters < 1) throw Error(ErrorCode::BadSpec, "max_iters must be >= 1");
  if (n1 < 1 || n2 < 1) throw Error(ErrorCode::BadSpec, "batch sizes must be >= 1");
  if (!(batch_growth >= 1.0)) throw Error(ErrorCode::BadSpec, "batch_growth must be >= 1");
  if (delta_reject_threshold && !(*delta_reject_threshold > 0)) {
    throw Error(ErrorCode::BadSpec, "delta_reject_threshold must be positive");
  }
}

double ScrnConfig::small_step_threshold() const { return std::pow(epsilon, 1.0 / (2.0 * alpha)); }

std::string_view to_string(RunStatus status) {
  switch (status) {
    case RunStatus::SmallStep: return "SmallStep";
    case RunStatus::MaxIters: return "MaxIters";
    case RunStatus::BudgetExhausted: return "BudgetExhausted";
    case RunStatus::TargetReached: return "TargetReached";
    case RunStatus::NonFinite: return "NonFinite";
  }
  return "Unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

struct Estimate {
  Vec g;
  SymMat h;
};

struct LoopLimits {
  long max_iters;
  std::optional<std::uint64_t> sample_budget;
  std::optional<double> target_gap;
  bool record_timing;
};

/// Shared bookkeeping for every optimizer loop: rows, counters relative to
/// the oracle state at entry, and the stopping checks made before each
/// iteration.
class RunTracker {
 public:
  RunTracker(const StochasticOracle& oracle, const LoopLimits& limits, const Vec& x0)
      : oracle_(oracle),
        limits_(limits),
        grad0_(oracle.grad_call_count()),
        hess0_(oracle.hess_call_count()),
        start_(Clock::now()) {
    if (x0.size() != oracle.dim()) throw Error(ErrorCode::DimMismatch, "x0 has wrong dimension");
    record_.x_final = x0;
    OptRow row;
    row.gap = gap(x0);
    record_.rows.push_back(row);
  }

  double gap(const Vec& x) const { return oracle_.exact_value(x) - oracle_.optimum_value(); }

  /// Checks taken before iteration t; returns true when the run must stop.
  bool should_stop(long t) {
    const OptRow& last = record_.rows.back();
    if (limits_.target_gap && last.gap <= *limits_.target_gap) return stop(RunStatus::TargetReached);
    if (limits_.sample_budget && last.grad_samples + last.hess_samples >= *limits_.sample_budget) {
      return stop(RunStatus::BudgetExhausted);
    }
    if (t >= limits_.max_iters) return stop(RunStatus::MaxIters);
    return false;
  }

  bool stop(RunStatus status) {
    record_.status = status;
    return true;
  }

  OptRow& push(long t, const Vec& x) {
    record_.x_final = x;
    OptRow row;
    row.t = t;
    row.gap = gap(x);
    row.grad_samples = oracle_.grad_call_count() - grad0_;
    row.hess_samples = oracle_.hess_call_count() - hess0_;
    if (limits_.record_timing) {
      row.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
    }
    record_.rows.push_back(row);
    return record_.rows.back();
  }

  OptRunRecord& record() { return record_; }

 private:
  const StochasticOracle& oracle_;
  LoopLimits limits_;
  std::uint64_t grad0_;
  std::uint64_t hess0_;
  Clock::time_point start_;
  OptRunRecord record_;
};

template <typename EstimateFn>
OptRunRecord cubic_loop(const StochasticOracle& oracle, const ScrnConfig& config, const Vec& x0, Rng& rng,
                        EstimateFn&& estimate) {
  config.validate();
  RunTracker tracker(oracle, {config.max_iters, config.sample_budget, config.target_gap, config.record_timing},
                     x0);
  const double threshold = config.small_step_threshold();
  Vec x = x0;
  Vec prev = x0;
  for (long t = 0;; ++t) {
    if (config.stop_on_small_step && t > 0 && tracker.record().rows.back().step_norm < threshold) {
      tracker.stop(RunStatus::SmallStep);
      break;
    }
    if (tracker.should_stop(t)) break;

    CubicSolution<double> sol;
    Estimate est;
    try {
      est = estimate(t, x, prev);
      sol = solve_subproblem(CubicModel<double>(est.g, est.h, config.m_penalty), config.subsolver, rng);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      tracker.stop(RunStatus::NonFinite);
      break;
    }
    const double norm = sol.delta.norm();
    const bool rejected = config.delta_reject_threshold && norm > *config.delta_reject_threshold;
    prev = x;
    if (!rejected) x += sol.delta;
    if (!x.allFinite()) {
      tracker.stop(RunStatus::NonFinite);
      break;
    }
    OptRow& row = tracker.push(t + 1, x);
    row.step_norm = norm;
    row.rejected = rejected;
    row.model_value = sol.model_value;
    row.g_dot_delta = est.g.dot(sol.delta);
    if (rejected) ++tracker.record().rejected_count;
  }
  return std::move(tracker.record());
}

std::int64_t saturating_ceil(double v) {
  constexpr double kMax = 9.2e18;
  if (!(v < kMax)) return std::numeric_limits<std::int64_t>::max();
  // guard against representation error pushing an exact integer up by one
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(v * (1 - 1e-12))));
}

}  // namespace

OptRunRecord scrn_run(StochasticOracle& oracle, const ScrnConfig& config, const Vec& x0, Rng& rng) {
  std::uint64_t used = 0;
  return cubic_loop(oracle, config, x0, rng, [&](long t, const Vec& x, const Vec&) {
    const double scale = std::pow(config.batch_growth, static_cast<double>(t));
    std::int64_t n1 = saturating_ceil(static_cast<double>(config.n1) * scale);
    std::int64_t n2 = saturating_ceil(static_cast<double>(config.n2) * scale);
    // growing batches: the last one is cut to what is left of the budget
    if (config.batch_growth > 1 && config.sample_budget && *config.sample_budget > used) {
      const auto left = static_cast<double>(*config.sample_budget - used);
      const double total = static_cast<double>(n1) + static_cast<double>(n2);
      if (total > left) {
        n1 = std::max<std::int64_t>(1, static_cast<std::int64_t>(static_cast<double>(n1) * left / total));
        n2 = std::max<std::int64_t>(1, static_cast<std::int64_t>(left) - n1);
      }
    }
    used += static_cast<std::uint64_t>(n1 + n2);
    Vec g = oracle.sample_gradient(x, n1, rng);
    SymMat h = oracle.sample_hessian(x, n2, rng);
    return Estimate{std::move(g), std::move(h)};
  });
}

OptRunRecord crn_run(const StochasticOracle& oracle, const ScrnConfig& config, const Vec& x0, Rng& rng) {
  return cubic_loop(oracle, config, x0, rng, [&](long, const Vec& x, const Vec&) {
    return Estimate{oracle.exact_gradient(x), oracle.exact_hessian(x)};
  });
}

RecursionConstants recursion_constants(double m_penalty, double l2, double tau, double alpha) {
  const double denom = 3 * m_penalty - 2 * l2 - 8;
  if (!(denom > 0)) throw Error(ErrorCode::BadSpec, "recursion constants need 3M - 2L2 - 8 > 0");
  if (!(tau > 0) || !(alpha >= 1 && alpha <= 2)) throw Error(ErrorCode::BadSpec, "need tau > 0, alpha in [1,2]");
  const double core = tau * std::pow((m_penalty + l2 + 1) / 2, alpha) * std::pow(12 / denom, 2 * alpha / 3);
  RecursionConstants out;
  out.c = std::pow(3.0, (5 * alpha - 4) / 3) * core;
  const double shared = std::pow(3.0, (5 * alpha - 7) / 3) * core;
  out.c_g = std::pow(2.0, 2 * alpha / 3) * shared + std::pow(3.0, alpha - 1) * tau;
  out.c_h = std::pow(2.0, -2 * alpha / 3) * shared + std::pow(3.0, alpha - 1) * std::pow(2.0, -alpha) * tau;
  return out;
}

double c_h_prime(double c_h, double alpha, Eigen::Index dim) {
  if (dim < 1) throw Error(ErrorCode::BadSpec, "dimension must be >= 1");
  const double log_d = std::log(static_cast<double>(dim));
  return c_h * std::pow(2.0, 2 * alpha) * std::pow(std::numbers::e * std::max(2 * alpha, log_d), alpha);
}

BatchSizes theorem1_batches(double epsilon, double alpha, double sigma1, double sigma2a,
                            const BatchConstants& k) {
  if (!(epsilon > 0) || !(alpha > 0) || !(sigma1 > 0) || !(sigma2a > 0) || !(k.c > 0) || !(k.c_g > 0) ||
      !(k.c_h_prime > 0)) {
    throw Error(ErrorCode::BadSpec, "theorem1_batches needs positive inputs");
  }
  const double n1 = std::pow(k.c_g, 2 / alpha) / std::pow(k.c, 6 / alpha) * std::pow(4.0, 2 / alpha) *
                    std::pow(sigma1, 2 / alpha) / std::pow(epsilon, 2 / alpha);
  const double n2 = std::pow(k.c_h_prime, 1 / alpha) / std::pow(k.c, 3 / alpha) * std::pow(4.0, 1 / alpha) *
                    std::pow(sigma2a, 2 / alpha) / std::pow(epsilon, 1 / alpha);
  return {saturating_ceil(n1), saturating_ceil(n2)};
}

double default_m_penalty(double l2) { return 2 * l2 + 10; }

void VrScrnConfig::validate() const {
  base.validate();
  if (period < 1) throw Error(ErrorCode::BadSpec, "period must be >= 1");
  if (batch_cap < 1) throw Error(ErrorCode::BadSpec, "batch_cap must be >= 1");
  if (!(epoch_error_exponent > 0)) throw Error(ErrorCode::BadSpec, "epoch_error_exponent must be positive");
  if (const auto* fixed = std::get_if<FixedSchedule>(&schedule)) {
    if (fixed->checkpoint_grad < 1 || fixed->checkpoint_hess < 1 || fixed->inner_grad < 1 ||
        fixed->inner_hess < 1) {
      throw Error(ErrorCode::BadSpec, "fixed VR batches must be >= 1");
    }
  } else {
    const auto& acc = std::get<AccuracySchedule>(schedule);
    if (!(acc.multiplier > 0) || acc.sigma_grad < 0 || acc.sigma_hess < 0 || acc.grad_lipschitz < 0 ||
        acc.hess_lipschitz < 0) {
      throw Error(ErrorCode::BadSpec, "invalid accuracy schedule");
    }
  }
}

VrBatch vr_batch(const VrScrnConfig& config, long t, double step_norm, Eigen::Index dim) {
  const bool checkpoint = t % config.period == 0;
  auto clamp = [&](double v) {
    return static_cast<long>(std::min<std::int64_t>(config.batch_cap, saturating_ceil(v)));
  };
  if (const auto* fixed = std::get_if<FixedSchedule>(&config.schedule)) {
    if (checkpoint) return {clamp(fixed->checkpoint_grad), clamp(fixed->checkpoint_hess)};
    return {clamp(fixed->inner_grad), clamp(fixed->inner_hess)};
  }
  const auto& acc = std::get<AccuracySchedule>(config.schedule);
  const double alpha = config.base.alpha;
  const double s = static_cast<double>(config.period);
  const double epoch = static_cast<double>(t / config.period + 1);
  const double eps_k = std::pow(epoch * s, -config.epoch_error_exponent);
  const double log_d = std::max(1.0, std::log(static_cast<double>(dim)));
  const double hess_factor = std::pow(2.0, 1 / alpha) * std::pow(8 * std::numbers::e * log_d, 2);
  const double grad_scale = std::pow(eps_k, -2 / alpha);
  const double hess_scale = std::pow(eps_k, -1 / alpha);
  const double mult = acc.multiplier;
  if (checkpoint) {
    return {clamp(mult * 2 * acc.sigma_grad * acc.sigma_grad * grad_scale),
            clamp(mult * hess_factor * std::pow(acc.sigma_hess, 2 / alpha) * std::pow(s, 1 - 1 / alpha) *
                  hess_scale)};
  }
  const double step_sq = step_norm * step_norm;
  return {clamp(mult * 4 * acc.grad_lipschitz * acc.grad_lipschitz * s * step_sq * grad_scale),
          clamp(mult * 4 * hess_factor * acc.hess_lipschitz * acc.hess_lipschitz * s * step_sq * hess_scale)};
}

OptRunRecord vr_scrn_run(StochasticOracle& oracle, const VrScrnConfig& config, const Vec& x0, Rng& rng) {
  config.validate();
  Vec v;
  SymMat u;
  return cubic_loop(oracle, config.base, x0, rng, [&](long t, const Vec& x, const Vec& prev) {
    const VrBatch batch = vr_batch(config, t, (x - prev).norm(), oracle.dim());
    if (t % config.period == 0) {
      v = oracle.sample_gradient(x, batch.grad, rng);
      u = oracle.sample_hessian(x, batch.hess, rng);
    } else {
      v += oracle.sample_gradient_difference(x, prev, batch.grad, rng);
      u += oracle.sample_hessian_difference(x, prev, batch.hess, rng);
    }
    return Estimate{v, u};
  });
}

double StepSchedule::at(long t) const { return a / std::pow(static_cast<double>(t / period) + b, exponent); }

void SgdConfig::validate() const {
  if (!(schedule.a > 0) || !(schedule.b > 0) || schedule.period < 1) {
    throw Error(ErrorCode::BadSpec, "step schedule needs a > 0, b > 0, P >= 1");
  }
  if (batch < 1) throw Error(ErrorCode::BadSpec, "batch must be >= 1");
  if (max_iters < 1) throw Error(ErrorCode::BadSpec, "max_iters must be >= 1");
}

OptRunRecord sgd_run(StochasticOracle& oracle, const SgdConfig& config, const Vec& x0, Rng& rng) {
  config.validate();
  RunTracker tracker(oracle, {config.max_iters, config.sample_budget, config.target_gap, config.record_timing},
                     x0);
  Vec x = x0;
  for (long t = 0;; ++t) {
    if (tracker.should_stop(t)) break;
    const Vec step = config.schedule.at(t) * oracle.sample_gradient(x, config.batch, rng);
    x -= step;
    if (!x.allFinite()) {
      tracker.stop(RunStatus::NonFinite);
      break;
    }
    tracker.push(t + 1, x).step_norm = step.norm();
  }
  return std::move(tracker.record());
}

}  // namespace scrn
