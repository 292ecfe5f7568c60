#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "scrn/linalg.hpp"

namespace scrn {

using Rng = std::mt19937_64;

/// Objective F(x) = E[f(x, ξ)] with exact evaluation (for measuring the
/// optimality gap) and mini-batch stochastic derivatives. The public
/// sampling calls advance the sample counters by exactly n.
class StochasticOracle {
 public:
  virtual ~StochasticOracle() = default;

  virtual Eigen::Index dim() const = 0;
  virtual double exact_value(const Vec& x) const = 0;
  virtual Vec exact_gradient(const Vec& x) const = 0;
  virtual SymMat exact_hessian(const Vec& x) const = 0;
  virtual double optimum_value() const = 0;

  /// Mean of n stochastic gradients at x.
  Vec sample_gradient(const Vec& x, long n, Rng& rng);
  /// Mean of n stochastic Hessians at x.
  SymMat sample_hessian(const Vec& x, long n, Rng& rng);
  /// (1/n) Σ ∇f(x, ξᵢ) − ∇f(y, ξᵢ) with the same ξᵢ at both points.
  Vec sample_gradient_difference(const Vec& x, const Vec& y, long n, Rng& rng);
  /// (1/n) Σ ∇²f(x, ξᵢ) − ∇²f(y, ξᵢ) with the same ξᵢ at both points.
  SymMat sample_hessian_difference(const Vec& x, const Vec& y, long n, Rng& rng);

  std::uint64_t grad_call_count() const { return grad_calls_; }
  std::uint64_t hess_call_count() const { return hess_calls_; }
  void reset_counters() { grad_calls_ = hess_calls_ = 0; }

  // Problem metadata; absent when not known analytically.
  virtual std::optional<double> gradient_lipschitz() const { return std::nullopt; }  // L₁
  virtual std::optional<double> hessian_lipschitz() const { return std::nullopt; }   // L₂
  virtual std::optional<double> dominance_alpha() const { return std::nullopt; }     // α
  virtual std::optional<double> dominance_tau() const { return std::nullopt; }       // τ_F
  virtual double sigma_grad() const { return 0.0; }                                  // σ₁
  virtual double sigma_hess() const { return 0.0; }                                  // σ₂

 protected:
  virtual Vec draw_gradient(const Vec& x, long n, Rng& rng) = 0;
  virtual SymMat draw_hessian(const Vec& x, long n, Rng& rng) = 0;
  virtual Vec draw_gradient_difference(const Vec& x, const Vec& y, long n, Rng& rng) = 0;
  virtual SymMat draw_hessian_difference(const Vec& x, const Vec& y, long n, Rng& rng) = 0;

 private:
  std::uint64_t grad_calls_ = 0;
  std::uint64_t hess_calls_ = 0;
};

struct PowerFamily {
  int p = 4;  // even
  int q = 1;  // 0 < q < p
};

struct SinQuadraticFamily {
  double a = 0.0;  // [0, 4.6033]
};

inline constexpr double kSinQuadraticMaxA = 4.6033;

struct SyntheticSpec {
  std::variant<PowerFamily, SinQuadraticFamily> family = PowerFamily{};
  double noise_sigma_grad = 0.0;
  double noise_sigma_hess = 0.0;
  Eigen::Index dim = 1;  // d > 1: separable sum of identical 1-D terms

  /// α = p/(p−q) for the power family, 2 for sin-quadratic.
  double alpha() const;
};

/// F(x) = Σᵢ φ(xᵢ) for a 1-D gradient-dominant φ with minimum 0 at 0.
/// Stochastic gradients add iid N(0, σ₁²/d) per coordinate and stochastic
/// Hessians add σ₂·(G + Gᵀ)/(2√d) with G standard Gaussian, so that
/// E‖noise‖² = σ₁² for gradients. Both are additive, so shared-sample
/// differences are exact.
class SyntheticOracle final : public StochasticOracle {
 public:
  explicit SyntheticOracle(const SyntheticSpec& spec);

  Eigen::Index dim() const override { return spec_.dim; }
  double exact_value(const Vec& x) const override;
  Vec exact_gradient(const Vec& x) const override;
  SymMat exact_hessian(const Vec& x) const override;
  double optimum_value() const override { return 0.0; }

  std::optional<double> gradient_lipschitz() const override { return l1_; }
  std::optional<double> hessian_lipschitz() const override { return l2_; }
  std::optional<double> dominance_alpha() const override { return spec_.alpha(); }
  std::optional<double> dominance_tau() const override { return tau_; }
  double sigma_grad() const override { return spec_.noise_sigma_grad; }
  double sigma_hess() const override { return spec_.noise_sigma_hess; }

  const SyntheticSpec& spec() const { return spec_; }

  // 1-D term and its derivatives
  double phi(double x) const;
  double dphi(double x) const;
  double d2phi(double x) const;

 protected:
  Vec draw_gradient(const Vec& x, long n, Rng& rng) override;
  SymMat draw_hessian(const Vec& x, long n, Rng& rng) override;
  Vec draw_gradient_difference(const Vec& x, const Vec& y, long n, Rng& rng) override;
  SymMat draw_hessian_difference(const Vec& x, const Vec& y, long n, Rng& rng) override;

 private:
  Vec gradient_noise(long n, Rng& rng) const;
  SymMat hessian_noise(long n, Rng& rng) const;

  SyntheticSpec spec_;
  double power_exponent_ = 2.0;  // p/q
  std::optional<double> l1_;
  std::optional<double> l2_;
  std::optional<double> tau_;
};

/// |x|^{p/q} per coordinate. Throws BadSpec unless p is even and 0 < q < p.
SyntheticOracle make_power_fn(const SyntheticSpec& spec);
/// x² + a·sin²(x) per coordinate. Throws BadSpec unless 0 ≤ a ≤ 4.6033.
SyntheticOracle make_sin_quadratic_fn(const SyntheticSpec& spec);
/// Dispatches on spec.family.
SyntheticOracle make_synthetic(const SyntheticSpec& spec);

/// max over the grid of (F(x) − F*)/‖∇F(x)‖^α, skipping ‖∇F‖ < 1e-12.
double estimate_pl_constant(const StochasticOracle& oracle, double alpha, std::span<const Vec> grid);
/// 1-D convenience overload; oracle must have dim 1.
double estimate_pl_constant(const StochasticOracle& oracle, double alpha, std::span<const double> grid);

/// τ_F of the 1-D sin-quadratic term (α = 2), by dense grid plus refinement.
double sin_quadratic_tau(double a);
/// Smallest a in [0, 4.6033] whose τ_F reaches the target (bisection).
double sin_quadratic_a_for_tau(double tau_target);

}  // namespace scrn
