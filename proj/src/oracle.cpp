#include "scrn/oracle.hpp"

#include <cmath>

namespace scrn {

namespace {

void check_batch(long n) {
  if (n < 1) throw Error(ErrorCode::BadSpec, "batch size must be >= 1");
}

void check_point(const StochasticOracle& oracle, const Vec& x) {
  if (x.size() != oracle.dim()) throw Error(ErrorCode::DimMismatch, "point has wrong dimension");
}

}  // namespace

Vec StochasticOracle::sample_gradient(const Vec& x, long n, Rng& rng) {
  check_batch(n);
  check_point(*this, x);
  grad_calls_ += static_cast<std::uint64_t>(n);
  return draw_gradient(x, n, rng);
}

SymMat StochasticOracle::sample_hessian(const Vec& x, long n, Rng& rng) {
  check_batch(n);
  check_point(*this, x);
  hess_calls_ += static_cast<std::uint64_t>(n);
  return draw_hessian(x, n, rng);
}

Vec StochasticOracle::sample_gradient_difference(const Vec& x, const Vec& y, long n, Rng& rng) {
  check_batch(n);
  check_point(*this, x);
  check_point(*this, y);
  grad_calls_ += static_cast<std::uint64_t>(n);
  return draw_gradient_difference(x, y, n, rng);
}

SymMat StochasticOracle::sample_hessian_difference(const Vec& x, const Vec& y, long n, Rng& rng) {
  check_batch(n);
  check_point(*this, x);
  check_point(*this, y);
  hess_calls_ += static_cast<std::uint64_t>(n);
  return draw_hessian_difference(x, y, n, rng);
}

double SyntheticSpec::alpha() const {
  if (const auto* power = std::get_if<PowerFamily>(&family)) {
    return static_cast<double>(power->p) / static_cast<double>(power->p - power->q);
  }
  return 2.0;
}

SyntheticOracle::SyntheticOracle(const SyntheticSpec& spec) : spec_(spec) {
  if (spec_.dim < 1) throw Error(ErrorCode::BadSpec, "synthetic dimension must be >= 1");
  if (!(spec_.noise_sigma_grad >= 0) || !(spec_.noise_sigma_hess >= 0)) {
    throw Error(ErrorCode::BadSpec, "noise levels must be nonnegative");
  }
  const double d = static_cast<double>(spec_.dim);
  const double alpha = spec_.alpha();

  if (const auto* power = std::get_if<PowerFamily>(&spec_.family)) {
    if (power->p <= 0 || power->p % 2 != 0) throw Error(ErrorCode::BadSpec, "power family needs even p > 0");
    if (power->q <= 0 || power->q >= power->p) throw Error(ErrorCode::BadSpec, "power family needs 0 < q < p");
    const double k = static_cast<double>(power->p) / power->q;
    power_exponent_ = k;
    // constants certified on [-1, 1]
    l1_ = k * (k - 1);
    if (k >= 3.0) {
      l2_ = k * (k - 1) * (k - 2);
    } else if (k == 2.0) {
      l2_ = 0.0;
    }
    // Σ|gᵢ|^α ≤ d^{1−α/2}‖g‖^α and |x|^k = k^{−α}|φ'(x)|^α
    tau_ = std::pow(d, 1.0 - alpha / 2.0) * std::pow(k, -alpha);
  } else {
    const double a = std::get<SinQuadraticFamily>(spec_.family).a;
    if (!(a >= 0.0) || a > kSinQuadraticMaxA + 1e-9) {
      throw Error(ErrorCode::BadSpec, "sin-quadratic needs 0 <= a <= 4.6033");
    }
    l1_ = 2.0 + 2.0 * a;
    l2_ = 4.0 * a;
    tau_ = sin_quadratic_tau(a);  // α = 2 keeps τ_F unchanged for the separable sum
  }
}

double SyntheticOracle::phi(double x) const {
  if (std::holds_alternative<PowerFamily>(spec_.family)) return std::pow(std::abs(x), power_exponent_);
  const double a = std::get<SinQuadraticFamily>(spec_.family).a;
  const double s = std::sin(x);
  return x * x + a * s * s;
}

double SyntheticOracle::dphi(double x) const {
  if (std::holds_alternative<PowerFamily>(spec_.family)) {
    const double k = power_exponent_;
    if (x == 0.0) return 0.0;
    return std::copysign(k * std::pow(std::abs(x), k - 1.0), x);
  }
  const double a = std::get<SinQuadraticFamily>(spec_.family).a;
  return 2.0 * x + a * std::sin(2.0 * x);
}

double SyntheticOracle::d2phi(double x) const {
  if (std::holds_alternative<PowerFamily>(spec_.family)) {
    const double k = power_exponent_;
    if (x == 0.0) return k == 2.0 ? 2.0 : 0.0;
    return k * (k - 1.0) * std::pow(std::abs(x), k - 2.0);
  }
  const double a = std::get<SinQuadraticFamily>(spec_.family).a;
  return 2.0 + 2.0 * a * std::cos(2.0 * x);
}

double SyntheticOracle::exact_value(const Vec& x) const {
  check_point(*this, x);
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) total += phi(x(i));
  return total;
}

Vec SyntheticOracle::exact_gradient(const Vec& x) const {
  check_point(*this, x);
  return x.unaryExpr([this](double v) { return dphi(v); });
}

SymMat SyntheticOracle::exact_hessian(const Vec& x) const {
  check_point(*this, x);
  return SymMat::diagonal(x.unaryExpr([this](double v) { return d2phi(v); }));
}

Vec SyntheticOracle::gradient_noise(long n, Rng& rng) const {
  const Eigen::Index d = spec_.dim;
  Vec noise = Vec::Zero(d);
  if (spec_.noise_sigma_grad == 0.0) return noise;
  // the mean of n iid N(0, σ²/d) draws is one N(0, σ²/(d n)) draw
  const double sd = spec_.noise_sigma_grad / std::sqrt(static_cast<double>(d) * static_cast<double>(n));
  std::normal_distribution<double> normal(0.0, sd);
  for (Eigen::Index i = 0; i < d; ++i) noise(i) = normal(rng);
  return noise;
}

SymMat SyntheticOracle::hessian_noise(long n, Rng& rng) const {
  const Eigen::Index d = spec_.dim;
  if (spec_.noise_sigma_hess == 0.0) return SymMat::zero(d);
  const double sd = spec_.noise_sigma_hess / std::sqrt(static_cast<double>(d) * static_cast<double>(n));
  std::normal_distribution<double> normal(0.0, sd);
  Mat g(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = normal(rng);
  }
  return SymMat::symmetrized(g);
}

Vec SyntheticOracle::draw_gradient(const Vec& x, long n, Rng& rng) {
  return exact_gradient(x) + gradient_noise(n, rng);
}

SymMat SyntheticOracle::draw_hessian(const Vec& x, long n, Rng& rng) {
  return exact_hessian(x) + hessian_noise(n, rng);
}

Vec SyntheticOracle::draw_gradient_difference(const Vec& x, const Vec& y, long /*n*/, Rng& /*rng*/) {
  return exact_gradient(x) - exact_gradient(y);
}

SymMat SyntheticOracle::draw_hessian_difference(const Vec& x, const Vec& y, long /*n*/, Rng& /*rng*/) {
  return exact_hessian(x) - exact_hessian(y);
}

SyntheticOracle make_power_fn(const SyntheticSpec& spec) {
  if (!std::holds_alternative<PowerFamily>(spec.family)) {
    throw Error(ErrorCode::BadSpec, "make_power_fn needs a power family spec");
  }
  return SyntheticOracle(spec);
}

SyntheticOracle make_sin_quadratic_fn(const SyntheticSpec& spec) {
  if (!std::holds_alternative<SinQuadraticFamily>(spec.family)) {
    throw Error(ErrorCode::BadSpec, "make_sin_quadratic_fn needs a sin-quadratic spec");
  }
  return SyntheticOracle(spec);
}

SyntheticOracle make_synthetic(const SyntheticSpec& spec) { return SyntheticOracle(spec); }

double estimate_pl_constant(const StochasticOracle& oracle, double alpha, std::span<const Vec> grid) {
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "estimate_pl_constant needs grid points");
  const double fstar = oracle.optimum_value();
  double best = 0.0;
  for (const Vec& x : grid) {
    const double gnorm = oracle.exact_gradient(x).norm();
    if (gnorm < 1e-12) continue;
    best = std::max(best, (oracle.exact_value(x) - fstar) / std::pow(gnorm, alpha));
  }
  return best;
}

double estimate_pl_constant(const StochasticOracle& oracle, double alpha, std::span<const double> grid) {
  if (oracle.dim() != 1) throw Error(ErrorCode::DimMismatch, "scalar grid needs a 1-D oracle");
  std::vector<Vec> points;
  points.reserve(grid.size());
  for (double v : grid) points.push_back(Vec::Constant(1, v));
  return estimate_pl_constant(oracle, alpha, std::span<const Vec>(points));
}

namespace {

double sin_quadratic_ratio(double a, double x) {
  const double s = std::sin(x);
  const double g = 2.0 * x + a * std::sin(2.0 * x);
  return (x * x + a * s * s) / (g * g);
}

}  // namespace

double sin_quadratic_tau(double a) {
  // The ratio is even in x and tends to 1/4 as |x| grows; the peak for a > 0
  // sits near |x| ≈ 2.2.
  constexpr int kPoints = 200000;
  constexpr double kMaxX = 10.0;
  const double h = kMaxX / kPoints;
  double best = 0.25;
  double best_x = kMaxX;
  for (int i = 1; i <= kPoints; ++i) {
    const double x = i * h;
    const double r = sin_quadratic_ratio(a, x);
    if (std::isfinite(r) && r > best) {
      best = r;
      best_x = x;
    }
  }
  // golden-section refinement around the grid maximum
  double lo = std::max(h, best_x - h);
  double hi = best_x + h;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100; ++it) {
    const double c = hi - inv_phi * (hi - lo);
    const double d = lo + inv_phi * (hi - lo);
    if (sin_quadratic_ratio(a, c) > sin_quadratic_ratio(a, d)) {
      hi = d;
    } else {
      lo = c;
    }
  }
  const double refined = sin_quadratic_ratio(a, 0.5 * (lo + hi));
  return std::isfinite(refined) ? std::max(best, refined) : best;
}

double sin_quadratic_a_for_tau(double tau_target) {
  if (!(tau_target > 0.25)) return 0.0;
  double lo = 0.0;
  double hi = kSinQuadraticMaxA;
  if (sin_quadratic_tau(hi) < tau_target) return hi;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (sin_quadratic_tau(mid) >= tau_target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace scrn
