#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "scrn/linalg.hpp"

namespace scrn {

/// m(Δ) = ⟨g, Δ⟩ + ½⟨Δ, HΔ⟩ + (M/6)‖Δ‖³
template <typename Scalar>
struct CubicModel {
  Vector<Scalar> g;
  SymMatrix<Scalar> h;
  Scalar m_penalty;

  CubicModel(Vector<Scalar> g_, SymMatrix<Scalar> h_, Scalar m)
      : g(std::move(g_)), h(std::move(h_)), m_penalty(m) {
    if (!(m_penalty > 0)) throw Error(ErrorCode::BadSpec, "cubic penalty M must be positive");
    if (g.size() != h.dim()) throw Error(ErrorCode::DimMismatch, "cubic model: dim(g) != dim(H)");
  }

  Eigen::Index dim() const { return g.size(); }
};

enum class CubicMethod { Exact, GradientDescent };

template <typename Scalar>
struct CubicSolution {
  Vector<Scalar> delta;
  Scalar model_value = 0;
  Scalar grad_residual = 0;  // ‖∇m(Δ)‖
  /// λ_min(H) + M‖Δ‖/2, left unclipped. Absent when the GD solver ran on a
  /// model above the eigendecomposition cap.
  std::optional<Scalar> min_eig_residual;
  int iterations = 0;
  CubicMethod method = CubicMethod::Exact;
  bool converged = true;
  bool hard_case = false;

  // GD diagnostics over all iterates Δ⁽ᵏ⁾
  Scalar max_g_dot_delta = 0;
  Scalar max_delta_norm = 0;
  std::vector<Scalar> value_trace;  // filled when GdOptions::record_trace
};

template <typename Scalar>
struct ModelEval {
  Scalar value;
  Vector<Scalar> gradient;
};

template <typename Scalar>
ModelEval<Scalar> model_eval(const CubicModel<Scalar>& model, const std::type_identity_t<Vector<Scalar>>& delta) {
  if (delta.size() != model.dim()) throw Error(ErrorCode::DimMismatch, "model_eval: dim(Δ) mismatch");
  const Vector<Scalar> h_delta = model.h.matrix() * delta;
  const Scalar norm = delta.norm();
  const Scalar m = model.m_penalty;
  ModelEval<Scalar> out;
  out.value = model.g.dot(delta) + Scalar(0.5) * delta.dot(h_delta) + m / 6 * norm * norm * norm;
  out.gradient = model.g + h_delta + (m / 2 * norm) * delta;
  return out;
}

/// R = ‖H‖/M + √((‖H‖/M)² + 2‖g‖/M), the positive root of
/// (M/2)r² − ‖H‖r − ‖g‖. Bounds the norm of every stationary point of the
/// model and every gradient-descent iterate started inside the Cauchy radius.
template <typename Scalar>
Scalar cubic_radius_bound(const CubicModel<Scalar>& model, Scalar h_norm) {
  const Scalar a = h_norm / model.m_penalty;
  return a + std::sqrt(a * a + 2 * model.g.norm() / model.m_penalty);
}

/// R_c = −gᵀHg/(2M‖g‖²) + √(‖g‖/M + (gᵀHg/(2M‖g‖²))²). This is at most
/// the exact minimizing step length along −g, so −R_c g/‖g‖ is an admissible
/// gradient-descent start.
template <typename Scalar>
Scalar cauchy_radius(const CubicModel<Scalar>& model) {
  const Scalar gnorm = model.g.norm();
  if (!std::isfinite(gnorm)) throw Error(ErrorCode::NonFinite, "cauchy_radius: non-finite gradient");
  if (gnorm <= Scalar(1e-14)) throw Error(ErrorCode::ZeroGradient, "cauchy_radius needs ‖g‖ > 0");
  const Scalar m = model.m_penalty;
  const Scalar curv = model.g.dot(model.h.matrix() * model.g) / (2 * m * gnorm * gnorm);
  const Scalar b = gnorm / m;
  const Scalar root = std::sqrt(b + curv * curv);
  // −curv + root, rearranged to avoid cancellation when curv > 0
  return curv > 0 ? b / (curv + root) : root - curv;
}

struct ExactOptions {
  Eigen::Index dim_cap = 64;
  EigSolver eig_solver = EigSolver::Auto;
};

namespace detail {

template <typename Scalar>
void fill_residuals(const CubicModel<Scalar>& model, Scalar lambda_min, CubicSolution<Scalar>& sol) {
  const auto ev = model_eval(model, sol.delta);
  sol.model_value = ev.value;
  sol.grad_residual = ev.gradient.norm();
  sol.min_eig_residual = lambda_min + model.m_penalty * sol.delta.norm() / 2;
}

}  // namespace detail

/// Global minimizer of the cubic model via the secular equation in the
/// eigenbasis of H. Writes λ = M‖Δ‖/2; the minimizer is
/// Δ = −(H + λI)⁻¹g with H + λI ⪰ 0. The root of
/// φ(λ) = 1/‖(H+λI)⁻¹g‖ − M/(2λ), which is increasing and concave on
/// (max(0, −λ_min), ∞), is found by safeguarded Newton/bisection. When g has
/// no weight on the bottom eigenspace and φ is already nonnegative at the
/// boundary (the hard case), a bottom eigenvector is added to reach the
/// required norm.
template <typename Scalar>
CubicSolution<Scalar> solve_exact(const CubicModel<Scalar>& model, const ExactOptions& opts = {}) {
  constexpr int kMaxRootIters = 200;
  const Eigen::Index n = model.dim();
  if (n > opts.dim_cap) throw Error(ErrorCode::DimTooLarge, "solve_exact: dimension above cap");
  if (!all_finite(model.g)) throw Error(ErrorCode::NonFinite, "solve_exact: non-finite gradient");

  const auto eig = sym_eig(model.h, opts.eig_solver);
  const Vector<Scalar>& lam = eig.eigenvalues;
  const Matrix<Scalar>& q = eig.eigenvectors;
  const Vector<Scalar> ghat = q.transpose() * model.g;
  const Scalar m = model.m_penalty;
  const Scalar gnorm = model.g.norm();
  const Scalar lam_min = lam(0);
  const Scalar lam_low = std::max(Scalar(0), -lam_min);
  const Scalar spectral = std::max(std::abs(lam(0)), std::abs(lam(n - 1)));
  const Scalar deg_tol = Scalar(1e-12) * std::max(Scalar(1), spectral);

  CubicSolution<Scalar> sol;
  sol.method = CubicMethod::Exact;

  auto finish = [&](Vector<Scalar> delta_hat) {
    sol.delta = q * delta_hat;
    detail::fill_residuals(model, lam_min, sol);
    return sol;
  };

  if (gnorm == 0 && lam_low == 0) return finish(Vector<Scalar>::Zero(n));

  if (lam_low > 0) {
    Scalar g_deg = 0;
    Scalar p_easy_sq = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar shifted = lam(i) + lam_low;
      if (shifted <= deg_tol) {
        g_deg += ghat(i) * ghat(i);
      } else {
        p_easy_sq += (ghat(i) / shifted) * (ghat(i) / shifted);
      }
    }
    const Scalar r_low = 2 * lam_low / m;
    if (std::sqrt(g_deg) <= Scalar(1e-10) * std::max(Scalar(1), gnorm) && std::sqrt(p_easy_sq) <= r_low) {
      Vector<Scalar> delta_hat = Vector<Scalar>::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Scalar shifted = lam(i) + lam_low;
        if (shifted > deg_tol) delta_hat(i) = -ghat(i) / shifted;
      }
      const Scalar tau = std::sqrt(std::max(Scalar(0), r_low * r_low - p_easy_sq));
      delta_hat(0) = ghat(0) > 0 ? -tau : tau;
      sol.hard_case = true;
      return finish(std::move(delta_hat));
    }
  }

  // φ and φ' at shift λ > lam_low
  auto secular = [&](Scalar lambda, Scalar& value, Scalar& deriv, Scalar& pnorm) {
    Scalar s2 = 0;
    Scalar s3 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar inv = Scalar(1) / (lam(i) + lambda);
      const Scalar c = ghat(i) * inv;
      s2 += c * c;
      s3 += c * c * inv;
    }
    pnorm = std::sqrt(s2);
    value = Scalar(1) / pnorm - m / (2 * lambda);
    deriv = s3 / (s2 * pnorm) + m / (2 * lambda * lambda);
  };

  const Scalar radius = cubic_radius_bound(model, spectral);
  Scalar lo = lam_low;
  Scalar hi = std::max(m * radius / 2, lam_low) * (1 + Scalar(1e-8)) + std::numeric_limits<Scalar>::min();
  Scalar value = 0;
  Scalar deriv = 0;
  Scalar pnorm = 0;
  for (int k = 0; k < 200; ++k) {
    secular(hi, value, deriv, pnorm);
    if (value >= 0) break;
    lo = hi;
    hi *= 2;
  }

  Scalar lambda = hi;
  secular(lambda, value, deriv, pnorm);
  const Scalar res_tol = std::numeric_limits<Scalar>::epsilon() * std::max(Scalar(1), gnorm);
  int iter = 0;
  for (; iter < kMaxRootIters; ++iter) {
    // residual of the first-order condition in the eigenbasis
    if (std::abs(pnorm - 2 * lambda / m) * (m / 2) * pnorm <= res_tol) break;
    if (value > 0) {
      hi = lambda;
    } else {
      lo = lambda;
    }
    if (hi - lo <= Scalar(1e-15) * hi) break;
    Scalar next = lambda - value / deriv;
    if (!(next > lo && next < hi)) next = Scalar(0.5) * (lo + hi);
    lambda = next;
    secular(lambda, value, deriv, pnorm);
  }
  sol.iterations = iter;

  Vector<Scalar> delta_hat(n);
  for (Eigen::Index i = 0; i < n; ++i) delta_hat(i) = -ghat(i) / (lam(i) + lambda);
  return finish(std::move(delta_hat));
}

struct GdOptions {
  double tol = 1e-6;
  long max_iters = 100000;
  bool perturb = false;  // Carmon–Duchi style random perturbation of g
  double perturb_magnitude = 1e-8;
  bool record_trace = false;
  EigSolver eig_solver = EigSolver::Auto;
};

/// Gradient descent on the cubic model from the Cauchy point −R_c g/‖g‖ with
/// step η = 1/(4(‖H‖ + M·R)). Stops at ‖∇m‖ ≤ tol; otherwise returns the
/// last iterate with converged = false.
template <typename Scalar, typename Rng>
CubicSolution<Scalar> solve_gd(const CubicModel<Scalar>& model, const GdOptions& opts, Rng& rng) {
  if (!(opts.tol > 0)) throw Error(ErrorCode::BadSpec, "solve_gd: tol must be positive");
  if (!all_finite(model.g)) throw Error(ErrorCode::NonFinite, "solve_gd: non-finite gradient");
  const Eigen::Index n = model.dim();
  const Scalar m = model.m_penalty;

  CubicSolution<Scalar> sol;
  sol.method = CubicMethod::GradientDescent;

  const auto eig = sym_eig(model.h, opts.eig_solver);
  const Scalar lam_min = eig.eigenvalues(0);
  const Scalar h_norm = std::max(std::abs(eig.eigenvalues(0)), std::abs(eig.eigenvalues(n - 1)));

  if (model.g.norm() <= Scalar(1e-14)) {
    sol.delta = Vector<Scalar>::Zero(n);
    detail::fill_residuals(model, lam_min, sol);
    return sol;
  }

  Vector<Scalar> g = model.g;
  if (opts.perturb) {
    std::normal_distribution<Scalar> normal(0, 1);
    Vector<Scalar> u(n);
    for (Eigen::Index i = 0; i < n; ++i) u(i) = normal(rng);
    g += Scalar(opts.perturb_magnitude) * u / u.norm();
  }
  const CubicModel<Scalar> work(g, model.h, m);

  const Scalar radius = cubic_radius_bound(work, h_norm);
  const Scalar eta = Scalar(1) / (4 * (h_norm + m * radius));
  Vector<Scalar> delta = -cauchy_radius(work) * g / g.norm();

  auto track = [&](const Vector<Scalar>& d, Scalar value) {
    sol.max_g_dot_delta = std::max(sol.max_g_dot_delta, work.g.dot(d));
    sol.max_delta_norm = std::max(sol.max_delta_norm, d.norm());
    if (opts.record_trace) sol.value_trace.push_back(value);
  };

  auto ev = model_eval(work, delta);
  sol.max_g_dot_delta = work.g.dot(delta);
  track(delta, ev.value);
  long k = 0;
  for (; k < opts.max_iters; ++k) {
    if (!std::isfinite(ev.value)) throw Error(ErrorCode::NonFinite, "solve_gd diverged");
    if (ev.gradient.norm() <= opts.tol) break;
    delta -= eta * ev.gradient;
    ev = model_eval(work, delta);
    track(delta, ev.value);
  }
  sol.iterations = static_cast<int>(k);
  sol.converged = ev.gradient.norm() <= opts.tol;
  sol.delta = std::move(delta);
  detail::fill_residuals(model, lam_min, sol);
  return sol;
}

}  // namespace scrn
