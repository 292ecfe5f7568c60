#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Jacobi>

#include "scrn/error.hpp"

namespace scrn {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = Vector<double>;
using Mat = Matrix<double>;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

/// Dense symmetric matrix. Construction checks squareness and symmetry to
/// 1e-12 absolute; non-finite entries are let through so that the
/// factorizations can report them as NonFinite.
template <typename Scalar>
class SymMatrix {
 public:
  static constexpr double kSymmetryTol = 1e-12;

  SymMatrix() : m_(Matrix<Scalar>::Zero(1, 1)) {}

  explicit SymMatrix(Matrix<Scalar> m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) {
      throw Error(ErrorCode::DimMismatch, "SymMatrix requires a square matrix");
    }
    if (m_.rows() < 1) throw Error(ErrorCode::DimMismatch, "SymMatrix requires dim >= 1");
    for (Eigen::Index j = 0; j < m_.cols(); ++j) {
      for (Eigen::Index i = j + 1; i < m_.rows(); ++i) {
        const Scalar a = m_(i, j);
        const Scalar b = m_(j, i);
        if (std::isfinite(a) && std::isfinite(b) && !(std::abs(a - b) <= kSymmetryTol)) {
          throw Error(ErrorCode::BadSpec, "matrix is not symmetric");
        }
      }
    }
  }

  /// (m + mᵀ)/2, exactly symmetric.
  template <typename Derived>
  static SymMatrix symmetrized(const Eigen::MatrixBase<Derived>& m) {
    Matrix<Scalar> s = (m + m.transpose()) / Scalar(2);
    return SymMatrix(std::move(s));
  }

  static SymMatrix zero(Eigen::Index n) { return SymMatrix(Matrix<Scalar>::Zero(n, n)); }
  static SymMatrix identity(Eigen::Index n) { return SymMatrix(Matrix<Scalar>::Identity(n, n)); }
  static SymMatrix diagonal(const Vector<Scalar>& d) {
    return SymMatrix(Matrix<Scalar>(d.asDiagonal()));
  }

  Eigen::Index dim() const { return m_.rows(); }
  const Matrix<Scalar>& matrix() const { return m_; }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  SymMatrix& operator+=(const SymMatrix& o) {
    check_dim(o);
    m_ += o.m_;
    return *this;
  }
  SymMatrix& operator-=(const SymMatrix& o) {
    check_dim(o);
    m_ -= o.m_;
    return *this;
  }
  SymMatrix& operator*=(Scalar c) {
    m_ *= c;
    return *this;
  }
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(Scalar c, SymMatrix a) { return a *= c; }
  friend Vector<Scalar> operator*(const SymMatrix& a, const Vector<Scalar>& x) {
    if (a.dim() != x.size()) throw Error(ErrorCode::DimMismatch, "matrix-vector size mismatch");
    return a.m_ * x;
  }

  bool operator==(const SymMatrix& o) const {
    return m_.rows() == o.m_.rows() && m_ == o.m_;
  }

 private:
  void check_dim(const SymMatrix& o) const {
    if (o.dim() != dim()) throw Error(ErrorCode::DimMismatch, "SymMatrix dimension mismatch");
  }

  Matrix<Scalar> m_;
};

using SymMat = SymMatrix<double>;

template <typename Scalar>
struct EigDecomposition {
  Vector<Scalar> eigenvalues;   // ascending
  Matrix<Scalar> eigenvectors;  // orthonormal columns, column i pairs with eigenvalues(i)
};

enum class EigSolver {
  Jacobi,       // cyclic Jacobi rotations
  Tridiagonal,  // Householder tridiagonalization + implicit QR (Eigen)
  Auto,         // Jacobi up to kAutoJacobiMaxDim, Tridiagonal beyond
};

inline constexpr Eigen::Index kAutoJacobiMaxDim = 64;

namespace detail {

template <typename Scalar>
void sort_ascending(EigDecomposition<Scalar>& eig) {
  const Eigen::Index n = eig.eigenvalues.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return eig.eigenvalues(a) < eig.eigenvalues(b);
  });
  Vector<Scalar> values(n);
  Matrix<Scalar> vectors(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    values(k) = eig.eigenvalues(order[static_cast<std::size_t>(k)]);
    vectors.col(k) = eig.eigenvectors.col(order[static_cast<std::size_t>(k)]);
  }
  eig.eigenvalues = std::move(values);
  eig.eigenvectors = std::move(vectors);
}

template <typename Scalar>
EigDecomposition<Scalar> jacobi_eig(const Matrix<Scalar>& input) {
  constexpr int kMaxSweeps = 100;
  const Eigen::Index n = input.rows();
  Matrix<Scalar> a = input;
  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar scale = std::max(a.cwiseAbs().maxCoeff(), std::numeric_limits<Scalar>::min());

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    Scalar off = 0;
    for (Eigen::Index q = 1; q < n; ++q) {
      for (Eigen::Index p = 0; p < q; ++p) off = std::max(off, std::abs(a(p, q)));
    }
    if (off <= eps * scale * Scalar(0.5)) break;

    for (Eigen::Index q = 1; q < n; ++q) {
      for (Eigen::Index p = 0; p < q; ++p) {
        if (std::abs(a(p, q)) <= eps * eps * scale) {
          a(p, q) = a(q, p) = 0;
          continue;
        }
        Eigen::JacobiRotation<Scalar> rot;
        rot.makeJacobi(a, p, q);
        a.applyOnTheLeft(p, q, rot.adjoint());
        a.applyOnTheRight(p, q, rot);
        v.applyOnTheRight(p, q, rot);
        a(p, q) = a(q, p) = 0;
      }
    }
  }
  EigDecomposition<Scalar> out{a.diagonal(), std::move(v)};
  sort_ascending(out);
  return out;
}

}  // namespace detail

/// Symmetric eigendecomposition. Eigenvalues ascending, eigenvectors
/// orthonormal; throws NonFinite on NaN/Inf input.
template <typename Scalar>
EigDecomposition<Scalar> sym_eig(const SymMatrix<Scalar>& a, EigSolver solver = EigSolver::Jacobi) {
  if (!all_finite(a.matrix())) throw Error(ErrorCode::NonFinite, "sym_eig input has non-finite entries");
  if (solver == EigSolver::Auto) {
    solver = a.dim() <= kAutoJacobiMaxDim ? EigSolver::Jacobi : EigSolver::Tridiagonal;
  }
  if (solver == EigSolver::Jacobi) return detail::jacobi_eig(a.matrix());

  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(a.matrix());
  EigDecomposition<Scalar> out{es.eigenvalues(), es.eigenvectors()};
  detail::sort_ascending(out);
  return out;
}

/// Spectral norm max|λ|.
template <typename Scalar>
Scalar operator_norm(const SymMatrix<Scalar>& a, EigSolver solver = EigSolver::Jacobi) {
  const auto eig = sym_eig(a, solver);
  return std::max(std::abs(eig.eigenvalues(0)), std::abs(eig.eigenvalues(eig.eigenvalues.size() - 1)));
}

/// Solves (A + shift·I) x = b. Throws SingularShift when some eigenvalue of
/// the shifted matrix is within 1e-12·max(1, ‖A‖) of zero.
template <typename Scalar>
Vector<Scalar> solve_shifted(const SymMatrix<Scalar>& a, std::type_identity_t<Scalar> shift,
                             const std::type_identity_t<Vector<Scalar>>& b,
                             EigSolver solver = EigSolver::Jacobi) {
  if (b.size() != a.dim()) throw Error(ErrorCode::DimMismatch, "solve_shifted: rhs size mismatch");
  if (!std::isfinite(shift) || !all_finite(b)) {
    throw Error(ErrorCode::NonFinite, "solve_shifted: non-finite shift or rhs");
  }
  const auto eig = sym_eig(a, solver);
  const Eigen::Index n = a.dim();
  const Scalar norm_a = std::max(std::abs(eig.eigenvalues(0)), std::abs(eig.eigenvalues(n - 1)));
  const Vector<Scalar> shifted = eig.eigenvalues.array() + shift;
  if (shifted.cwiseAbs().minCoeff() <= Scalar(1e-12) * std::max(Scalar(1), norm_a)) {
    throw Error(ErrorCode::SingularShift, "shifted matrix is numerically singular");
  }
  const auto& q = eig.eigenvectors;
  auto apply_inverse = [&](const Vector<Scalar>& rhs) -> Vector<Scalar> {
    return q * (q.transpose() * rhs).cwiseQuotient(shifted);
  };
  Vector<Scalar> x = apply_inverse(b);
  // one step of iterative refinement against the original matrix
  const Vector<Scalar> residual = b - (a.matrix() * x + shift * x);
  x += apply_inverse(residual);
  return x;
}

}  // namespace scrn
