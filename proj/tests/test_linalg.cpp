#include <random>

#include <gtest/gtest.h>

#include "scrn/linalg.hpp"

using scrn::ErrorCode;
using scrn::Mat;
using scrn::SymMat;
using scrn::Vec;

namespace {

SymMat random_sym(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Mat m(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = u(rng);
  return SymMat::symmetrized(m);
}

void expect_code(ErrorCode code, auto&& fn) {
  try {
    fn();
    FAIL() << "expected " << scrn::to_string(code);
  } catch (const scrn::Error& e) {
    EXPECT_EQ(e.code(), code);
  }
}

}  // namespace

TEST(SymMatrix, RejectsAsymmetricAndNonSquare) {
  Mat a(2, 2);
  a << 1, 2, 3, 4;
  expect_code(ErrorCode::BadSpec, [&] { SymMat s(a); });
  expect_code(ErrorCode::DimMismatch, [&] { SymMat s(Mat::Zero(2, 3)); });
  expect_code(ErrorCode::DimMismatch, [&] { SymMat s(Mat::Zero(0, 0)); });
}

TEST(SymEig, DiagonalCase) {
  const auto eig = scrn::sym_eig(SymMat::diagonal(Vec::Map(std::vector<double>{5, 2}.data(), 2)));
  EXPECT_DOUBLE_EQ(eig.eigenvalues(0), 2.0);
  EXPECT_DOUBLE_EQ(eig.eigenvalues(1), 5.0);
  EXPECT_NEAR(std::abs(eig.eigenvectors(1, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(eig.eigenvectors(0, 1)), 1.0, 1e-15);
}

TEST(SymEig, SwapMatrix) {
  Mat a(2, 2);
  a << 0, 1, 1, 0;
  const auto eig = scrn::sym_eig(SymMat(a));
  EXPECT_NEAR(eig.eigenvalues(0), -1.0, 1e-14);
  EXPECT_NEAR(eig.eigenvalues(1), 1.0, 1e-14);
}

TEST(SymEig, ReconstructionAndOrthonormality) {
  for (int n : {1, 2, 5, 12, 40}) {
    for (unsigned seed : {7u, 8u, 9u}) {
      const SymMat a = random_sym(n, seed);
      for (auto solver : {scrn::EigSolver::Jacobi, scrn::EigSolver::Tridiagonal}) {
        const auto eig = scrn::sym_eig(a, solver);
        const Mat& q = eig.eigenvectors;
        const double scale = std::max(1.0, a.matrix().cwiseAbs().maxCoeff());
        EXPECT_LE((q.transpose() * q - Mat::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((q * eig.eigenvalues.asDiagonal() * q.transpose() - a.matrix()).cwiseAbs().maxCoeff(),
                  1e-8 * scale);
        for (int i = 1; i < n; ++i) EXPECT_LE(eig.eigenvalues(i - 1), eig.eigenvalues(i));
      }
    }
  }
}

TEST(SymEig, NonFinite) {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = std::numeric_limits<double>::quiet_NaN();
  expect_code(ErrorCode::NonFinite, [&] { scrn::sym_eig(SymMat(a)); });
  expect_code(ErrorCode::NonFinite, [&] { scrn::operator_norm(SymMat(a)); });
}

TEST(OperatorNorm, Examples) {
  Vec d(2);
  d << 3, -4;
  EXPECT_DOUBLE_EQ(scrn::operator_norm(SymMat::diagonal(d)), 4.0);
  EXPECT_DOUBLE_EQ(scrn::operator_norm(SymMat::zero(3)), 0.0);
  Mat a(2, 2);
  a << 2, 1, 1, 2;
  EXPECT_NEAR(scrn::operator_norm(SymMat(a)), 3.0, 1e-14);
}

TEST(OperatorNorm, MatchesSampledRayleighQuotients) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (int n : {1, 2, 3, 4}) {
    const SymMat a = random_sym(n, 100 + n);
    const double norm = scrn::operator_norm(a);
    // the extreme eigenvectors attain the norm; random directions never exceed it
    double sampled = 0;
    for (int k = 0; k < 2000; ++k) {
      Vec v(n);
      for (int i = 0; i < n; ++i) v(i) = normal(rng);
      v.normalize();
      const double r = std::abs(v.dot(a * v));
      EXPECT_LE(r, norm * (1 + 1e-12));
      sampled = std::max(sampled, r);
    }
    const auto eig = scrn::sym_eig(a);
    const int top = std::abs(eig.eigenvalues(0)) > std::abs(eig.eigenvalues(n - 1)) ? 0 : n - 1;
    const Vec v = eig.eigenvectors.col(top);
    sampled = std::max(sampled, std::abs(v.dot(a * v)));
    EXPECT_NEAR(sampled, norm, 1e-6 * std::max(1.0, norm));
    if (n <= 2) EXPECT_GE(sampled, norm * (1 - 1e-3));
  }
}

TEST(SolveShifted, Examples) {
  Vec d(2);
  d << 1, 2;
  Vec b(2);
  b << 2, 6;
  const Vec x = scrn::solve_shifted(SymMat::diagonal(d), 1.0, b);
  EXPECT_NEAR(x(0), 1.0, 1e-15);
  EXPECT_NEAR(x(1), 2.0, 1e-15);

  const Vec y = scrn::solve_shifted(SymMat::zero(1), 4.0, Vec::Constant(1, 8.0));
  EXPECT_DOUBLE_EQ(y(0), 2.0);
}

TEST(SolveShifted, ResidualOnSeededCases) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 6;
    const SymMat a = random_sym(n, 500 + trial);
    const double shift = u(rng);
    Vec b(n);
    for (int i = 0; i < n; ++i) b(i) = u(rng);
    Vec x;
    try {
      x = scrn::solve_shifted(a, shift, b);
    } catch (const scrn::Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::SingularShift);
      continue;
    }
    EXPECT_LE((a * x + shift * x - b).norm(), 1e-9 * std::max(1.0, b.norm()));
  }
}

TEST(SolveShifted, Singular) {
  Vec d(2);
  d << 1, -2;
  expect_code(ErrorCode::SingularShift, [&] { scrn::solve_shifted(SymMat::diagonal(d), 2.0, Vec::Ones(2)); });
  expect_code(ErrorCode::DimMismatch, [&] { scrn::solve_shifted(SymMat::diagonal(d), 1.0, Vec::Ones(3)); });
}
