#include <cmath>

#include "doctest.h"
#include "arrhc/errors.hpp"
#include "arrhc/linalg.hpp"
#include "test_util.hpp"

using namespace arrhc;
using arrhc::test::random_spd;
using arrhc::test::random_stable;

TEST_CASE("SymMatrix rejects asymmetric input") {
  CHECK_THROWS_AS(SymMatrix((Matrix(2, 2) << 1, 2, 3, 4).finished()), DomainError);
  CHECK_NOTHROW(SymMatrix((Matrix(2, 2) << 1, 2, 2 + 1e-14, 4).finished()));
}

TEST_CASE("sym_eig_extremes: closed forms and known values") {
  auto id = sym_eig_extremes(SymMatrix::identity(3));
  CHECK(id.min == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(id.max == doctest::Approx(1.0).epsilon(1e-14));

  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 2, 5;
  auto de = sym_eig_extremes(SymMatrix(d));
  CHECK(de.min == 2.0);
  CHECK(de.max == 5.0);

  // Printed reference Pbar; values frozen from (tr -+ sqrt(tr^2 - 4 det)) / 2.
  const Matrix pb = (Matrix(2, 2) << 25.6667, 13.3333, 13.3333, 8.2963).finished();
  auto e = sym_eig_extremes(SymMatrix(pb));
  CHECK(std::abs(e.min - 1.0689393031793912) <= 1e-12);
  CHECK(std::abs(e.max - 32.89406069682061) <= 1e-12);
}

TEST_CASE("sym_eig_extremes: Jacobi agrees with a library eigensolver for n >= 3") {
  XorShift64Star rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<Eigen::Index>(3 + trial % 5);
    const Matrix g = arrhc::test::random_matrix(rng, n, n);
    const SymMatrix s(g + g.transpose());
    const auto e = sym_eig_extremes(s);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(s.matrix());
    const double scale = ref.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(std::abs(e.min - ref.eigenvalues()(0)) <= 1e-10 * scale);
    CHECK(std::abs(e.max - ref.eigenvalues()(n - 1)) <= 1e-10 * scale);
    const auto full = sym_eig(s);
    CHECK((full.vectors.transpose() * full.vectors - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((full.vectors * full.values.asDiagonal() * full.vectors.transpose() - s.matrix()).cwiseAbs().maxCoeff() <
          1e-10 * scale);
  }
}

TEST_CASE("eigen bounds sandwich the Rayleigh quotient") {
  XorShift64Star rng(5);
  for (Eigen::Index n : {1, 2, 3, 4}) {
    const SymMatrix m = random_spd(rng, n);
    const auto e = sym_eig_extremes(m);
    CHECK(e.min <= e.max);
    for (int k = 0; k < 1000; ++k) {
      Vector v(n);
      for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.normal();
      v.normalize();
      const double r = quad_form(v, m);
      CHECK(r >= e.min - 1e-9);
      CHECK(r <= e.max + 1e-9);
    }
  }
}

TEST_CASE("spectral_radius") {
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 0.5, -0.25;
  CHECK(spectral_radius(d) == doctest::Approx(0.5).epsilon(1e-14));

  const double th = 0.7;
  const Matrix rot = 0.9 * (Matrix(2, 2) << std::cos(th), -std::sin(th), std::sin(th), std::cos(th)).finished();
  CHECK(spectral_radius(rot) == doctest::Approx(0.9).epsilon(1e-12));

  // A + B K for the printed example gain: eigenvalues of [[-4.5, -5], [-2.25, -1]]
  // by the 2x2 characteristic polynomial t^2 + 5.5 t - 6.75.
  const Matrix abar = (Matrix(2, 2) << -4.5, -5, -2.25, -1).finished();
  const double oracle = (5.5 + std::sqrt(5.5 * 5.5 + 4 * 6.75)) / 2;
  CHECK(std::abs(spectral_radius(abar) - oracle) <= 1e-8 * oracle);

  Matrix three = Matrix::Zero(3, 3);
  three(0, 1) = 1;
  three(1, 2) = 1;
  three(2, 0) = 0.125;  // companion of t^3 - 1/8: all roots of modulus 0.5
  CHECK(spectral_radius(three) == doctest::Approx(0.5).epsilon(1e-8));

  CHECK_THROWS_AS(spectral_radius(Matrix::Zero(2, 3)), DomainError);
}

TEST_CASE("solve_discrete_lyapunov: trivial cases") {
  auto p0 = solve_discrete_lyapunov(Matrix::Zero(2, 2), SymMatrix::identity(2));
  CHECK((p0.matrix() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);

  auto p1 = solve_discrete_lyapunov(Matrix::Constant(1, 1, 0.5), SymMatrix::identity(1));
  CHECK(p1(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));

  CHECK_THROWS_AS(solve_discrete_lyapunov(Matrix::Constant(1, 1, 1.5), SymMatrix::identity(1)), InstabilityError);
  CHECK_THROWS_AS(solve_discrete_lyapunov(Matrix::Zero(2, 2), SymMatrix::identity(3)), DomainError);
}

TEST_CASE("solve_discrete_lyapunov agrees with the truncated series oracle") {
  XorShift64Star rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + trial % 4);
    const Matrix a = random_stable(rng, n, 0.85);
    const SymMatrix q = trial % 2 ? SymMatrix::identity(n) : random_spd(rng, n);
    const SymMatrix p = solve_discrete_lyapunov(a, q);
    CHECK(lyapunov_residual(a, p, q) <= 1e-9);

    // sum_{t >= 0} (A^T)^t Q A^t; 0.85^400 is far below double epsilon.
    Matrix series = Matrix::Zero(n, n);
    Matrix term = q.matrix();
    for (int t = 0; t < 400; ++t) {
      series += term;
      term = a.transpose() * term * a;
    }
    CHECK((series - p.matrix()).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(is_positive_definite(p));
  }
}

TEST_CASE("quad_form") {
  CHECK(quad_form((Vector(2) << 1, 0).finished(), SymMatrix::identity(2)) == 1.0);
  CHECK(quad_form(Vector::Zero(2), SymMatrix::identity(2)) == 0.0);
  CHECK(quad_form((Vector(2) << 1, 1).finished(), SymMatrix((Matrix(2, 2) << 2, 1, 1, 2).finished())) == 6.0);
  CHECK_THROWS_AS(quad_form(Vector::Zero(3), SymMatrix::identity(2)), DomainError);
}

TEST_CASE("lq_gain stabilizes the example plant") {
  const auto p = demo_params();
  const Matrix k = lq_gain(p.A, p.B, SymMatrix(p.P), SymMatrix(p.Q));
  CHECK(spectral_radius(p.A + p.B * k) < 1.0);
}
