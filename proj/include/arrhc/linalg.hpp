#pragma once

#include <Eigen/Dense>

namespace arrhc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense symmetric matrix. Construction rejects input that is not symmetric
/// to within 1e-12 * (1 + |m_ij|) and stores the exactly symmetrized average.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  static SymMatrix identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }

  const Matrix& matrix() const noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

 private:
  Matrix m_;
};

struct EigExtremes {
  double min;
  double max;
};

/// Full symmetric eigendecomposition, eigenvalues ascending, columns of
/// `vectors` orthonormal.
struct SymEigen {
  Vector values;
  Matrix vectors;
};

/// Smallest and largest eigenvalue. Closed form for n <= 2, cyclic Jacobi otherwise.
EigExtremes sym_eig_extremes(const SymMatrix& m);

/// Cyclic Jacobi rotations until the off-diagonal mass is below 1e-15 of the
/// Frobenius norm.
SymEigen sym_eig(const SymMatrix& m);

/// Max modulus over the (possibly complex) spectrum of a square matrix.
double spectral_radius(const Matrix& m);

/// Solves Abar^T P Abar - P = -Qbar for P.
///
/// Vectorized: (I - Abar^T kron Abar^T) vec(P) = vec(Qbar), Gaussian elimination
/// with partial pivoting plus one step of iterative refinement. Throws
/// InstabilityError when rho(Abar) >= 1.
SymMatrix solve_discrete_lyapunov(const Matrix& abar, const SymMatrix& qbar);

/// Max-norm of Abar^T P Abar - P + Qbar.
double lyapunov_residual(const Matrix& abar, const SymMatrix& p, const SymMatrix& qbar);

/// x^T M x, accumulated row by row in index order.
double quad_form(const Vector& x, const SymMatrix& m);

/// Gaussian elimination with partial pivoting. Throws DomainError if singular.
Vector solve_linear(Matrix a, Vector b);

bool is_positive_definite(const SymMatrix& m);

/// Stabilizing gain from discrete-time infinite-horizon LQ with state weight
/// `p` and input weight `q`, by Riccati value iteration to a 1e-12 relative
/// fixed point. Returns K with u = K x.
Matrix lq_gain(const Matrix& a, const Matrix& b, const SymMatrix& p, const SymMatrix& q);

}  // namespace arrhc
