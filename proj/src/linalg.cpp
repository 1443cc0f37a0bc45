#include "arrhc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "arrhc/errors.hpp"

namespace arrhc {

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DomainError("SymMatrix: expected a non-empty square matrix");
  }
  if (!m.allFinite()) throw DomainError("SymMatrix: non-finite entry");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-12 * (1.0 + std::abs(m(i, j)))) {
        throw DomainError("SymMatrix: input is not symmetric at (" + std::to_string(i) + ", " +
                          std::to_string(j) + ")");
      }
    }
  }
  m_ = 0.5 * (m + m.transpose());
}

SymEigen sym_eig(const SymMatrix& sym) {
  const Eigen::Index n = sym.dim();
  Matrix a = sym.matrix();
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(a.norm(), 1e-300);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(2.0 * off) <= 1e-15 * scale) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });

  SymEigen out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    out.vectors.col(k) = v.col(src);
  }
  return out;
}

EigExtremes sym_eig_extremes(const SymMatrix& m) {
  const Matrix& a = m.matrix();
  if (m.dim() == 1) return {a(0, 0), a(0, 0)};
  if (m.dim() == 2) {
    // (tr +- sqrt((a-d)^2 + 4b^2)) / 2, with the smaller root recovered from
    // det / larger root to avoid cancellation.
    const double tr = a(0, 0) + a(1, 1);
    const double disc = std::hypot(a(0, 0) - a(1, 1), 2.0 * a(0, 1));
    const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    if (tr >= 0) {
      const double hi = 0.5 * (tr + disc);
      const double lo = hi != 0.0 ? det / hi : 0.5 * (tr - disc);
      return {lo, hi};
    }
    const double lo = 0.5 * (tr - disc);
    const double hi = lo != 0.0 ? det / lo : 0.5 * (tr + disc);
    return {lo, hi};
  }
  const auto eig = sym_eig(m);
  return {eig.values(0), eig.values(eig.values.size() - 1)};
}

double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DomainError("spectral_radius: expected a non-empty square matrix");
  }
  if (m.rows() == 1) return std::abs(m(0, 0));
  if (m.rows() == 2) {
    const double tr = m(0, 0) + m(1, 1);
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    const double disc = tr * tr - 4.0 * det;
    if (disc < 0) return std::sqrt(std::abs(det));  // complex pair, |z|^2 = det
    const double r = std::sqrt(disc);
    return std::max(std::abs(0.5 * (tr + r)), std::abs(0.5 * (tr - r)));
  }
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw DomainError("spectral_radius: eigenvalue iteration failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Vector solve_linear(Matrix a, Vector b) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.size() != n) throw DomainError("solve_linear: dimension mismatch");
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index col = 0; col < n; ++col) {
    Eigen::Index piv = col;
    for (Eigen::Index r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (std::abs(a(piv, col)) <= 1e-14 * scale) throw DomainError("solve_linear: singular matrix");
    if (piv != col) {
      a.row(piv).swap(a.row(col));
      std::swap(b(piv), b(col));
    }
    for (Eigen::Index r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      a.row(r).tail(n - col) -= f * a.row(col).tail(n - col);
      b(r) -= f * b(col);
    }
  }
  Vector x(n);
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    double acc = b(r);
    for (Eigen::Index c = r + 1; c < n; ++c) acc -= a(r, c) * x(c);
    x(r) = acc / a(r, r);
  }
  return x;
}

SymMatrix solve_discrete_lyapunov(const Matrix& abar, const SymMatrix& qbar) {
  const Eigen::Index n = abar.rows();
  if (abar.cols() != n || qbar.dim() != n) {
    throw DomainError("solve_discrete_lyapunov: dimension mismatch");
  }
  const double rho = spectral_radius(abar);
  if (rho >= 1.0) {
    throw InstabilityError("solve_discrete_lyapunov: spectral radius " + std::to_string(rho) +
                           " >= 1");
  }
  // Column-major vec: vec(At P A) = (At kron At) vec(P).
  const Matrix at = abar.transpose();
  Matrix lhs = Matrix::Identity(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) lhs.block(i * n, j * n, n, n) -= at(i, j) * at;
  const Vector rhs = Eigen::Map<const Vector>(qbar.matrix().data(), n * n);

  Vector x = solve_linear(lhs, rhs);
  x += solve_linear(lhs, rhs - lhs * x);
  Matrix p = Eigen::Map<Matrix>(x.data(), n, n);
  return SymMatrix(0.5 * (p + p.transpose()));
}

double lyapunov_residual(const Matrix& abar, const SymMatrix& p, const SymMatrix& qbar) {
  const Matrix r = abar.transpose() * p.matrix() * abar - p.matrix() + qbar.matrix();
  return r.cwiseAbs().maxCoeff();
}

double quad_form(const Vector& x, const SymMatrix& m) {
  if (x.size() != m.dim()) throw DomainError("quad_form: dimension mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) row += m(i, j) * x(j);
    acc += x(i) * row;
  }
  return acc;
}

bool is_positive_definite(const SymMatrix& m) { return sym_eig_extremes(m).min > 0.0; }

Matrix lq_gain(const Matrix& a, const Matrix& b, const SymMatrix& p, const SymMatrix& q) {
  const Eigen::Index n = a.rows(), m = b.cols();
  if (a.cols() != n || b.rows() != n || p.dim() != n || q.dim() != m) {
    throw DomainError("lq_gain: dimension mismatch");
  }
  Matrix x = p.matrix();
  for (int it = 0; it < 100000; ++it) {
    const Matrix btx = b.transpose() * x;
    const Matrix gain = (q.matrix() + btx * b).ldlt().solve(btx * a);
    Matrix next = p.matrix() + a.transpose() * x * a - a.transpose() * x * b * gain;
    next = 0.5 * (next + next.transpose());
    const double change = (next - x).cwiseAbs().maxCoeff();
    x = std::move(next);
    if (!x.allFinite()) break;
    if (change <= 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
      const Matrix btx2 = b.transpose() * x;
      return -(q.matrix() + btx2 * b).ldlt().solve(btx2 * a);
    }
  }
  throw InstabilityError("lq_gain: Riccati iteration did not converge (pair not stabilizable?)");
}

}  // namespace arrhc
