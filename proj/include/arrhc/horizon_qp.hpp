#pragma once

#include <map>
#include <string_view>
#include <vector>

#include "arrhc/linalg.hpp"
#include "arrhc/plant.hpp"

namespace arrhc {

struct SolverSettings {
  double rho = 1.0;           ///< initial ADMM penalty
  double eps_feas = 1e-7;     ///< slack on x' Pbar x <= c and on the input box
  double eps_opt = 1e-8;      ///< primal/dual residual threshold, relative to |x|_inf
  int max_iterations = 50000;
  bool warm_start = true;     ///< seed from the auxiliary rollout when no guess is given
  /// Return the unconstrained finite-horizon LQ solution directly when it is
  /// feasible; it is then the exact constrained optimum.
  bool unconstrained_shortcut = true;
  bool adaptive_rho = true;
};

enum class QPStatus { optimal, max_iterations, infeasible };
std::string_view to_string(QPStatus s);

struct QPSolution {
  std::vector<Vector> inputs;  ///< u(k|k) ... u(k+N-1|k)
  std::vector<Vector> states;  ///< x(k|k) ... x(k+N|k), rebuilt from inputs
  double value = 0.0;          ///< objective on (states, inputs)
  QPStatus status = QPStatus::infeasible;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  double final_rho = 0.0;
  /// Scaled ADMM duals, kept for warm starting the next solve.
  std::vector<Vector> state_duals;
  std::vector<Vector> input_duals;
};

/// Initial guess for a solve: an input sequence plus optional duals.
struct WarmStart {
  std::vector<Vector> inputs;
  std::vector<Vector> state_duals;
  std::vector<Vector> input_duals;
  double rho = 0.0;
};

/// Shifted plan [u(1), ..., u(N-1), K x(N)] with duals shifted likewise.
WarmStart shift_warm_start(const SystemSpec& spec, const QPSolution& prev);

/// One N-QP: min sum_{t<N} |x_t|_P^2 + |u_t|_Q^2 + |x_N|_P^2 subject to the
/// dynamics, x_{t+1} in X0 and u_t in U.
struct QPInstance {
  SystemSpec spec;
  Vector x;
  int horizon;
};

QPInstance build_nqp(const SystemSpec& spec, const Vector& x, int horizon);

/// Stacked predictions X = Phi x + Gamma U (X = [x_1; ...; x_N]) and the
/// objective J(U) = 0.5 U' H U + g' U + constant.
struct CondensedForm {
  Matrix Phi;
  Matrix Gamma;
  Matrix H;
  Vector g;
  double constant = 0.0;
};

CondensedForm condense(const QPInstance& instance);

/// States of the open-loop trajectory driven by `inputs` from x.
std::vector<Vector> predict(const SystemSpec& spec, const Vector& x, const std::vector<Vector>& inputs);

/// N-QP objective for an input sequence.
double objective(const SystemSpec& spec, const Vector& x, const std::vector<Vector>& inputs);

/// Euclidean projection onto {x : x' Pbar x <= c}, reusing one eigendecomposition.
class EllipsoidProjector {
 public:
  EllipsoidProjector(const SymMatrix& pbar, double c);
  Vector project(const Vector& z) const;

 private:
  SymMatrix pbar_;
  SymEigen eig_;
  double c_;
};

Vector project_ellipsoid(const Vector& z, const SymMatrix& pbar, double c);

/// N-QP solver bound to one system. Caches Riccati factorizations of the
/// equality-constrained step for every penalty it visits, indexed by steps
/// to go, so one table serves all horizons. Not thread-safe; use one solver
/// per thread.
class HorizonSolver {
 public:
  explicit HorizonSolver(SystemSpec spec, SolverSettings settings = {});

  QPSolution solve(const Vector& x, int horizon, const WarmStart* warm = nullptr);

  /// V_N(x); throws SolverError unless the solve is optimal.
  double value(const Vector& x, int horizon);

  const SystemSpec& spec() const noexcept { return spec_; }
  const SolverSettings& settings() const noexcept { return settings_; }

 private:
  struct Stage {
    Matrix gain;      ///< K_j, m x n
    Matrix huu_inv;   ///< (W_u + B' S_{j-1} B)^{-1}
    Matrix hux_t;     ///< A' S_{j-1} B
  };
  struct Table {
    Matrix wx, wu;
    Matrix s_last;
    std::vector<Stage> stages;  ///< stages[j-1] for j steps to go
  };

  Table& table(double rho, int horizon);

  /// Solves the LQ problem with state/input weights 0.5 * W, linear terms
  /// q (t = 1..N, index t-1) and r (t = 0..N-1).
  void lq_solve(const Table& tab, const Vector& x, int horizon, const std::vector<Vector>& q,
                const std::vector<Vector>& r, std::vector<Vector>& states, std::vector<Vector>& inputs);

  bool feasible(const std::vector<Vector>& states, const std::vector<Vector>& inputs, double slack) const;
  QPSolution finish(const Vector& x, std::vector<Vector> inputs, QPStatus status) const;

  SystemSpec spec_;
  SolverSettings settings_;
  EllipsoidProjector projector_;
  std::map<double, Table> tables_;
};

QPSolution solve_nqp(const QPInstance& instance, const SolverSettings& settings = {});
double value_VN(const SystemSpec& spec, const Vector& x, int horizon, const SolverSettings& settings = {});

}  // namespace arrhc
