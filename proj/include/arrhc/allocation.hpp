#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace arrhc {

/// Security level as a function of total investment y = 1'M.
/// affine:   S(y) = sigma0 + sigma1 y
/// softplus: S(y) = sigma0 + sigma1 log(1 + exp(kappa (y - y0))) / kappa
struct SecurityMap {
  enum class Kind { affine, softplus };
  Kind kind = Kind::affine;
  double sigma0 = 0.0;
  double sigma1 = 1.0;
  double kappa = 1.0;
  double y0 = 0.0;

  struct Eval {
    double value, d1, d2;
  };
  /// Throws DomainError for y < 0.
  Eval eval(double y) const;
  double operator()(double y) const { return eval(y).value; }
  /// Largest y in [0, y_hi] with S(y) <= level, by bisection; -1 if S(0) > level.
  double max_total(double level, double y_hi) const;
};

struct Player {
  std::string name;
  double psi = 0.0;
  double chi = 0.5;
  int N = 1;
  double a = 1.0;
  double M_min = 0.0;
  double M_max = 1.0;
  std::optional<int> Sstar;  ///< own attack budget S*(N), when known
};

struct AllocationProblem {
  std::vector<Player> players;
  SecurityMap map;
  double cap = 0.0;  ///< upper bound on S(1'M)

  std::size_t size() const noexcept { return players.size(); }
  /// Throws DomainError on invalid data (chi outside (0, 1), a <= 0, ...).
  void validate() const;
  /// Largest total investment the cap allows.
  double max_total() const;
  bool feasible(const std::vector<double>& M, double slack = 1e-9) const;
};

/// Reads players either from numbers (psi, chi, N, ...) or from an inline
/// system description under "spec", from which psi, chi and S*(N) are
/// derived. The cap defaults to the smallest S* among the players.
AllocationProblem problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const AllocationProblem& p);

double total_investment(const std::vector<double>& M);

/// (1 + psi chi^{N - S})^{S + 1} + a M_i^2 / 2 with S = S(1'M), real-valued.
double cost_Ci(const AllocationProblem& p, std::size_t i, const std::vector<double>& M);
/// Exact dC_i/dM_i.
double grad_Ci(const AllocationProblem& p, std::size_t i, const std::vector<double>& M);
/// Exact d^2 C_i/dM_i^2.
double hess_Ci(const AllocationProblem& p, std::size_t i, const std::vector<double>& M);
/// The printed closed form, which carries (dS/dy)^2 instead of the chain-rule
/// terms. Kept for comparison only.
double printed_grad_Ci(const AllocationProblem& p, std::size_t i, const std::vector<double>& M);
double total_cost(const AllocationProblem& p, const std::vector<double>& M);

struct ConvexityReport {
  int points = 0;
  double min_second_difference = 0.0;
  std::vector<std::pair<double, double>> violations;  ///< (M_i, second difference)
  bool clean() const noexcept { return violations.empty(); }
};

/// Second differences of C_i along M_i over `grid` points spanning
/// player i's box, others held at M.
ConvexityReport check_convexity(const AllocationProblem& p, std::size_t i, const std::vector<double>& M,
                                int grid = 200);

struct AllocationResult {
  std::vector<double> M;
  std::vector<double> costs;
  double total = 0.0;
  double residual = 0.0;  ///< first-order optimality residual
  int rounds = 0;
  bool converged = false;
};

/// Cyclic best response. Each player minimizes C_i over
/// [M_min, min(M_max, Y - sum of others)] where Y is max_total(). Starts at
/// the box midpoint shrunk toward M_min until feasible. Throws
/// InfeasibleAllocation when even M_min violates the cap.
AllocationResult solve_nash(const AllocationProblem& p, double tol = 1e-10, int max_rounds = 10000);

/// Projected gradient on sum_i C_i over box intersected with 1'M <= Y, with
/// backtracking and exact projection.
AllocationResult solve_social(const AllocationProblem& p, double tol = 1e-10, int max_iter = 100000);

/// Euclidean projection onto {lo <= M <= hi, 1'M <= Y}.
std::vector<double> project_budget(const std::vector<double>& z, const std::vector<double>& lo,
                                   const std::vector<double>& hi, double Y);

nlohmann::json result_to_json(const AllocationProblem& p, const AllocationResult& r);

}  // namespace arrhc
