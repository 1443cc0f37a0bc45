#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arrhc/linalg.hpp"
#include "arrhc/rng.hpp"

namespace arrhc {

/// Raw plant description as read from a config file. Nothing here is
/// validated; see SystemSpec::validate.
struct SystemParams {
  Matrix A;
  Matrix B;
  Matrix K;
  Matrix P;
  Matrix Q;
  Matrix Qbar;
  double c = 0.0;
  double u_max = 0.0;
  /// Optional reference value for Pbar carried by a config file. Used only
  /// for reporting; the validated spec always recomputes Pbar.
  std::optional<Matrix> Pbar_reference;
};

SystemParams params_from_json(const nlohmann::json& j);
nlohmann::json params_to_json(const SystemParams& p);

enum class GainRepair { off, lq };

/// One entry of the validation report.
struct SpecCheck {
  std::string name;
  bool passed;
  std::string detail;
};

/// Validated constrained LTI plant x+ = A x + B u with auxiliary gain K,
/// running-cost weights P, Q, Lyapunov pair (Qbar, Pbar), X0 = {x' Pbar x <= c}
/// and U = {|u|_inf <= u_max}. Immutable once built.
class SystemSpec {
 public:
  /// Throws InvalidSpecError (or InstabilityError) on the first violated
  /// invariant. With GainRepair::lq an unstable K is replaced by the LQ gain
  /// for weights (P, Q); `log`, if given, receives the validation report.
  static SystemSpec validate(const SystemParams& params, GainRepair repair = GainRepair::off,
                             std::vector<SpecCheck>* log = nullptr);

  const Matrix& A() const noexcept { return a_; }
  const Matrix& B() const noexcept { return b_; }
  const Matrix& K() const noexcept { return k_; }
  const Matrix& Abar() const noexcept { return abar_; }
  const SymMatrix& P() const noexcept { return p_; }
  const SymMatrix& Q() const noexcept { return q_; }
  const SymMatrix& Qbar() const noexcept { return qbar_; }
  const SymMatrix& Pbar() const noexcept { return pbar_; }
  double c() const noexcept { return c_; }
  double u_max() const noexcept { return u_max_; }
  Eigen::Index n() const noexcept { return a_.rows(); }
  Eigen::Index m() const noexcept { return b_.cols(); }
  bool gain_repaired() const noexcept { return gain_repaired_; }

  /// The parameters this spec was built from, with K replaced if repaired.
  SystemParams params() const;

 private:
  SystemSpec() = default;

  Matrix a_, b_, k_, abar_;
  SymMatrix p_, q_, qbar_, pbar_;
  double c_ = 0.0;
  double u_max_ = 0.0;
  bool gain_repaired_ = false;
};

/// Generic Pbar-ellipsoid membership slack for X0 tests.
inline constexpr double kX0Slack = 1e-9;

Vector step(const SystemSpec& spec, const Vector& x, const Vector& u);

struct X0Membership {
  bool inside;
  double margin;  ///< c - x' Pbar x
};

X0Membership in_X0(const SystemSpec& spec, const Vector& x);

struct Rollout {
  std::vector<Vector> states;  ///< N + 1 entries
  std::vector<Vector> inputs;  ///< N entries
};

/// Trajectory of the auxiliary controller u = K x from x. Throws
/// InfeasibleSeedError if x is outside X0.
Rollout aux_rollout(const SystemSpec& spec, const Vector& x, int horizon);

/// sqrt(c * K_j Pbar^{-1} K_j^T) for every input row j: the exact maximum of
/// |K_j x| over X0.
Vector max_aux_input_over_X0(const SystemSpec& spec);

/// Uniform sample of the ellipsoid {x' Pbar x <= scale^2 * c}. With
/// `on_boundary` the radius is fixed at `scale`.
Vector sample_X0(const SystemSpec& spec, XorShift64Star& rng, double scale = 1.0,
                 bool on_boundary = false);

/// The constrained example system used throughout the docs and acceptance
/// runs, with its printed (unstable) gain.
SystemParams demo_params();

}  // namespace arrhc
