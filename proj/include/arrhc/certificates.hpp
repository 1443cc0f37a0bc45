#pragma once

#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "arrhc/linalg.hpp"
#include "arrhc/plant.hpp"

namespace arrhc {

/// proof: 1 - lmin(Qbar)/lmax(Pbar), which is what W(Abar x) <= lambda W(x)
/// needs. table: 1 - lmax(Qbar)/lmin(Pbar).
enum class LambdaMode { proof, table };
std::string_view to_string(LambdaMode m);
LambdaMode lambda_mode_from_string(std::string_view s);

/// Throws CertificateInvalid if the result is not in (0, 1).
double compute_lambda(const SymMatrix& Qbar, const SymMatrix& Pbar, LambdaMode mode);
double compute_lambda(const SystemSpec& spec, LambdaMode mode = LambdaMode::proof);

/// lmax(Pbar) lmax(P + K'QK) / lmin(Pbar).
double phi_prefactor(const SystemSpec& spec);
double compute_phi(const SystemSpec& spec, int N, double lambda);
double compute_phi_inf(const SystemSpec& spec, double lambda);

/// Explicit horizon bounds from (chi, psi). S >= 2.
double pi_E(double chi, double psi, int S);
double pi_A(double chi, double psi, int S);

/// All stability constants of one system. alpha is tabulated in log space
/// up to `max_horizon`; anything indexed beyond that throws DomainError.
class CertificateSet {
 public:
  static constexpr int kDefaultMaxHorizon = 10000;

  explicit CertificateSet(const SystemSpec& spec, LambdaMode mode = LambdaMode::proof,
                          int max_horizon = kDefaultMaxHorizon);

  LambdaMode mode() const noexcept { return mode_; }
  int max_horizon() const noexcept { return max_horizon_; }
  double lambda() const noexcept { return lambda_; }
  double lambda_min_P() const noexcept { return lmin_p_; }
  double phi(int N) const;
  double phi_inf() const noexcept { return phi_inf_; }
  /// 1 - lmin(P)/phi_inf
  double chi() const noexcept { return chi_; }
  /// lmax(K'QK + Abar'P Abar)/lmin(P)
  double psi() const noexcept { return psi_; }

  double alpha(int N) const;
  double log1p_alpha(int N) const;
  double rho(int N) const;               ///< N >= 2
  double gamma(int N, int S) const;      ///< N >= S + 2
  double gamma_hat(int N, int S) const;  ///< S >= 1, N >= S + 3
  double beta(int N, int S) const;       ///< N >= S + 2
  double PiE(int S) const { return pi_E(chi_, psi_, S); }
  double PiA(int S) const { return pi_A(chi_, psi_, S); }

  /// Smallest N0 >= S + 2 with gamma(N, S) < 1 for every N in [N0, N_cap].
  /// Throws NotFoundError carrying the smallest rate seen.
  int Nstar(int S, int N_cap = kDefaultNCap) const;
  /// Same for gamma_hat with N0 >= S + 3.
  int Nhat_star(int S, int N_cap = kDefaultNCap) const;
  /// Largest S with gamma(N, s) < 1 for all 1 <= s <= S, or 0.
  int Sstar(int N) const;
  int Shat_star(int N) const;

  static constexpr int kDefaultNCap = 6000;

 private:
  void check_index(int N, const char* what) const;

  LambdaMode mode_;
  int max_horizon_;
  double lambda_, prefactor_, phi_inf_, lmin_p_, chi_, psi_;
  std::vector<double> log_alpha_;  ///< index N = 1..max_horizon
  std::vector<double> log1p_alpha_;
};

/// V_N(x0)/(1 - gamma_{N,S}). Throws NoCertificateError when gamma >= 1.
double cost_bound(const SystemSpec& spec, const CertificateSet& cs, const Vector& x0, int N, int S);

/// Grid report for the certify command: per-(N, S) constants plus the
/// per-S horizons and per-N attack budgets.
nlohmann::json certificate_report(const CertificateSet& cs, const std::vector<int>& Ns,
                                  const std::vector<int>& Ss, int N_cap);
std::string render_certificate_table(const nlohmann::json& report);

}  // namespace arrhc
