#include "arrhc/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "arrhc/errors.hpp"
#include "arrhc/horizon_qp.hpp"

namespace arrhc {

std::string_view to_string(LambdaMode m) { return m == LambdaMode::proof ? "proof" : "table"; }

LambdaMode lambda_mode_from_string(std::string_view s) {
  if (s == "proof") return LambdaMode::proof;
  if (s == "table") return LambdaMode::table;
  throw DomainError("unknown lambda mode '" + std::string(s) + "'");
}

double compute_lambda(const SymMatrix& Qbar, const SymMatrix& Pbar, LambdaMode mode) {
  const auto q = sym_eig_extremes(Qbar);
  const auto p = sym_eig_extremes(Pbar);
  const double lambda = mode == LambdaMode::proof ? 1.0 - q.min / p.max : 1.0 - q.max / p.min;
  if (!(lambda > 0.0 && lambda < 1.0))
    throw CertificateInvalid("lambda (" + std::string(to_string(mode)) + " mode) = " + std::to_string(lambda) +
                             " is not in (0, 1)");
  return lambda;
}

double compute_lambda(const SystemSpec& spec, LambdaMode mode) { return compute_lambda(spec.Qbar(), spec.Pbar(), mode); }

double phi_prefactor(const SystemSpec& spec) {
  const Matrix pk = spec.P().matrix() + spec.K().transpose() * spec.Q().matrix() * spec.K();
  const auto pb = sym_eig_extremes(spec.Pbar());
  return pb.max * sym_eig_extremes(SymMatrix(0.5 * (pk + pk.transpose()))).max / pb.min;
}

double compute_phi(const SystemSpec& spec, int N, double lambda) {
  if (N < 1) throw DomainError("phi: N must be at least 1");
  // (1 - lambda^{N+1})/(1 - lambda) = sum_{tau=0}^{N} lambda^tau
  return phi_prefactor(spec) * -std::expm1((N + 1) * std::log(lambda)) / (1.0 - lambda);
}

double compute_phi_inf(const SystemSpec& spec, double lambda) { return phi_prefactor(spec) / (1.0 - lambda); }

double pi_E(double chi, double psi, int S) {
  if (S < 2) throw DomainError("PiE: S must be at least 2");
  if (!(chi > 0 && chi < 1) || !(psi > 0)) throw DomainError("PiE: need chi in (0, 1) and psi > 0");
  const double lc = std::log(chi);
  return S + 1 + (std::log(std::expm1(-lc / (S + 2))) - std::log(psi)) / lc;
}

double pi_A(double chi, double psi, int S) {
  if (S < 2) throw DomainError("PiA: S must be at least 2");
  if (!(chi > 0 && chi < 1) || !(psi > 0)) throw DomainError("PiA: need chi in (0, 1) and psi > 0");
  const double lc = std::log(chi);
  return S + 1 + (std::log(std::expm1(-lc * (S + 1) / (2 * S + 1))) - std::log(psi)) / lc;
}

CertificateSet::CertificateSet(const SystemSpec& spec, LambdaMode mode, int max_horizon)
    : mode_(mode), max_horizon_(max_horizon) {
  if (max_horizon < 2) throw DomainError("CertificateSet: max_horizon must be at least 2");
  lambda_ = compute_lambda(spec, mode);
  prefactor_ = phi_prefactor(spec);
  phi_inf_ = prefactor_ / (1.0 - lambda_);
  lmin_p_ = sym_eig_extremes(spec.P()).min;
  chi_ = 1.0 - lmin_p_ / phi_inf_;
  const Matrix ka = spec.K().transpose() * spec.Q().matrix() * spec.K() +
                    spec.Abar().transpose() * spec.P().matrix() * spec.Abar();
  psi_ = sym_eig_extremes(SymMatrix(0.5 * (ka + ka.transpose()))).max / lmin_p_;
  if (!(psi_ > 0)) throw CertificateInvalid("psi must be positive");

  log_alpha_.assign(static_cast<std::size_t>(max_horizon) + 1, std::numeric_limits<double>::quiet_NaN());
  log1p_alpha_ = log_alpha_;
  double acc = std::log(psi_);
  for (int k = 1; k <= max_horizon; ++k) {
    const double ratio = lmin_p_ / phi(k);
    if (!(ratio > 0 && ratio < 1))
      throw CertificateInvalid("factor 1 - lmin(P)/phi_" + std::to_string(k) + " is not in (0, 1)");
    acc += std::log1p(-ratio);
    log_alpha_[static_cast<std::size_t>(k)] = acc;
    log1p_alpha_[static_cast<std::size_t>(k)] = std::log1p(std::exp(acc));
  }
}

void CertificateSet::check_index(int N, const char* what) const {
  if (N < 1) throw DomainError(std::string(what) + ": index " + std::to_string(N) + " below 1");
  if (N > max_horizon_)
    throw DomainError(std::string(what) + ": index " + std::to_string(N) + " beyond tabulated horizon " +
                      std::to_string(max_horizon_));
}

double CertificateSet::phi(int N) const {
  if (N < 1) throw DomainError("phi: N must be at least 1");
  return prefactor_ * -std::expm1((N + 1) * std::log(lambda_)) / (1.0 - lambda_);
}

double CertificateSet::alpha(int N) const {
  check_index(N, "alpha");
  return std::exp(log_alpha_[static_cast<std::size_t>(N)]);
}

double CertificateSet::log1p_alpha(int N) const {
  check_index(N, "alpha");
  return log1p_alpha_[static_cast<std::size_t>(N)];
}

double CertificateSet::rho(int N) const {
  if (N < 2) throw DomainError("rho: N must be at least 2");
  return std::exp(log1p_alpha(N - 1) + std::log1p(-lmin_p_ / phi(N)));
}

double CertificateSet::gamma(int N, int S) const {
  if (S < 0) throw DomainError("gamma: S must be non-negative");
  if (N < S + 2) throw DomainError("gamma: need N >= S + 2");
  double chain = log1p_alpha(N - 1);
  for (int l = N - S; l <= N - 1; ++l) chain += log1p_alpha(l);
  return std::exp(std::log(chi_) + std::max(log1p_alpha(N - S - 1), chain));
}

double CertificateSet::gamma_hat(int N, int S) const {
  if (S < 1) throw DomainError("gamma_hat: S must be at least 1");
  if (N < S + 3) throw DomainError("gamma_hat: need N >= S + 3");
  const double lc = std::log(chi_);
  // max over s of prod_{l=2}^{s} chi (1 + alpha_{N-l-1}); s = 1 is the empty product.
  double best = 0.0, run = 0.0;
  for (int s = 2; s <= S; ++s) {
    run += lc + log1p_alpha(N - s - 1);
    best = std::max(best, run);
  }
  double tail = 0.0;
  for (int l = N - S; l <= N - 1; ++l) tail += log1p_alpha(l);
  return std::exp(2 * lc + log1p_alpha(N - 1) + log1p_alpha(N - 2) + best + tail);
}

double CertificateSet::beta(int N, int S) const {
  if (S < 0) throw DomainError("beta: S must be non-negative");
  if (N < S + 2) throw DomainError("beta: need N >= S + 2");
  const double lc = std::log(chi_);
  return std::exp(lc + (S + 2) * std::log1p(psi_ * std::exp((N - S - 1) * lc)));
}

namespace {

template <class Rate>
int scan_threshold(int floor, int cap, Rate rate, const char* what) {
  if (cap < floor) throw DomainError(std::string(what) + ": cap below the smallest admissible horizon");
  int last_bad = floor - 1;
  double min_rate = std::numeric_limits<double>::infinity();
  for (int N = floor; N <= cap; ++N) {
    const double r = rate(N);
    min_rate = std::min(min_rate, r);
    if (!(r < 1.0)) last_bad = N;
  }
  if (last_bad == cap)
    throw NotFoundError(std::string(what) + ": no horizon up to " + std::to_string(cap) + " certifies the rate",
                        min_rate);
  return last_bad + 1;
}

}  // namespace

int CertificateSet::Nstar(int S, int N_cap) const {
  if (S < 0) throw DomainError("Nstar: S must be non-negative");
  return scan_threshold(S + 2, std::min(N_cap, max_horizon_), [&](int N) { return gamma(N, S); }, "Nstar");
}

int CertificateSet::Nhat_star(int S, int N_cap) const {
  if (S < 1) throw DomainError("Nhat_star: S must be at least 1");
  return scan_threshold(S + 3, std::min(N_cap, max_horizon_), [&](int N) { return gamma_hat(N, S); }, "Nhat_star");
}

int CertificateSet::Sstar(int N) const {
  if (N < 3) throw DomainError("Sstar: N must be at least 3");
  int S = 0;
  while (S + 1 <= N - 2 && gamma(N, S + 1) < 1.0) ++S;
  return S;
}

int CertificateSet::Shat_star(int N) const {
  if (N < 4) throw DomainError("Shat_star: N must be at least 4");
  int S = 0;
  while (S + 1 <= N - 3 && gamma_hat(N, S + 1) < 1.0) ++S;
  return S;
}

double cost_bound(const SystemSpec& spec, const CertificateSet& cs, const Vector& x0, int N, int S) {
  const double g = cs.gamma(N, S);
  if (!(g < 1.0))
    throw NoCertificateError("gamma_{" + std::to_string(N) + "," + std::to_string(S) + "} = " + std::to_string(g) +
                             " is not below 1");
  return value_VN(spec, x0, N) / (1.0 - g);
}

nlohmann::json certificate_report(const CertificateSet& cs, const std::vector<int>& Ns, const std::vector<int>& Ss,
                                  int N_cap) {
  using nlohmann::json;
  json out;
  out["lambda_mode"] = std::string(to_string(cs.mode()));
  out["lambda"] = cs.lambda();
  out["phi_inf"] = cs.phi_inf();
  out["chi"] = cs.chi();
  out["psi"] = cs.psi();
  out["N_cap"] = N_cap;

  auto or_null = [](auto f) -> json {
    try {
      return f();
    } catch (const DomainError&) {
      return nullptr;
    } catch (const NotFoundError&) {
      return nullptr;
    }
  };

  json per_s = json::array();
  for (int S : Ss) {
    json row;
    row["S"] = S;
    row["Nstar"] = or_null([&] { return json(cs.Nstar(S, N_cap)); });
    row["Nhat_star"] = or_null([&] { return json(cs.Nhat_star(S, N_cap)); });
    row["PiE"] = or_null([&] { return json(cs.PiE(S)); });
    row["PiA"] = or_null([&] { return json(cs.PiA(S)); });
    per_s.push_back(row);
  }
  out["per_S"] = per_s;

  json per_n = json::array();
  for (int N : Ns) {
    json row;
    row["N"] = N;
    row["phi"] = or_null([&] { return json(cs.phi(N)); });
    row["alpha"] = or_null([&] { return json(cs.alpha(N)); });
    row["rho"] = or_null([&] { return json(cs.rho(N)); });
    row["Sstar"] = or_null([&] { return json(cs.Sstar(N)); });
    row["Shat_star"] = or_null([&] { return json(cs.Shat_star(N)); });
    per_n.push_back(row);
  }
  out["per_N"] = per_n;

  json grid = json::array();
  for (int N : Ns)
    for (int S : Ss) {
      json cell;
      cell["N"] = N;
      cell["S"] = S;
      cell["gamma"] = or_null([&] { return json(cs.gamma(N, S)); });
      cell["gamma_hat"] = or_null([&] { return json(cs.gamma_hat(N, S)); });
      cell["beta"] = or_null([&] { return json(cs.beta(N, S)); });
      grid.push_back(cell);
    }
  out["grid"] = grid;
  return out;
}

namespace {

std::string cell(const nlohmann::json& v, const char* fmt = "%.6g") {
  if (v.is_null()) return "-";
  if (v.is_number_integer()) return std::to_string(v.get<long>());
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v.get<double>());
  return buf;
}

}  // namespace

std::string render_certificate_table(const nlohmann::json& r) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "lambda (%s) = %.10g   phi_inf = %.10g   chi = %.10g   psi = %.10g\n",
                r.at("lambda_mode").get<std::string>().c_str(), r.at("lambda").get<double>(),
                r.at("phi_inf").get<double>(), r.at("chi").get<double>(), r.at("psi").get<double>());
  os << buf << '\n';
  std::snprintf(buf, sizeof buf, "%4s %10s %10s %12s %12s\n", "S", "N*", "Nhat*", "PiE", "PiA");
  os << buf;
  for (const auto& row : r.at("per_S")) {
    std::snprintf(buf, sizeof buf, "%4d %10s %10s %12s %12s\n", row.at("S").get<int>(), cell(row.at("Nstar")).c_str(),
                  cell(row.at("Nhat_star")).c_str(), cell(row.at("PiE"), "%.4f").c_str(),
                  cell(row.at("PiA"), "%.4f").c_str());
    os << buf;
  }
  os << '\n';
  std::snprintf(buf, sizeof buf, "%6s %14s %14s %14s %6s %6s\n", "N", "phi", "alpha", "rho", "S*", "Shat*");
  os << buf;
  for (const auto& row : r.at("per_N")) {
    std::snprintf(buf, sizeof buf, "%6d %14s %14s %14s %6s %6s\n", row.at("N").get<int>(), cell(row.at("phi")).c_str(),
                  cell(row.at("alpha")).c_str(), cell(row.at("rho")).c_str(), cell(row.at("Sstar")).c_str(),
                  cell(row.at("Shat_star")).c_str());
    os << buf;
  }
  os << '\n';
  std::snprintf(buf, sizeof buf, "%6s %4s %14s %14s %14s\n", "N", "S", "gamma", "gamma_hat", "beta");
  os << buf;
  for (const auto& c : r.at("grid")) {
    std::snprintf(buf, sizeof buf, "%6d %4d %14s %14s %14s\n", c.at("N").get<int>(), c.at("S").get<int>(),
                  cell(c.at("gamma")).c_str(), cell(c.at("gamma_hat")).c_str(), cell(c.at("beta")).c_str());
    os << buf;
  }
  return os.str();
}

}  // namespace arrhc
