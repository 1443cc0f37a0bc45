#include "arrhc/plant.hpp"

#include <cmath>
#include <sstream>

#include "arrhc/errors.hpp"

namespace arrhc {

namespace {

Matrix matrix_from_json(const nlohmann::json& j, const char* name) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) {
    throw InvalidSpecError(std::string("field '") + name + "' must be a number or array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) {
    throw InvalidSpecError(std::string("field '") + name + "' must be an array of rows");
  }
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw InvalidSpecError(std::string("field '") + name + "' has ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  if (!m.allFinite()) throw InvalidSpecError(std::string("field '") + name + "' is not finite");
  return m;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

SymMatrix require_spd(const Matrix& m, const char* name, std::vector<SpecCheck>* log) {
  SymMatrix s;
  try {
    s = SymMatrix(m);
  } catch (const DomainError& e) {
    throw InvalidSpecError(std::string(name) + ": " + e.what());
  }
  const auto ext = sym_eig_extremes(s);
  const bool ok = ext.min > 0.0;
  if (log) log->push_back({std::string(name) + " positive definite", ok, "lambda_min = " + fmt_double(ext.min)});
  if (!ok) throw InvalidSpecError(std::string(name) + " is not positive definite");
  return s;
}

}  // namespace

SystemParams params_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidSpecError("system spec must be a JSON object");
  SystemParams p;
  for (const char* key : {"A", "B", "K", "P", "Q", "Qbar", "c", "u_max"}) {
    if (!j.contains(key)) throw InvalidSpecError(std::string("missing field '") + key + "'");
  }
  p.A = matrix_from_json(j.at("A"), "A");
  p.B = matrix_from_json(j.at("B"), "B");
  p.K = matrix_from_json(j.at("K"), "K");
  p.P = matrix_from_json(j.at("P"), "P");
  p.Q = matrix_from_json(j.at("Q"), "Q");
  p.Qbar = matrix_from_json(j.at("Qbar"), "Qbar");
  p.c = j.at("c").get<double>();
  p.u_max = j.at("u_max").get<double>();
  if (j.contains("Pbar")) p.Pbar_reference = matrix_from_json(j.at("Pbar"), "Pbar");
  return p;
}

nlohmann::json params_to_json(const SystemParams& p) {
  nlohmann::json j;
  j["A"] = matrix_to_json(p.A);
  j["B"] = matrix_to_json(p.B);
  j["K"] = matrix_to_json(p.K);
  j["P"] = matrix_to_json(p.P);
  j["Q"] = matrix_to_json(p.Q);
  j["Qbar"] = matrix_to_json(p.Qbar);
  j["c"] = p.c;
  j["u_max"] = p.u_max;
  if (p.Pbar_reference) j["Pbar"] = matrix_to_json(*p.Pbar_reference);
  return j;
}

SystemSpec SystemSpec::validate(const SystemParams& in, GainRepair repair, std::vector<SpecCheck>* log) {
  const Eigen::Index n = in.A.rows();
  const Eigen::Index m = in.B.cols();
  auto check_dims = [&](bool ok, const std::string& what) {
    if (log) log->push_back({"dimensions of " + what, ok, ""});
    if (!ok) throw InvalidSpecError("dimension mismatch in " + what);
  };
  check_dims(n > 0 && in.A.cols() == n, "A (n x n)");
  check_dims(m > 0 && in.B.rows() == n, "B (n x m)");
  check_dims(in.K.rows() == m && in.K.cols() == n, "K (m x n)");
  check_dims(in.P.rows() == n && in.P.cols() == n, "P (n x n)");
  check_dims(in.Q.rows() == m && in.Q.cols() == m, "Q (m x m)");
  check_dims(in.Qbar.rows() == n && in.Qbar.cols() == n, "Qbar (n x n)");
  for (const Matrix* mat : {&in.A, &in.B, &in.K}) {
    if (!mat->allFinite()) throw InvalidSpecError("non-finite entry in A, B or K");
  }

  SystemSpec s;
  s.a_ = in.A;
  s.b_ = in.B;
  s.p_ = require_spd(in.P, "P", log);
  s.q_ = require_spd(in.Q, "Q", log);
  s.qbar_ = require_spd(in.Qbar, "Qbar", log);

  s.k_ = in.K;
  const double rho_given = spectral_radius(in.A + in.B * in.K);
  const bool stable = rho_given < 1.0;
  if (log) log->push_back({"rho(A + BK) < 1 for configured K", stable, "rho = " + fmt_double(rho_given)});
  if (!stable) {
    if (repair == GainRepair::off) {
      throw InstabilityError("A + BK is not Schur stable (spectral radius " + fmt_double(rho_given) +
                             "); enable gain repair to synthesize an LQ gain");
    }
    s.k_ = lq_gain(in.A, in.B, s.p_, s.q_);
    s.gain_repaired_ = true;
    if (log) {
      std::ostringstream os;
      os << "K replaced by LQ gain [" << s.k_.format(Eigen::IOFormat(8, 0, ", ", "; ")) << "], rho = "
         << fmt_double(spectral_radius(in.A + in.B * s.k_));
      log->push_back({"gain repair", true, os.str()});
    }
  }
  s.abar_ = s.a_ + s.b_ * s.k_;
  const double rho = spectral_radius(s.abar_);
  if (rho >= 1.0) throw InstabilityError("A + BK is not Schur stable after repair");

  s.pbar_ = solve_discrete_lyapunov(s.abar_, s.qbar_);
  const double res = lyapunov_residual(s.abar_, s.pbar_, s.qbar_);
  const bool res_ok = res <= 1e-9 * std::max(1.0, s.pbar_.matrix().cwiseAbs().maxCoeff());
  if (log) log->push_back({"Lyapunov residual <= 1e-9", res_ok, "residual = " + fmt_double(res)});
  if (!res_ok) throw InvalidSpecError("Lyapunov solve residual too large");
  if (!is_positive_definite(s.pbar_)) throw InvalidSpecError("Pbar is not positive definite");

  if (in.Pbar_reference && log) {
    const Matrix& ref = *in.Pbar_reference;
    if (ref.rows() == n && ref.cols() == n) {
      const double dev = (ref - s.pbar_.matrix()).cwiseAbs().maxCoeff();
      const double ref_res = (s.abar_.transpose() * ref * s.abar_ - ref + s.qbar_.matrix()).cwiseAbs().maxCoeff();
      log->push_back({"config Pbar matches recomputed Pbar (informational)", dev <= 1e-3,
                      "max deviation = " + fmt_double(dev) + ", its Lyapunov residual = " + fmt_double(ref_res)});
    }
  }

  const bool c_ok = in.c > 0.0 && std::isfinite(in.c);
  const bool u_ok = in.u_max > 0.0 && std::isfinite(in.u_max);
  if (log) {
    log->push_back({"c > 0", c_ok, "c = " + fmt_double(in.c)});
    log->push_back({"u_max > 0", u_ok, "u_max = " + fmt_double(in.u_max)});
  }
  if (!c_ok) throw InvalidSpecError("c must be positive");
  if (!u_ok) throw InvalidSpecError("u_max must be positive");
  s.c_ = in.c;
  s.u_max_ = in.u_max;

  const Vector kmax = max_aux_input_over_X0(s);
  const bool asm2 = kmax.maxCoeff() <= s.u_max_;
  if (log) {
    log->push_back({"K x in U for all x in X0", asm2,
                    "max |K_j x| over X0 = " + fmt_double(kmax.maxCoeff()) + ", u_max = " + fmt_double(s.u_max_)});
  }
  if (!asm2) throw InvalidSpecError("auxiliary input K x leaves U on X0");
  return s;
}

SystemParams SystemSpec::params() const {
  SystemParams p;
  p.A = a_;
  p.B = b_;
  p.K = k_;
  p.P = p_.matrix();
  p.Q = q_.matrix();
  p.Qbar = qbar_.matrix();
  p.c = c_;
  p.u_max = u_max_;
  return p;
}

Vector step(const SystemSpec& spec, const Vector& x, const Vector& u) {
  if (x.size() != spec.n() || u.size() != spec.m()) throw DomainError("step: dimension mismatch");
  return spec.A() * x + spec.B() * u;
}

X0Membership in_X0(const SystemSpec& spec, const Vector& x) {
  const double margin = spec.c() - quad_form(x, spec.Pbar());
  return {margin >= -kX0Slack, margin};
}

Rollout aux_rollout(const SystemSpec& spec, const Vector& x, int horizon) {
  if (horizon < 1) throw DomainError("aux_rollout: horizon must be >= 1");
  if (x.size() != spec.n()) throw DomainError("aux_rollout: dimension mismatch");
  if (!in_X0(spec, x).inside) throw InfeasibleSeedError("aux_rollout: seed state is outside X0");
  Rollout r;
  r.states.reserve(static_cast<std::size_t>(horizon) + 1);
  r.inputs.reserve(static_cast<std::size_t>(horizon));
  r.states.push_back(x);
  for (int t = 0; t < horizon; ++t) {
    r.inputs.push_back(spec.K() * r.states.back());
    r.states.push_back(spec.Abar() * r.states.back());
  }
  return r;
}

Vector max_aux_input_over_X0(const SystemSpec& spec) {
  const Eigen::LDLT<Matrix> ldlt(spec.Pbar().matrix());
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw DomainError("max_aux_input_over_X0: Pbar is singular");
  }
  Vector out(spec.m());
  for (Eigen::Index j = 0; j < spec.m(); ++j) {
    const Vector kj = spec.K().row(j).transpose();
    out(j) = std::sqrt(spec.c() * kj.dot(ldlt.solve(kj)));
  }
  return out;
}

Vector sample_X0(const SystemSpec& spec, XorShift64Star& rng, double scale, bool on_boundary) {
  const Eigen::Index n = spec.n();
  Vector dir(n);
  double norm = 0.0;
  while (norm < 1e-12) {
    for (Eigen::Index i = 0; i < n; ++i) dir(i) = rng.normal();
    norm = dir.norm();
  }
  dir /= norm;
  const double radius = on_boundary ? scale : scale * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
  // x = sqrt(c) * L z with L L^T = Pbar^{-1} maps the unit ball onto X0.
  const Matrix pinv = spec.Pbar().matrix().inverse();
  const Matrix l = pinv.llt().matrixL();
  return std::sqrt(spec.c()) * radius * (l * dir);
}

SystemParams demo_params() {
  SystemParams p;
  p.A = (Matrix(2, 2) << 2, 1, 1, 2).finished();
  p.B = (Matrix(2, 1) << 2, 1).finished();
  p.K = (Matrix(1, 2) << -3.25, -3).finished();
  p.P = Matrix::Identity(2, 2);
  p.Q = Matrix::Identity(1, 1);
  p.Qbar = Matrix::Identity(2, 2);
  p.c = 100.0;
  p.u_max = 500.0;
  p.Pbar_reference = (Matrix(2, 2) << 25.6667, 13.3333, 13.3333, 8.2963).finished();
  return p;
}

}  // namespace arrhc
