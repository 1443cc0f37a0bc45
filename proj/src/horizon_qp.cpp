#include "arrhc/horizon_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "arrhc/errors.hpp"

namespace arrhc {

std::string_view to_string(QPStatus s) {
  switch (s) {
    case QPStatus::optimal: return "optimal";
    case QPStatus::max_iterations: return "max-iterations";
    case QPStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

QPInstance build_nqp(const SystemSpec& spec, const Vector& x, int horizon) {
  if (horizon < 1) throw DomainError("build_nqp: horizon must be >= 1");
  if (x.size() != spec.n()) throw DomainError("build_nqp: state dimension mismatch");
  if (!x.allFinite()) throw DomainError("build_nqp: non-finite state");
  return {spec, x, horizon};
}

CondensedForm condense(const QPInstance& inst) {
  const auto& s = inst.spec;
  const Eigen::Index n = s.n(), m = s.m(), N = inst.horizon;
  CondensedForm f;
  f.Phi = Matrix::Zero(N * n, n);
  f.Gamma = Matrix::Zero(N * n, N * m);
  Matrix apow = s.A();
  for (Eigen::Index t = 0; t < N; ++t) {
    f.Phi.block(t * n, 0, n, n) = apow;
    apow = s.A() * apow;
  }
  // Block (t, j) of Gamma is A^{t-j} B for j <= t.
  Matrix ab = s.B();
  for (Eigen::Index d = 0; d < N; ++d) {
    for (Eigen::Index j = 0; j + d < N; ++j) f.Gamma.block((j + d) * n, j * m, n, m) = ab;
    ab = s.A() * ab;
  }
  Matrix pbig = Matrix::Zero(N * n, N * n);
  Matrix qbig = Matrix::Zero(N * m, N * m);
  for (Eigen::Index t = 0; t < N; ++t) {
    pbig.block(t * n, t * n, n, n) = s.P().matrix();
    qbig.block(t * m, t * m, m, m) = s.Q().matrix();
  }
  const Vector free_resp = f.Phi * inst.x;
  f.H = 2.0 * (f.Gamma.transpose() * pbig * f.Gamma + qbig);
  f.H = 0.5 * (f.H + f.H.transpose());
  f.g = 2.0 * f.Gamma.transpose() * pbig * free_resp;
  f.constant = quad_form(inst.x, s.P()) + free_resp.dot(pbig * free_resp);
  return f;
}

std::vector<Vector> predict(const SystemSpec& spec, const Vector& x, const std::vector<Vector>& inputs) {
  std::vector<Vector> states;
  states.reserve(inputs.size() + 1);
  states.push_back(x);
  for (const auto& u : inputs) states.push_back(step(spec, states.back(), u));
  return states;
}

double objective(const SystemSpec& spec, const Vector& x, const std::vector<Vector>& inputs) {
  const auto states = predict(spec, x, inputs);
  double j = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    j += quad_form(states[t], spec.P()) + quad_form(inputs[t], spec.Q());
  }
  return j + quad_form(states.back(), spec.P());
}

WarmStart shift_warm_start(const SystemSpec& spec, const QPSolution& prev) {
  WarmStart w;
  const std::size_t N = prev.inputs.size();
  if (N == 0) return w;
  w.inputs.assign(prev.inputs.begin() + 1, prev.inputs.end());
  w.inputs.push_back(spec.K() * prev.states.back());
  if (prev.state_duals.size() == N && prev.input_duals.size() == N) {
    w.state_duals.assign(prev.state_duals.begin() + 1, prev.state_duals.end());
    w.state_duals.push_back(Vector::Zero(spec.n()));
    w.input_duals.assign(prev.input_duals.begin() + 1, prev.input_duals.end());
    w.input_duals.push_back(Vector::Zero(spec.m()));
  }
  w.rho = prev.final_rho;
  return w;
}

// ---------------------------------------------------------------------------

EllipsoidProjector::EllipsoidProjector(const SymMatrix& pbar, double c)
    : pbar_(pbar), eig_(sym_eig(pbar)), c_(c) {
  if (!(c > 0.0)) throw DomainError("EllipsoidProjector: c must be positive");
  if (eig_.values(0) <= 0.0) throw DomainError("EllipsoidProjector: Pbar must be positive definite");
}

Vector EllipsoidProjector::project(const Vector& z) const {
  if (quad_form(z, pbar_) <= c_) return z;
  const Vector zt = eig_.vectors.transpose() * z;
  const Vector& lam = eig_.values;
  // g(mu) = sum lam_i zt_i^2 / (1 + mu lam_i)^2 - c is convex and decreasing,
  // so Newton from mu = 0 approaches the root monotonically from the left.
  auto eval = [&](double mu, double& g, double& dg) {
    g = -c_;
    dg = 0.0;
    for (Eigen::Index i = 0; i < zt.size(); ++i) {
      const double d = 1.0 + mu * lam(i);
      const double w = lam(i) * zt(i) * zt(i);
      g += w / (d * d);
      dg -= 2.0 * w * lam(i) / (d * d * d);
    }
  };
  double lo = 0.0, hi = 1.0;
  double g = 0.0, dg = 0.0;
  for (eval(hi, g, dg); g > 0.0; eval(hi, g, dg)) {
    lo = hi;
    hi *= 2.0;
  }
  double mu = lo;
  for (int it = 0; it < 200; ++it) {
    eval(mu, g, dg);
    if (std::abs(g) <= 1e-10 * c_) break;
    if (g > 0.0) lo = mu; else hi = mu;
    double next = mu - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    mu = next;
  }
  Vector xt(zt.size());
  for (Eigen::Index i = 0; i < zt.size(); ++i) xt(i) = zt(i) / (1.0 + mu * lam(i));
  return eig_.vectors * xt;
}

Vector project_ellipsoid(const Vector& z, const SymMatrix& pbar, double c) {
  if (z.size() != pbar.dim()) throw DomainError("project_ellipsoid: dimension mismatch");
  return EllipsoidProjector(pbar, c).project(z);
}

// ---------------------------------------------------------------------------

HorizonSolver::HorizonSolver(SystemSpec spec, SolverSettings settings)
    : spec_(std::move(spec)), settings_(settings), projector_(spec_.Pbar(), spec_.c()) {
  if (!(settings_.rho > 0 && settings_.eps_feas > 0 && settings_.eps_opt > 0 && settings_.max_iterations > 0)) {
    throw DomainError("SolverSettings: all parameters must be positive");
  }
}

HorizonSolver::Table& HorizonSolver::table(double rho, int horizon) {
  auto [it, inserted] = tables_.try_emplace(rho);
  Table& tab = it->second;
  const Eigen::Index n = spec_.n(), m = spec_.m();
  if (inserted) {
    tab.wx = 2.0 * spec_.P().matrix() + rho * Matrix::Identity(n, n);
    tab.wu = 2.0 * spec_.Q().matrix() + rho * Matrix::Identity(m, m);
    tab.s_last = tab.wx;
  }
  const Matrix& a = spec_.A();
  const Matrix& b = spec_.B();
  while (static_cast<int>(tab.stages.size()) < horizon) {
    const Matrix& s = tab.s_last;
    const Matrix bs = b.transpose() * s;
    Stage st;
    st.huu_inv = (tab.wu + bs * b).inverse();
    const Matrix hux = bs * a;
    st.gain = -st.huu_inv * hux;
    st.hux_t = hux.transpose();
    Matrix next = tab.wx + a.transpose() * s * a + st.hux_t * st.gain;
    tab.s_last = 0.5 * (next + next.transpose());
    tab.stages.push_back(std::move(st));
  }
  return tab;
}

void HorizonSolver::lq_solve(const Table& tab, const Vector& x, int horizon, const std::vector<Vector>& q,
                             const std::vector<Vector>& r, std::vector<Vector>& states,
                             std::vector<Vector>& inputs) {
  const auto N = static_cast<std::size_t>(horizon);
  const Matrix& a = spec_.A();
  const Matrix& b = spec_.B();
  std::vector<Vector> ff(N);
  Vector s = q.empty() ? Vector::Zero(spec_.n()) : q[N - 1];
  for (std::size_t t = N; t-- > 0;) {
    const Stage& st = tab.stages[N - t - 1];
    Vector hu = b.transpose() * s;
    if (!r.empty()) hu += r[t];
    ff[t] = -st.huu_inv * hu;
    if (t >= 1) {
      Vector next = a.transpose() * s + st.hux_t * ff[t];
      if (!q.empty()) next += q[t - 1];
      s = std::move(next);
    }
  }
  states.resize(N + 1);
  inputs.resize(N);
  states[0] = x;
  for (std::size_t t = 0; t < N; ++t) {
    inputs[t] = tab.stages[N - t - 1].gain * states[t] + ff[t];
    states[t + 1] = a * states[t] + b * inputs[t];
  }
}

bool HorizonSolver::feasible(const std::vector<Vector>& states, const std::vector<Vector>& inputs,
                             double slack) const {
  for (std::size_t t = 1; t < states.size(); ++t) {
    if (quad_form(states[t], spec_.Pbar()) > spec_.c() + slack) return false;
  }
  for (const auto& u : inputs) {
    if (u.cwiseAbs().maxCoeff() > spec_.u_max() + slack) return false;
  }
  return true;
}

QPSolution HorizonSolver::finish(const Vector& x, std::vector<Vector> inputs, QPStatus status) const {
  QPSolution sol;
  sol.states = predict(spec_, x, inputs);
  sol.inputs = std::move(inputs);
  sol.value = objective(spec_, x, sol.inputs);
  sol.status = status;
  return sol;
}

QPSolution HorizonSolver::solve(const Vector& x, int horizon, const WarmStart* warm) {
  if (horizon < 1) throw DomainError("solve: horizon must be >= 1");
  if (x.size() != spec_.n()) throw DomainError("solve: state dimension mismatch");
  const auto N = static_cast<std::size_t>(horizon);
  const Eigen::Index n = spec_.n(), m = spec_.m();

  if (!in_X0(spec_, x).inside) {
    QPSolution sol;
    sol.status = QPStatus::infeasible;
    return sol;
  }

  std::vector<Vector> xs, us;
  if (settings_.unconstrained_shortcut) {
    lq_solve(table(0.0, horizon), x, horizon, {}, {}, xs, us);
    if (feasible(xs, us, 0.0)) {
      auto sol = finish(x, std::move(us), QPStatus::optimal);
      sol.final_rho = settings_.rho;
      return sol;
    }
  }

  // Scaled-form ADMM on  min J(x, u)  s.t. dynamics, x_t = y_t in X0, u_t = w_t in U.
  double rho = settings_.rho;
  std::vector<Vector> ys(N), ws(N), lam(N, Vector::Zero(n)), nu(N, Vector::Zero(m));
  {
    std::vector<Vector> guess;
    if (warm && warm->inputs.size() == N) {
      guess = warm->inputs;
      if (warm->state_duals.size() == N && warm->input_duals.size() == N) {
        lam = warm->state_duals;
        nu = warm->input_duals;
      }
      if (warm->rho > 0) rho = warm->rho;
    } else if (settings_.warm_start) {
      guess = aux_rollout(spec_, x, horizon).inputs;
    } else {
      guess.assign(N, Vector::Zero(m));
    }
    const auto gs = predict(spec_, x, guess);
    for (std::size_t t = 0; t < N; ++t) {
      ys[t] = projector_.project(gs[t + 1]);
      ws[t] = guess[t].cwiseMax(-spec_.u_max()).cwiseMin(spec_.u_max());
    }
  }

  const double scale = std::max(x.cwiseAbs().maxCoeff(), 1e-12);
  const double tol = settings_.eps_opt * scale;
  std::vector<Vector> q(N), r(N);
  double rp = std::numeric_limits<double>::infinity(), rd = rp;
  int iter = 0;
  const Table* tab = &table(rho, horizon);

  for (iter = 1; iter <= settings_.max_iterations; ++iter) {
    for (std::size_t t = 0; t < N; ++t) {
      q[t] = -rho * (ys[t] - lam[t]);
      r[t] = -rho * (ws[t] - nu[t]);
    }
    lq_solve(*tab, x, horizon, q, r, xs, us);

    rp = 0.0;
    rd = 0.0;
    for (std::size_t t = 0; t < N; ++t) {
      Vector y_new = projector_.project(xs[t + 1] + lam[t]);
      Vector w_new = (us[t] + nu[t]).cwiseMax(-spec_.u_max()).cwiseMin(spec_.u_max());
      lam[t] += xs[t + 1] - y_new;
      nu[t] += us[t] - w_new;
      rp = std::max({rp, (xs[t + 1] - y_new).cwiseAbs().maxCoeff(), (us[t] - w_new).cwiseAbs().maxCoeff()});
      rd = std::max({rd, rho * (y_new - ys[t]).cwiseAbs().maxCoeff(), rho * (w_new - ws[t]).cwiseAbs().maxCoeff()});
      ys[t] = std::move(y_new);
      ws[t] = std::move(w_new);
    }

    if (rp <= tol && rd <= tol) {
      std::vector<Vector> clipped(N);
      for (std::size_t t = 0; t < N; ++t) clipped[t] = us[t].cwiseMax(-spec_.u_max()).cwiseMin(spec_.u_max());
      const auto cand = predict(spec_, x, clipped);
      if (feasible(cand, clipped, settings_.eps_feas)) break;
    }

    if (settings_.adaptive_rho && iter % 50 == 0) {
      double factor = 1.0;
      if (rp > 10.0 * rd) factor = 4.0;
      else if (rd > 10.0 * rp) factor = 0.25;
      const double next = std::clamp(rho * factor, 1e-6, 1e6);
      if (next != rho) {
        for (std::size_t t = 0; t < N; ++t) {
          lam[t] *= rho / next;
          nu[t] *= rho / next;
        }
        rho = next;
        tab = &table(rho, horizon);
      }
    }
  }

  const QPStatus status = iter <= settings_.max_iterations ? QPStatus::optimal : QPStatus::max_iterations;
  for (auto& u : us) u = u.cwiseMax(-spec_.u_max()).cwiseMin(spec_.u_max());
  if (status == QPStatus::optimal && !feasible(predict(spec_, x, us), us, 0.0)) {
    // Pull the iterate toward the auxiliary rollout, which is strictly
    // feasible, until every constraint holds without slack.
    const auto aux = aux_rollout(spec_, x, horizon).inputs;
    std::vector<Vector> mix(N);
    auto blend = [&](double w) {
      for (std::size_t t = 0; t < N; ++t)
        mix[t] = (w * us[t] + (1 - w) * aux[t]).cwiseMax(-spec_.u_max()).cwiseMin(spec_.u_max());
    };
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      blend(mid);
      (feasible(predict(spec_, x, mix), mix, 0.0) ? lo : hi) = mid;
    }
    blend(lo);
    if (feasible(predict(spec_, x, mix), mix, 0.0)) us = mix;
  }
  auto sol = finish(x, std::move(us), status);
  sol.primal_residual = rp;
  sol.dual_residual = rd;
  sol.iterations = std::min(iter, settings_.max_iterations);
  sol.final_rho = rho;
  sol.state_duals = std::move(lam);
  sol.input_duals = std::move(nu);
  return sol;
}

double HorizonSolver::value(const Vector& x, int horizon) {
  const auto sol = solve(x, horizon);
  if (sol.status != QPStatus::optimal) {
    throw SolverError("N-QP solve failed with status " + std::string(to_string(sol.status)));
  }
  return sol.value;
}

QPSolution solve_nqp(const QPInstance& instance, const SolverSettings& settings) {
  HorizonSolver solver(instance.spec, settings);
  return solver.solve(instance.x, instance.horizon);
}

double value_VN(const SystemSpec& spec, const Vector& x, int horizon, const SolverSettings& settings) {
  HorizonSolver solver(spec, settings);
  return solver.value(x, horizon);
}

}  // namespace arrhc
