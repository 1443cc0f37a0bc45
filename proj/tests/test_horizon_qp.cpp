#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "arrhc/errors.hpp"
#include "arrhc/horizon_qp.hpp"
#include "qp_oracle.hpp"
#include "test_util.hpp"

using namespace arrhc;
using arrhc::test::rel_close;

namespace {

SystemSpec scalar_spec(double a, double b, double k, double p, double q, double c, double umax) {
  SystemParams sp;
  sp.A = Matrix::Constant(1, 1, a);
  sp.B = Matrix::Constant(1, 1, b);
  sp.K = Matrix::Constant(1, 1, k);
  sp.P = Matrix::Constant(1, 1, p);
  sp.Q = Matrix::Constant(1, 1, q);
  sp.Qbar = Matrix::Identity(1, 1);
  sp.c = c;
  sp.u_max = umax;
  return SystemSpec::validate(sp);
}

}  // namespace

TEST_CASE("build_nqp: scalar prediction operators") {
  const auto spec = scalar_spec(0.9, 0.3, -1.0, 1, 1, 10, 100);
  const auto f = condense(build_nqp(spec, Vector::Constant(1, 1.0), 1));
  CHECK(f.Phi(0, 0) == 0.9);
  CHECK(f.Gamma(0, 0) == 0.3);
  CHECK_THROWS_AS(build_nqp(spec, Vector::Constant(1, 1.0), 0), DomainError);
  CHECK_THROWS_AS(build_nqp(spec, Vector::Zero(2), 3), DomainError);
}

TEST_CASE("build_nqp: zero state has zero linear term and a positive definite Hessian") {
  const auto spec = arrhc::test::demo_spec();
  const auto f = condense(build_nqp(spec, Vector::Zero(2), 6));
  CHECK(f.g.isZero());
  CHECK(f.constant == 0.0);
  CHECK(is_positive_definite(SymMatrix(f.H)));
}

TEST_CASE("build_nqp: condensed operators match repeated step() calls") {
  XorShift64Star rng(8);
  const auto spec = arrhc::test::random_spec(rng, 2, 1);
  const Vector x = sample_X0(spec, rng);
  const int N = 4;
  const auto f = condense(build_nqp(spec, x, N));
  // Column j of Gamma is the response to a unit impulse in input coordinate j.
  for (Eigen::Index j = 0; j < N * spec.m(); ++j) {
    std::vector<Vector> us(N, Vector::Zero(spec.m()));
    us[static_cast<std::size_t>(j / spec.m())](j % spec.m()) = 1.0;
    Vector state = Vector::Zero(spec.n());
    for (int t = 0; t < N; ++t) {
      state = step(spec, state, us[static_cast<std::size_t>(t)]);
      CHECK((f.Gamma.block(t * spec.n(), j, spec.n(), 1) - state).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  for (Eigen::Index j = 0; j < spec.n(); ++j) {
    Vector state = Vector::Unit(spec.n(), j);
    for (int t = 0; t < N; ++t) {
      state = step(spec, state, Vector::Zero(spec.m()));
      CHECK((f.Phi.block(t * spec.n(), j, spec.n(), 1) - state).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  // Objective agreement on a random input sequence.
  std::vector<Vector> us(N);
  Vector stacked(N * spec.m());
  for (int t = 0; t < N; ++t) {
    us[static_cast<std::size_t>(t)] = arrhc::test::random_matrix(rng, spec.m(), 1);
    stacked.segment(t * spec.m(), spec.m()) = us[static_cast<std::size_t>(t)];
  }
  const double j_cond = 0.5 * stacked.dot(f.H * stacked) + f.g.dot(stacked) + f.constant;
  CHECK(rel_close(j_cond, objective(spec, x, us), 1e-12));
}

TEST_CASE("solve: origin") {
  const auto spec = arrhc::test::demo_spec();
  for (bool shortcut : {true, false}) {
    SolverSettings st;
    st.unconstrained_shortcut = shortcut;
    const auto sol = solve_nqp(build_nqp(spec, Vector::Zero(2), 5), st);
    CHECK(sol.status == QPStatus::optimal);
    CHECK(sol.value == 0.0);
    for (const auto& u : sol.inputs) CHECK(u.isZero());
  }
}

TEST_CASE("solve: outside X0 is reported infeasible") {
  const auto spec = arrhc::test::demo_spec();
  const Vector far = (Vector(2) << 100, 100).finished();
  CHECK(solve_nqp(build_nqp(spec, far, 3)).status == QPStatus::infeasible);
  CHECK_THROWS_AS(value_VN(spec, far, 3), SolverError);
}

TEST_CASE("solve: constraint-inactive instances match the dense KKT oracle") {
  XorShift64Star rng(77);
  int checked = 0;
  while (checked < 50) {
    const auto spec = arrhc::test::random_spec(rng, 2, 1 + checked % 2);
    const int N = 1 + static_cast<int>(rng.uniform() * 8);
    const Vector x = sample_X0(spec, rng, 0.05);
    const auto oracle = arrhc::test::dense_kkt(spec, x, N);
    // Only keep instances whose unconstrained optimum is strictly feasible.
    const auto states = predict(spec, x, oracle.inputs);
    bool inactive = true;
    for (std::size_t t = 1; t < states.size(); ++t) inactive &= quad_form(states[t], spec.Pbar()) < 0.9 * spec.c();
    if (!inactive) continue;
    for (bool shortcut : {true, false}) {
      SolverSettings st;
      st.unconstrained_shortcut = shortcut;
      const auto sol = solve_nqp(build_nqp(spec, x, N), st);
      REQUIRE(sol.status == QPStatus::optimal);
      CHECK(rel_close(sol.value, oracle.value, 1e-6));
      for (int t = 0; t < N; ++t) {
        const auto i = static_cast<std::size_t>(t);
        CHECK((sol.inputs[i] - oracle.inputs[i]).cwiseAbs().maxCoeff() <= 1e-5 * std::max(1.0, oracle.inputs[i].norm()));
      }
    }
    ++checked;
  }
}

TEST_CASE("solve: scalar instance with clipped optimum") {
  // a = 2, b = 1, P = Q = 1, N = 1: J(u) = x^2 + u^2 + (2x + u)^2, minimized at u = -x.
  const auto spec = scalar_spec(2.0, 1.0, -1.5, 1.0, 1.0, 4.0, 3.0);
  const auto sol = solve_nqp(build_nqp(spec, Vector::Constant(1, 1.0), 1));
  REQUIRE(sol.status == QPStatus::optimal);
  CHECK(sol.inputs[0](0) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("solve: constraint-active scalar instances match the clipped closed form") {
  XorShift64Star rng(4242);
  int checked = 0;
  while (checked < 20) {
    const double abar = rng.uniform(0.2, 0.6);
    const double k = abar - 2.0;
    const double q = rng.uniform(0.01, 0.2);
    const double c = rng.uniform(1.0, 20.0);
    const double pbar = 1.0 / (1.0 - abar * abar);
    const double xmax = std::sqrt(c / pbar);
    const double umax = std::abs(k) * xmax * rng.uniform(1.0, 1.2);
    const auto spec = scalar_spec(2.0, 1.0, k, 1.0, q, c, umax);
    const double x = (rng.bit() ? 1.0 : -1.0) * xmax * rng.uniform(0.8, 1.0);

    // J(u) = x^2 + q u^2 + (2x + u)^2 over |u| <= umax, pbar (2x + u)^2 <= c.
    const double u_free = -2.0 * x / (1.0 + q);
    const double r = std::sqrt(c / pbar);
    const double lo = std::max(-umax, -2.0 * x - r);
    const double hi = std::min(umax, -2.0 * x + r);
    if (u_free >= lo && u_free <= hi) continue;
    const double u_star = std::clamp(u_free, lo, hi);
    const double j_star = x * x + q * u_star * u_star + (2 * x + u_star) * (2 * x + u_star);

    const auto sol = solve_nqp(build_nqp(spec, Vector::Constant(1, x), 1));
    REQUIRE(sol.status == QPStatus::optimal);
    CHECK(std::abs(sol.inputs[0](0) - u_star) <= 1e-6 * std::max(1.0, std::abs(u_star)));
    CHECK(rel_close(sol.value, j_star, 1e-6));
    ++checked;
  }
}

TEST_CASE("solution invariants on the example system") {
  const auto spec = arrhc::test::demo_spec();
  HorizonSolver solver(spec);
  XorShift64Star rng(31);
  for (int i = 0; i < 40; ++i) {
    const Vector x = sample_X0(spec, rng, 1.0, i % 2 == 0);
    const int N = 1 + i % 10;
    const auto sol = solver.solve(x, N);
    REQUIRE(sol.status == QPStatus::optimal);
    REQUIRE(sol.states.size() == static_cast<std::size_t>(N) + 1);
    CHECK(sol.states[0] == x);
    for (int t = 0; t < N; ++t) {
      const auto ti = static_cast<std::size_t>(t);
      CHECK(sol.states[ti + 1] == step(spec, sol.states[ti], sol.inputs[ti]));
      CHECK(quad_form(sol.states[ti + 1], spec.Pbar()) <= spec.c() + solver.settings().eps_feas);
      CHECK(sol.inputs[ti].cwiseAbs().maxCoeff() <= spec.u_max() + solver.settings().eps_feas);
    }
    CHECK(rel_close(sol.value, objective(spec, x, sol.inputs), 1e-9));
    // The auxiliary rollout is feasible, so it bounds the optimum from above.
    CHECK(sol.value <= objective(spec, x, aux_rollout(spec, x, N).inputs) * (1 + 1e-9));
    CHECK(sol.value >= sym_eig_extremes(spec.P()).min * x.squaredNorm() * (1 - 1e-9));
  }
}

TEST_CASE("value function is monotone in N and Bellman consistent") {
  const auto spec = arrhc::test::demo_spec();
  HorizonSolver solver(spec);
  XorShift64Star rng(12);
  for (int i = 0; i < 30; ++i) {
    const Vector x = sample_X0(spec, rng);
    const double v1 = solver.value(x, 1);
    const double v3 = solver.value(x, 3);
    const double v5 = solver.value(x, 5);
    CHECK(v1 <= v3 * (1 + 1e-8) + 1e-8);
    CHECK(v3 <= v5 * (1 + 1e-8) + 1e-8);

    const auto sol = solver.solve(x, 5);
    const double bellman = quad_form(x, spec.P()) + quad_form(sol.inputs[0], spec.Q()) + solver.value(sol.states[1], 4);
    CHECK(rel_close(sol.value, bellman, 1e-6));
  }
}

TEST_CASE("warm-started solves agree with cold solves") {
  const auto spec = arrhc::test::demo_spec();
  HorizonSolver solver(spec);
  XorShift64Star rng(5);
  const Vector x = sample_X0(spec, rng, 1.0, true);
  const auto first = solver.solve(x, 8);
  const Vector next = first.states[1];
  const auto warm = shift_warm_start(spec, first);
  CHECK(warm.inputs.size() == 8);
  const auto hot = solver.solve(next, 8, &warm);
  const auto cold = solver.solve(next, 8);
  REQUIRE(hot.status == QPStatus::optimal);
  CHECK(rel_close(hot.value, cold.value, 1e-8));
}

TEST_CASE("long horizons stay accurate") {
  const auto spec = arrhc::test::demo_spec();
  HorizonSolver solver(spec);
  XorShift64Star rng(6);
  const Vector x = sample_X0(spec, rng, 0.999, true);
  const auto sol = solver.solve(x, 1300);
  REQUIRE(sol.status == QPStatus::optimal);
  const double v_short = solver.value(x, 60);
  // Tail contribution is negligible once the state has converged.
  CHECK(rel_close(sol.value, v_short, 1e-8));
}

TEST_CASE("project_ellipsoid") {
  const Vector inside = (Vector(2) << 0.1, 0.2).finished();
  CHECK(project_ellipsoid(inside, SymMatrix::identity(2), 1.0) == inside);

  const Vector p = project_ellipsoid((Vector(2) << 2, 0).finished(), SymMatrix::identity(2), 1.0);
  CHECK(p(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(p(1)) < 1e-14);

  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 4, 1;
  const Vector q = project_ellipsoid((Vector(2) << 3, 0).finished(), SymMatrix(d), 4.0);
  CHECK(q(0) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(q(1)) < 1e-14);
}

TEST_CASE("project_ellipsoid satisfies the projection optimality conditions") {
  XorShift64Star rng(21);
  for (int i = 0; i < 500; ++i) {
    const auto n = static_cast<Eigen::Index>(1 + i % 4);
    const SymMatrix pb = arrhc::test::random_spd(rng, n, 0.1);
    const double c = rng.uniform(0.5, 5.0);
    const Vector z = arrhc::test::random_matrix(rng, n, 1, -10, 10);
    const Vector x = project_ellipsoid(z, pb, c);
    if (quad_form(z, pb) <= c) {
      CHECK(x == z);
      continue;
    }
    CHECK(std::abs(quad_form(x, pb) - c) <= 1e-9 * c);
    // z - x = mu Pbar x for some mu >= 0.
    const Vector grad = pb.matrix() * x;
    const double mu = (z - x).dot(grad) / grad.squaredNorm();
    CHECK(mu >= 0.0);
    CHECK((z - x - mu * grad).norm() <= 1e-8 * std::max(1.0, z.norm()));
  }
}

TEST_CASE("solve: example system with one step matches the interval closed form") {
  const auto spec = arrhc::test::demo_spec();
  XorShift64Star rng(64);
  int active = 0;
  for (int i = 0; i < 200; ++i) {
    const Vector x = sample_X0(spec, rng, rng.uniform(0.9, 1.0), true);
    const Vector ax = spec.A() * x;
    const Vector b = spec.B().col(0);
    const Matrix& pb = spec.Pbar().matrix();
    const Matrix& p = spec.P().matrix();
    // Pbar-constraint: qa u^2 + 2 qb u + qc <= 0.
    const double qa = b.dot(pb * b), qb = b.dot(pb * ax), qc = ax.dot(pb * ax) - spec.c();
    const double disc = qb * qb - qa * qc;
    REQUIRE(disc >= 0);
    const double lo = std::max(-spec.u_max(), (-qb - std::sqrt(disc)) / qa);
    const double hi = std::min(spec.u_max(), (-qb + std::sqrt(disc)) / qa);
    const double qq = spec.Q().matrix()(0, 0);
    const double u_free = -b.dot(p * ax) / (qq + b.dot(p * b));
    const double u_star = std::clamp(u_free, lo, hi);
    if (u_star != u_free) ++active;
    const Vector x1 = ax + b * u_star;
    const double j_star = x.dot(p * x) + qq * u_star * u_star + x1.dot(p * x1);

    const auto sol = solve_nqp(build_nqp(spec, x, 1));
    REQUIRE(sol.status == QPStatus::optimal);
    CHECK(std::abs(sol.inputs[0](0) - u_star) <= 1e-6 * std::max(1.0, std::abs(u_star)));
    CHECK(rel_close(sol.value, j_star, 1e-7));
  }
  CHECK(active > 20);
}
