#include <cmath>

#include "doctest.h"
#include "arrhc/certificates.hpp"
#include "arrhc/errors.hpp"
#include "arrhc/horizon_qp.hpp"
#include "cert_oracle.hpp"
#include "test_util.hpp"

using namespace arrhc;
using arrhc::test::rel_close;

namespace {

SystemSpec scalar(double abar, double q = 1.0) {
  SystemParams sp;
  sp.A = Matrix::Constant(1, 1, abar);
  sp.B = Matrix::Constant(1, 1, 1.0);
  sp.K = Matrix::Zero(1, 1);
  sp.P = Matrix::Identity(1, 1);
  sp.Q = Matrix::Constant(1, 1, q);
  sp.Qbar = Matrix::Identity(1, 1);
  sp.c = 1.0;
  sp.u_max = 1.0;
  return SystemSpec::validate(sp);
}

}  // namespace

TEST_CASE("lambda") {
  CHECK(compute_lambda(scalar(0.5)) == doctest::Approx(0.25).epsilon(1e-15));

  const SymMatrix printed(*demo_params().Pbar_reference);
  const double lp = compute_lambda(SymMatrix::identity(2), printed, LambdaMode::proof);
  CHECK(lp == doctest::Approx(1 - 1 / 32.89406069682061).epsilon(1e-12));
  CHECK(lp == doctest::Approx(0.9696).epsilon(1e-4));

  const SymMatrix two(2.0 * Matrix::Identity(2, 2));
  CHECK_THROWS_AS(compute_lambda(two, two, LambdaMode::proof), CertificateInvalid);
  CHECK_THROWS_AS(compute_lambda(two, two, LambdaMode::table), CertificateInvalid);
  // Table mode uses lmin(Pbar), which for the printed matrix is below lmax(Qbar) + ... still valid here.
  CHECK(compute_lambda(SymMatrix::identity(2), printed, LambdaMode::table) ==
        doctest::Approx(1 - 1 / 1.0689393031793912).epsilon(1e-12));
  CHECK(lambda_mode_from_string("table") == LambdaMode::table);
  CHECK_THROWS_AS(lambda_mode_from_string("x"), DomainError);
}

TEST_CASE("phi") {
  const auto spec = arrhc::test::demo_spec();
  const double pre = phi_prefactor(spec);
  CHECK(compute_phi(spec, 7, 1e-15) == doctest::Approx(pre).epsilon(1e-13));
  const double lambda = compute_lambda(spec);
  const double inf = compute_phi_inf(spec, lambda);
  for (int N = 1; N < 50; ++N)
    CHECK(std::abs(compute_phi(spec, N, lambda) / inf - (1 - std::pow(lambda, N + 1))) < 1e-12);
  const arrhc::test::DirectCertificates d(spec);
  CHECK(rel_close(compute_phi(spec, 5, lambda), d.phi(5), 1e-13));
  CHECK_THROWS_AS(compute_phi(spec, 0, lambda), DomainError);
}

TEST_CASE("alpha and rho") {
  const auto spec = arrhc::test::demo_spec();
  const CertificateSet cs(spec);
  const arrhc::test::DirectCertificates d(spec);
  for (int N = 1; N < 200; ++N) {
    CHECK(cs.alpha(N) > 0);
    CHECK(rel_close(cs.alpha(N + 1) / cs.alpha(N), 1 - cs.lambda_min_P() / cs.phi(N + 1), 1e-12));
  }
  CHECK(rel_close(cs.alpha(10), d.alpha(10), 1e-12));
  CHECK(rel_close(cs.alpha(1300), d.alpha(1300), 1e-10));
  CHECK(rel_close(cs.rho(2), (1 + cs.alpha(1)) * (1 - cs.lambda_min_P() / cs.phi(2)), 1e-13));
  CHECK(rel_close(cs.rho(10), d.rho(10), 1e-12));
  CHECK(rel_close(cs.rho(700), d.rho(700), 1e-11));
  CHECK_THROWS_AS(cs.alpha(0), DomainError);
  CHECK_THROWS_AS(cs.rho(1), DomainError);
  CHECK_THROWS_AS(cs.alpha(cs.max_horizon() + 1), DomainError);
}

TEST_CASE("example system constants") {
  // Cross-checked with an independent double-precision script.
  const CertificateSet cs(arrhc::test::demo_spec());
  CHECK(cs.lambda() == doctest::Approx(0.85814).epsilon(1e-5));
  CHECK(cs.chi() == doctest::Approx(0.9941009).epsilon(1e-7));
  CHECK(cs.psi() == doctest::Approx(4.6956).epsilon(1e-4));
  CHECK(cs.phi_inf() == doctest::Approx(169.517).epsilon(1e-5));
  const int nstar[] = {1237, 1305, 1355, 1393, 1424, 1451};
  const int nhat[] = {1188, 1237, 1275, 1306, 1333, 1356};
  for (int S = 1; S <= 6; ++S) {
    CHECK(cs.Nstar(S) == nstar[S - 1]);
    CHECK(cs.Nhat_star(S) == nhat[S - 1]);
  }
}

TEST_CASE("gamma") {
  const auto spec = arrhc::test::demo_spec();
  const CertificateSet cs(spec);
  const arrhc::test::DirectCertificates d(spec);
  for (int N : {2, 5, 30, 400})
    CHECK(rel_close(cs.gamma(N, 0), cs.chi() * (1 + cs.alpha(N - 1)), 1e-13));
  for (int N : {5, 40, 1300})
    for (int S : {1, 2, 3})
      if (N >= S + 2) CHECK(rel_close(cs.gamma(N, S), d.gamma(N, S), 1e-11));
  CHECK_THROWS_AS(cs.gamma(3, 2), DomainError);
  CHECK_THROWS_AS(cs.beta(3, 2), DomainError);
}

TEST_CASE("gamma is below the chain bound and beta on a grid, and non-increasing in N") {
  const CertificateSet cs(arrhc::test::demo_spec());
  int checked = 0;
  for (int S = 0; S <= 8; ++S) {
    double prev = INFINITY;
    for (int N = S + 2; N <= 2000; ++N) {
      const double g = cs.gamma(N, S);
      const double mid = cs.chi() * std::pow(1 + cs.alpha(N - S - 1), S + 2);
      CHECK(g <= mid * (1 + 1e-12));
      CHECK(mid <= cs.beta(N, S) * (1 + 1e-12));
      CHECK(g <= prev * (1 + 1e-12));
      prev = g;
      ++checked;
    }
  }
  CHECK(checked > 10000);
}

TEST_CASE("gamma_hat") {
  const auto spec = arrhc::test::demo_spec();
  const CertificateSet cs(spec);
  const arrhc::test::DirectCertificates d(spec);
  // S = 1: the inner max is the empty product.
  for (int N : {4, 20, 900}) {
    const double expect = cs.chi() * cs.chi() * (1 + cs.alpha(N - 1)) * (1 + cs.alpha(N - 2)) * (1 + cs.alpha(N - 1));
    CHECK(rel_close(cs.gamma_hat(N, 1), expect, 1e-12));
  }
  for (int N : {9, 60, 1250})
    for (int S : {1, 2, 4, 6})
      CHECK(rel_close(cs.gamma_hat(N, S), d.gamma_hat(N, S), 1e-11));
  CHECK_THROWS_AS(cs.gamma_hat(4, 2), DomainError);
  CHECK_THROWS_AS(cs.gamma_hat(10, 0), DomainError);
  for (int S = 1; S <= 6; ++S) CHECK(cs.gamma_hat(3000, S) < 1);
  for (int S = 1; S <= 6; ++S) CHECK(cs.gamma(3000, S) < 1);
}

TEST_CASE("gamma_hat chained bound holds only while chi (1 + alpha) >= 1") {
  // The chained bound replaces the inner max by its s = S term, which is only
  // an upper bound when every factor chi (1 + alpha) is at least one.
  const CertificateSet cs(arrhc::test::demo_spec());
  int holds = 0, fails = 0;
  for (int S = 2; S <= 6; ++S) {
    for (int N = S + 3; N <= 3000; ++N) {
      const double chained = std::pow(cs.chi(), S + 1) *
                             std::pow(1 + cs.psi() * std::pow(cs.chi(), N - S - 1), 2 * S + 1);
      const bool premise = cs.chi() * (1 + cs.alpha(N - 2)) >= 1;
      if (premise) {
        CHECK(cs.gamma_hat(N, S) <= chained * (1 + 1e-12));
        ++holds;
      } else if (cs.gamma_hat(N, S) > chained * (1 + 1e-12)) {
        ++fails;
      }
    }
  }
  CHECK(holds > 0);
  CHECK(fails > 0);
}

TEST_CASE("invariants on the example grid") {
  const CertificateSet cs(arrhc::test::demo_spec());
  CHECK(cs.lambda() > 0);
  CHECK(cs.lambda() < 1);
  for (int N = 2; N <= 60; ++N) {
    CHECK(cs.phi(N) >= 1);
    CHECK(cs.phi(N) < cs.phi(N + 1));
    CHECK(cs.phi(N) <= cs.phi_inf());
    CHECK(cs.alpha(N + 1) < cs.alpha(N));
    CHECK(cs.lambda_min_P() / cs.phi(N) < 1);
  }
  CHECK(cs.alpha(9000) < 1e-20);
  for (int S = 1; S <= 5; ++S) CHECK(cs.Nhat_star(S) <= cs.Nstar(S));
}

TEST_CASE("horizon thresholds") {
  const CertificateSet cs(arrhc::test::demo_spec());
  for (int S = 1; S <= 4; ++S) {
    const int n = cs.Nstar(S);
    CHECK((n == S + 2 || cs.gamma(n - 1, S) >= 1));
    for (int N = n; N <= CertificateSet::kDefaultNCap; N += 7) CHECK(cs.gamma(N, S) < 1);
    const int nh = cs.Nhat_star(S);
    CHECK((nh == S + 3 || cs.gamma_hat(nh - 1, S) >= 1));
  }
  for (int S = 2; S <= 6; ++S) CHECK(cs.Nstar(S) <= std::ceil(cs.PiE(S)));

  try {
    (void)cs.Nstar(1, 500);
    FAIL("expected NotFoundError");
  } catch (const NotFoundError& e) {
    CHECK(e.min_rate() >= 1.0);
    CHECK(rel_close(e.min_rate(), cs.gamma(500, 1), 1e-14));
  }
}

TEST_CASE("fast scalar system") {
  const auto spec = scalar(0.1);
  const CertificateSet cs(spec);
  const arrhc::test::DirectCertificates d(spec);
  CHECK(cs.chi() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(cs.psi() == doctest::Approx(0.01).epsilon(1e-12));
  // Scan oracle on direct evaluations.
  int last_bad = 2;
  for (int N = 3; N <= 100; ++N)
    if (!(d.gamma(N, 1) < 1)) last_bad = N;
  CHECK(cs.Nstar(1, 100) == last_bad + 1);
  CHECK(cs.Nstar(1, 100) == 3);
  CHECK(cs.Sstar(40) == 38);
  CHECK(cs.Shat_star(40) == 37);
}

TEST_CASE("explicit bounds") {
  const CertificateSet cs(arrhc::test::demo_spec());
  CHECK_THROWS_AS(cs.PiE(1), DomainError);
  CHECK_THROWS_AS(cs.PiA(1), DomainError);

  // Long-double re-evaluation at S = 2.
  const long double chi = cs.chi(), psi = cs.psi();
  const long double e = 2 + 1 + (std::log(std::pow(chi, -1.0L / 4) - 1) - std::log(psi)) / std::log(chi);
  const long double a = 2 + 1 + (std::log(std::pow(chi, -3.0L / 5) - 1) - std::log(psi)) / std::log(chi);
  CHECK(rel_close(cs.PiE(2), static_cast<double>(e), 1e-12));
  CHECK(rel_close(cs.PiA(2), static_cast<double>(a), 1e-12));

  // PiA - S increases to the constant 1 + (ln(chi^{-1/2} - 1) - ln psi)/ln chi, while
  // PiE - S keeps growing like ln(S + 2)/|ln chi|.
  const double lc = std::log(cs.chi());
  const double pia_limit = 1 + (std::log(std::pow(cs.chi(), -0.5) - 1) - std::log(cs.psi())) / lc;
  for (int S = 3; S <= 40; ++S) {
    CHECK(cs.PiA(S) - S > cs.PiA(S - 1) - (S - 1));
    CHECK(cs.PiA(S) - S < pia_limit);
    CHECK(cs.PiE(S) - S > cs.PiE(S - 1) - (S - 1));
    CHECK(cs.PiA(S) - cs.PiA(S - 1) < cs.PiE(S) - cs.PiE(S - 1));
  }
  CHECK(cs.PiE(4000) - 4000 > pia_limit + std::log(4000.0 / 42) / -lc - 1);

  // Sign of the correction term at chi = 0.01, psi = 1: positive iff chi^{-1/(S+2)} < 2.
  for (int S = 2; S <= 12; ++S) {
    const double corr = pi_E(0.01, 1.0, S) - (S + 1);
    CHECK((corr > 0) == (std::pow(0.01, -1.0 / (S + 2)) < 2.0));
  }
}

TEST_CASE("reverse budgets") {
  const CertificateSet cs(arrhc::test::demo_spec());
  for (int N : {1300, 1400, 1500, 2000}) {
    const int s = cs.Sstar(N);
    for (int S = 1; S <= s; ++S) CHECK(cs.gamma(N, S) < 1);
    if (s + 1 <= N - 2) CHECK(cs.gamma(N, s + 1) >= 1);
  }
  CHECK(cs.Sstar(100) == 0);
  for (int S = 1; S <= 6; ++S)
    for (int N = cs.Nstar(S); N <= cs.Nstar(S) + 200; N += 20) CHECK(S <= cs.Sstar(N));
  CHECK_THROWS_AS(cs.Sstar(2), DomainError);
}

TEST_CASE("cost bound") {
  const auto spec = arrhc::test::demo_spec();
  const CertificateSet cs(spec);
  CHECK(cost_bound(spec, cs, Vector::Zero(2), 1300, 1) == 0.0);
  XorShift64Star rng(2);
  const Vector x = sample_X0(spec, rng);
  const double b = cost_bound(spec, cs, x, 1300, 1);
  CHECK(b >= value_VN(spec, x, 1300));
  CHECK_THROWS_AS(cost_bound(spec, cs, x, 100, 1), NoCertificateError);
}

TEST_CASE("certificate report") {
  const CertificateSet cs(arrhc::test::demo_spec());
  const auto r = certificate_report(cs, {5, 1300}, {1, 2}, 2000);
  CHECK(r.at("per_S").size() == 2);
  CHECK(r.at("per_S")[0].at("PiE").is_null());
  CHECK(r.at("per_S")[1].at("Nstar") == 1305);
  CHECK(r.at("grid").size() == 4);
  CHECK(r.at("grid")[0].at("gamma").is_number());
  CHECK(render_certificate_table(r).find("Nhat*") != std::string::npos);
}
