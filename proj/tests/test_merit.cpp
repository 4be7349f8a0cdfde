#include "doctest.h"
#include "oracles.hpp"
#include "ssqp/kkt.hpp"
#include "ssqp/merit.hpp"

using namespace ssqp;

TEST_CASE("phi") {
  const Vec c = (Vec(2) << -1.0, 2.0).finished();
  CHECK(phi(0.1, 2.0, c) == doctest::Approx(3.2));
  CHECK(phi(0.1, 2.0, Vec(Vec::Zero(3))) == doctest::Approx(0.2));
}

TEST_CASE("worked example merit quantities") {
  const Mat h = Mat::Identity(2, 2);
  const Mat j = (Mat(1, 2) << 1.0, 0.0).finished();
  const Vec g = (Vec(2) << 1.0, 1.0).finished();
  const Vec c = Vec::Constant(1, 0.5);
  const Vec d = (Vec(2) << -0.5, -1.0).finished();

  CHECK(model_q(0.1, 0.0, c, j, g, h, d) == doctest::Approx(-0.0875).epsilon(1e-14));
  const double dq = reduction_delta_q(0.1, c, g, h, d);
  CHECK(dq == doctest::Approx(0.5875).epsilon(1e-14));
  const auto xt = xi_trial(0.1, dq, d);
  CHECK_FALSE(xt.is_infinite());
  CHECK(xt.value() == doctest::Approx(4.7).epsilon(1e-14));
  // Treating g as the true gradient: rho = -1.5 + 1.25 < 0.
  CHECK(tau_trial_true(0.5, c, g, h, d).is_infinite());
}

TEST_CASE("model and reduction identities") {
  const Mat h = Mat::Identity(2, 2);
  const Mat j = (Mat(1, 2) << 1.0, 0.0).finished();
  const Vec g = (Vec(2) << 1.0, 1.0).finished();
  const Vec c = Vec::Constant(1, 0.5);
  CHECK(model_q(0.1, 3.0, c, j, g, h, Vec(Vec::Zero(2))) == doctest::Approx(phi(0.1, 3.0, c)));
  CHECK(reduction_delta_q(0.1, c, g, h, Vec(Vec::Zero(2))) == doctest::Approx(0.5));

  SUBCASE("negative curvature is clamped") {
    const Mat hn = -Mat::Identity(2, 2);
    const Vec d = (Vec(2) << 0.3, -0.2).finished();
    const double f = 1.5;
    const double expect = 0.1 * (f + g.dot(d)) + (c + j * d).lpNorm<1>();
    CHECK(model_q(0.1, f, c, j, g, hn, d) == doctest::Approx(expect).epsilon(1e-15));
  }

  SUBCASE("q(0) - q(d) on random KKT solutions") {
    Rng rng(9);
    for (int t = 0; t < 100; ++t) {
      const auto r = oracle::random_kkt(10, 3, rng);
      const auto s = solve_kkt(KktInputs<double>{r.h, r.j, r.g, r.c});
      const double f = standard_normal(1, rng)(0);
      const double q0 = model_q(0.1, f, r.c, r.j, r.g, r.h, Vec(Vec::Zero(10)));
      const double qd = model_q(0.1, f, r.c, r.j, r.g, r.h, s.d);
      const double dq = reduction_delta_q(0.1, r.c, r.g, r.h, s.d);
      CHECK(std::abs((q0 - qd) - dq) <= 1e-12 * std::max(1.0, std::abs(dq)));
    }
  }
}

TEST_CASE("trial values") {
  CHECK(xi_trial(0.1, 1.0, Vec(Vec::Zero(3))).is_infinite());
  CHECK(1e300 <= xi_trial(0.1, 1.0, Vec(Vec::Zero(3))));

  // nu = 0.5, ||c||_1 = 1, rho = 2.
  const Vec c = (Vec(2) << 0.25, -0.75).finished();
  const Mat h = Mat::Zero(2, 2);
  const Vec grad = (Vec(2) << 2.0, 0.0).finished();
  const Vec d = (Vec(2) << 1.0, 0.0).finished();
  const auto tt = tau_trial_true(0.5, c, grad, h, d);
  CHECK(tt.value() == doctest::Approx(0.25));
  CHECK(0.25 <= tt);
  CHECK(0.26 > tt);
  CHECK(tau_trial_true(0.5, c, Vec(-grad), h, d).is_infinite());
}

TEST_CASE("reduction lower bound") {
  SUBCASE("stationary point") {
    const Mat h = Mat::Identity(3, 3);
    const auto r = check_reduction_lbnd(0.1, 0.5, Vec(Vec::Zero(2)), Vec(Vec::Ones(3)), h,
                                        Vec(Vec::Zero(3)));
    CHECK(r.holds);
    CHECK(r.slack == 0.0);
  }
  SUBCASE("holds whenever tau <= tau_trial_true") {
    Rng rng(10);
    long checked = 0;
    for (int t = 0; t < 500; ++t) {
      const auto r = oracle::random_kkt(8, 3, rng);
      const auto s = solve_kkt(KktInputs<double>{r.h, r.j, r.g, r.c});
      const auto tt = tau_trial_true(0.5, r.c, r.g, r.h, s.d);
      for (double tau : {1e-3, 0.1, 1.0, 10.0}) {
        if (!(tau <= tt)) continue;
        ++checked;
        CHECK(check_reduction_lbnd(tau, 0.5, r.c, r.g, r.h, s.d).holds);
        CHECK(reduction_delta_q(tau, r.c, r.g, r.h, s.d) >= 0.5 * r.c.lpNorm<1>() - 1e-10);
      }
    }
    CHECK(checked > 100);
  }
  SUBCASE("tau ten times the trial value breaks it") {
    // rho > 0: grad = (1, 0), d = (1, 0) with H = I gives rho = 2, ||c||_1 = 1.
    const Mat h = Mat::Identity(2, 2);
    const Vec c = Vec::Constant(1, -1.0);
    const Vec grad = (Vec(2) << 1.0, 0.0).finished();
    const Vec d = (Vec(2) << 1.0, 0.0).finished();
    const auto tt = tau_trial_true(0.5, c, grad, h, d);
    CHECK(tt.value() == doctest::Approx(0.25));
    // lhs = -2.5 (1 + 0.5) + 1 = -2.75, rhs = 0.5 * 2.5 + 0.5 = 1.75.
    const auto r = check_reduction_lbnd(10.0 * tt.value(), 0.5, c, grad, h, d);
    CHECK_FALSE(r.holds);
    CHECK(r.slack == doctest::Approx(-4.5));
    // At the trial value the bound is tight.
    const auto at = check_reduction_lbnd(tt.value(), 0.5, c, grad, h, d);
    CHECK(at.holds);
    CHECK(at.slack == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("MeritParams validation") {
  CHECK_NOTHROW(MeritParams{}.validate());
  CHECK_THROWS_AS((MeritParams{0.0, 1.0, 0.5}.validate()), ConfigError);
  CHECK_THROWS_AS((MeritParams{0.1, -1.0, 0.5}.validate()), ConfigError);
  CHECK_THROWS_AS((MeritParams{0.1, 1.0, 1.0}.validate()), ConfigError);
  CHECK_THROWS_AS((MeritParams{0.1, 1.0, 0.0}.validate()), ConfigError);
}
