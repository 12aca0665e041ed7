#include <doctest.h>

#include <cmath>

#include "css/attractors.hpp"
#include "css/lyapunov.hpp"

using namespace css;
using doctest::Approx;

namespace {

// Hand-derived fixed points, f(x*) = 0 exactly in real arithmetic.
const struct {
  Attractor a;
  Eigen::Vector3d x;
} kFixedPoints[] = {
    {Attractor::sprott_n, {-0.25, 0.0, 0.5}},
    {Attractor::rossler,
     {2.0 - std::sqrt(3.0), 2.0 * std::sqrt(3.0) - 4.0,
      4.0 - 2.0 * std::sqrt(3.0)}},
    {Attractor::halvorsen, {-9.4, -9.4, -9.4}},
    {Attractor::lorenz, {std::sqrt(72.0), std::sqrt(72.0), 27.0}},
    {Attractor::sprott_b, {1.0, 1.0, 0.0}},
    {Attractor::thomas, {0.0, 0.0, 0.0}},
};

Eigen::Matrix3d fd_jacobian(Attractor a, const Eigen::Vector3d& x) {
  Eigen::Matrix3d j;
  const double h = 1e-6;
  for (int c = 0; c < 3; ++c) {
    Eigen::Vector3d xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    j.col(c) = (eval_vector_field(a, xp) - eval_vector_field(a, xm)) / (2 * h);
  }
  return j;
}

}  // namespace

TEST_CASE("vector fields match hand-substituted values") {
  Eigen::Vector3d v;

  v = eval_vector_field(Attractor::lorenz, {1, 1, 1});
  CHECK(v(0) == Approx(0.0));
  CHECK(v(1) == Approx(26.0));
  CHECK(v(2) == Approx(1.0 - 8.0 / 3.0));

  v = eval_vector_field(Attractor::sprott_n, {0, 0, 5});
  CHECK(v(0) == Approx(0.0));
  CHECK(v(1) == Approx(125.0));
  CHECK(v(2) == Approx(-45.0));

  v = eval_vector_field(Attractor::rossler, {1, 1, 1});
  CHECK(v(0) == Approx(-10.0));
  CHECK(v(1) == Approx(7.5));
  CHECK(v(2) == Approx(-5.0));

  v = eval_vector_field(Attractor::halvorsen, {1, 2, 3});
  CHECK(v(0) == Approx(-25.4));
  CHECK(v(1) == Approx(-27.8));
  CHECK(v(2) == Approx(-17.2));

  v = eval_vector_field(Attractor::sprott_b, {1, 2, 3});
  CHECK(v(0) == Approx(48.0));
  CHECK(v(1) == Approx(-8.0));
  CHECK(v(2) == Approx(-8.0));

  const double half_pi = std::acos(0.0);
  v = eval_vector_field(Attractor::thomas, {0.0, half_pi, 0.0});
  CHECK(v(0) == Approx(10.0));
  CHECK(v(1) == Approx(-1.85 * half_pi));
  CHECK(v(2) == Approx(0.0));
}

TEST_CASE("fixed points are stationary") {
  for (const auto& fp : kFixedPoints) {
    CAPTURE(to_string(fp.a));
    CHECK(eval_vector_field(fp.a, fp.x).norm() < 1e-12);
    // RK4 leaves an exact fixed point in place
    const Eigen::Vector3d next = rk4_step(fp.a, fp.x, 1e-3);
    CHECK((next - fp.x).norm() < 1e-12);
  }
}

TEST_CASE("analytic jacobians agree with finite differences") {
  const Eigen::Vector3d probes[] = {
      {0.3, -1.2, 2.1}, {-2.0, 0.7, -0.5}, {1.5, 1.5, 1.5}};
  for (Attractor a : kAllAttractors) {
    for (const auto& x : probes) {
      CAPTURE(to_string(a));
      const Eigen::Matrix3d err = jacobian(a, x) - fd_jacobian(a, x);
      CHECK(err.cwiseAbs().maxCoeff() < 1e-5);
    }
  }
}

TEST_CASE("jacobian traces of the constant-divergence systems") {
  const Eigen::Vector3d x(0.4, -0.9, 1.7);
  CHECK(jacobian(Attractor::sprott_n, x).trace() == Approx(-10.0));
  CHECK(jacobian(Attractor::halvorsen, x).trace() == Approx(-4.2));
  CHECK(jacobian(Attractor::lorenz, x).trace() == Approx(-41.0 / 3.0));
  CHECK(jacobian(Attractor::sprott_b, x).trace() == Approx(-8.0));
  CHECK(jacobian(Attractor::thomas, x).trace() == Approx(-5.55));
  // the rossler variant's divergence depends on x
  CHECK(jacobian(Attractor::rossler, x).trace() ==
        Approx(2.5 + 5.0 * x(0) - 20.0));
}

TEST_CASE("rk4 shows fourth-order self-convergence on lorenz") {
  const Eigen::Vector3d x0(1, 1, 1);
  const double T = 1.0;
  auto run = [&](double dt) {
    return advance(Attractor::lorenz, x0, dt, std::lround(T / dt));
  };
  const Eigen::Vector3d ref = run(1e-6);
  const double e1 = (run(4e-4) - ref).norm();
  const double e2 = (run(2e-4) - ref).norm();
  const double ratio = e1 / e2;
  CHECK(ratio > 10.0);
  CHECK(ratio < 24.0);
}

TEST_CASE("integrate_rk4 records the initial state and honors subsample") {
  const Eigen::Vector3d x0(1, 1, 1);
  const Trajectory t = integrate_rk4(Attractor::lorenz, x0, 1e-3, 300, 10);
  CHECK(t.n_samples() == 31);
  CHECK(t.dt == Approx(1e-2));
  CHECK(t.values.col(0) == x0);
  CHECK(t.channel_names == std::vector<std::string>{"x", "y", "z"});

  // sample k equals plain stepping to the same time
  const Eigen::Vector3d direct = advance(Attractor::lorenz, x0, 1e-3, 20);
  CHECK((t.values.col(2) - direct).norm() < 1e-14);

  CHECK_THROWS_AS(integrate_rk4(Attractor::lorenz, x0, 1e-3, 301, 10),
                  InvalidInputError);
}

TEST_CASE("divergent integration reports a blowup with a step index") {
  // dt far above the stability limit makes lorenz explode quickly
  try {
    advance(Attractor::lorenz, {1, 1, 1}, 0.5, 10000);
    FAIL("expected NumericalBlowupError");
  } catch (const NumericalBlowupError& e) {
    CHECK(e.step >= 0);
    CHECK(e.step < 10000);
  }
}

TEST_CASE("thomas stays bounded over a long run") {
  // brute-force long run; dt relaxed to keep the test quick, well inside the
  // stability region for this slow system
  Eigen::Vector3d x = attractor_spec(Attractor::thomas).default_initial_state;
  double peak = 0.0;
  for (int block = 0; block < 500; ++block) {
    x = advance(Attractor::thomas, x, 1e-3, 10000);  // 10 time units
    peak = std::max(peak, x.cwiseAbs().maxCoeff());
  }
  CHECK(peak < 10.0);
  CHECK(peak > 1.0);
}

TEST_CASE("attractor names round-trip and reject junk") {
  for (Attractor a : kAllAttractors)
    CHECK(attractor_from_string(to_string(a)) == a);
  CHECK_THROWS_AS(attractor_from_string("roessler"), InvalidInputError);
}

TEST_CASE("kaplan-yorke on hand-worked spectra") {
  CHECK(kaplan_yorke({1.0, -2.0}) == Approx(1.5));
  CHECK(kaplan_yorke({-1.0, -2.0}) == Approx(0.0));
  CHECK(kaplan_yorke({0.1, 0.05, 0.0}) == Approx(3.0));
  CHECK(kaplan_yorke({0.9, 0.0, -0.9}) == Approx(3.0));
  CHECK(kaplan_yorke({0.931, -0.017, -14.588}) == Approx(2.0627).epsilon(3e-4));
  CHECK_THROWS_AS(kaplan_yorke({1.0, 2.0}), InvalidInputError);
  // exponents below the cutoff index cannot change the result
  CHECK(kaplan_yorke({1.0, -2.0, -50.0}) == Approx(1.5));
}

TEST_CASE("kaplan-yorke reproduces the tabulated dimensions") {
  const struct {
    double l1, l2, l3, dim;
  } rows[] = {
      {0.406, 0.001, -10.412, 2.0391}, {0.612, 0.000, -14.524, 2.0422},
      {0.668, 0.011, -4.874, 2.1393},  {0.931, -0.017, -14.588, 2.0627},
      {1.652, 0.000, -9.646, 2.1713},  {0.564, -0.036, -6.080, 2.0869},
  };
  for (const auto& r : rows)
    CHECK(std::abs(kaplan_yorke({r.l1, r.l2, r.l3}) - r.dim) < 5e-4);
}

TEST_CASE("short lyapunov run: exponent sum tracks the divergence") {
  // The sum of the exponents equals the time-averaged jacobian trace; for
  // lorenz that trace is constant, so even a short run must match closely.
  LyapunovConfig cfg;
  cfg.total_time = 20.0;
  cfg.transient = 20.0;
  cfg.dt = 1e-3;
  const LyapunovResult r = lyapunov_spectrum(Attractor::lorenz, cfg);
  CHECK(r.exponents.sum() == Approx(-41.0 / 3.0).epsilon(1e-3));
  CHECK(r.exponents(0) > 0.5);
  CHECK(r.exponents(0) < 1.4);
  CHECK(r.exponents(2) < -10.0);
  CHECK(r.kaplan_yorke_dimension == Approx(2.06).epsilon(0.05));
}
