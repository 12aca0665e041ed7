#include "css/attractors.hpp"

namespace css {

std::string_view to_string(Attractor a) {
  switch (a) {
    case Attractor::sprott_n: return "sprott_n";
    case Attractor::rossler: return "rossler";
    case Attractor::halvorsen: return "halvorsen";
    case Attractor::lorenz: return "lorenz";
    case Attractor::sprott_b: return "sprott_b";
    case Attractor::thomas: return "thomas";
  }
  throw InvalidInputError("unknown attractor enum value");
}

Attractor attractor_from_string(std::string_view name) {
  for (Attractor a : kAllAttractors)
    if (name == to_string(a)) return a;
  throw InvalidInputError("unknown attractor '" + std::string(name) +
                          "', expected one of sprott_n, rossler, halvorsen, "
                          "lorenz, sprott_b, thomas");
}

AttractorSpec attractor_spec(Attractor a) {
  AttractorSpec s;
  s.system = a;
  switch (a) {
    case Attractor::sprott_n: s.default_initial_state = {1.0, 0.0, 0.0}; break;
    case Attractor::rossler: s.default_initial_state = {1.0, 1.0, 1.0}; break;
    case Attractor::halvorsen: s.default_initial_state = {-2.0, 0.0, 1.0}; break;
    case Attractor::lorenz: s.default_initial_state = {1.0, 1.0, 1.0}; break;
    case Attractor::sprott_b: s.default_initial_state = {0.5, 0.2, 1.0}; break;
    case Attractor::thomas: s.default_initial_state = {1.0, 0.0, 0.0}; break;
  }
  return s;
}

Eigen::Vector3d eval_vector_field(Attractor a, const Eigen::Vector3d& s) {
  const double x = s(0), y = s(1), z = s(2);
  switch (a) {
    case Attractor::sprott_n:
      return {-10.0 * y, 5.0 * x + 5.0 * z * z, 5.0 + 5.0 * y - 10.0 * z};
    case Attractor::rossler:
      return {-5.0 * y - 5.0 * z, 5.0 * x + 2.5 * y,
              10.0 + 5.0 * x * z - 20.0 * z};
    case Attractor::halvorsen:
      return {-1.4 * x - 4.0 * y - 4.0 * z - y * y,
              -1.4 * y - 4.0 * z - 4.0 * x - z * z,
              -1.4 * z - 4.0 * x - 4.0 * y - x * x};
    case Attractor::lorenz:
      return {-10.0 * x + 10.0 * y, 28.0 * x - y - x * z,
              -8.0 / 3.0 * z + x * y};
    case Attractor::sprott_b:
      return {8.0 * y * z, 8.0 * x - 8.0 * y, 8.0 - 8.0 * x * y};
    case Attractor::thomas:
      return {-1.85 * x + 10.0 * std::sin(y), -1.85 * y + 10.0 * std::sin(z),
              -1.85 * z + 10.0 * std::sin(x)};
  }
  throw InvalidInputError("unknown attractor enum value");
}

Eigen::Matrix3d jacobian(Attractor a, const Eigen::Vector3d& s) {
  const double x = s(0), y = s(1), z = s(2);
  Eigen::Matrix3d j;
  switch (a) {
    case Attractor::sprott_n:
      j << 0, -10, 0,
           5, 0, 10 * z,
           0, 5, -10;
      return j;
    case Attractor::rossler:
      j << 0, -5, -5,
           5, 2.5, 0,
           5 * z, 0, 5 * x - 20;
      return j;
    case Attractor::halvorsen:
      j << -1.4, -4 - 2 * y, -4,
           -4, -1.4, -4 - 2 * z,
           -4 - 2 * x, -4, -1.4;
      return j;
    case Attractor::lorenz:
      j << -10, 10, 0,
           28 - z, -1, -x,
           y, x, -8.0 / 3.0;
      return j;
    case Attractor::sprott_b:
      j << 0, 8 * z, 8 * y,
           8, -8, 0,
           -8 * y, -8 * x, 0;
      return j;
    case Attractor::thomas:
      j << -1.85, 10 * std::cos(y), 0,
           0, -1.85, 10 * std::cos(z),
           10 * std::cos(x), 0, -1.85;
      return j;
  }
  throw InvalidInputError("unknown attractor enum value");
}

Eigen::Vector3d rk4_step(Attractor a, const Eigen::Vector3d& x, double dt) {
  const Eigen::Vector3d k1 = eval_vector_field(a, x);
  const Eigen::Vector3d k2 = eval_vector_field(a, x + 0.5 * dt * k1);
  const Eigen::Vector3d k3 = eval_vector_field(a, x + 0.5 * dt * k2);
  const Eigen::Vector3d k4 = eval_vector_field(a, x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {

constexpr double kStateBound = 1e6;

void check_state(const Eigen::Vector3d& x, Attractor a, long step) {
  if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kStateBound)
    throw NumericalBlowupError(std::string(to_string(a)) +
                                   " state left [-1e6, 1e6]",
                               step);
}

}  // namespace

Eigen::Vector3d advance(Attractor a, Eigen::Vector3d x, double dt,
                        long n_steps) {
  require(dt > 0.0, "advance needs dt > 0");
  for (long k = 0; k < n_steps; ++k) {
    x = rk4_step(a, x, dt);
    if ((k & 0xff) == 0xff || k + 1 == n_steps) check_state(x, a, k);
  }
  return x;
}

Trajectory integrate_rk4(Attractor a, const Eigen::Vector3d& x0, double dt,
                         long n_steps, long subsample) {
  require(dt > 0.0, "integrate_rk4 needs dt > 0");
  require(n_steps > 0, "integrate_rk4 needs n_steps > 0");
  require(subsample > 0 && n_steps % subsample == 0,
          "n_steps must be a positive multiple of subsample");

  Trajectory t;
  t.dt = dt * static_cast<double>(subsample);
  t.channel_names = {"x", "y", "z"};
  t.values.resize(3, n_steps / subsample + 1);
  t.values.col(0) = x0;

  Eigen::Vector3d x = x0;
  check_state(x, a, 0);
  for (long k = 0; k < n_steps; ++k) {
    x = rk4_step(a, x, dt);
    if ((k + 1) % subsample == 0) {
      check_state(x, a, k);
      t.values.col((k + 1) / subsample) = x;
    }
  }
  return t;
}

}  // namespace css
