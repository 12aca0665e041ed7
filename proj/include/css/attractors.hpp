#pragma once

#include <Eigen/Dense>
#include <array>
#include <string_view>

#include "css/trajectory.hpp"

namespace css {

/// The six 3-D chaotic systems used as sources. Coefficients are fixed; the
/// time scales are chosen so that all systems have comparable leading
/// Lyapunov exponents (same order of magnitude).
enum class Attractor { sprott_n, rossler, halvorsen, lorenz, sprott_b, thomas };

inline constexpr std::array<Attractor, 6> kAllAttractors = {
    Attractor::sprott_n, Attractor::rossler,  Attractor::halvorsen,
    Attractor::lorenz,   Attractor::sprott_b, Attractor::thomas};

std::string_view to_string(Attractor a);
Attractor attractor_from_string(std::string_view name);  // InvalidInputError

struct AttractorSpec {
  Attractor system;
  double integration_dt = 1e-4;           // RK4 step, time units
  Eigen::Vector3d default_initial_state;  // generic point in the basin
  double default_transient = 100.0;       // discard before any use
};

AttractorSpec attractor_spec(Attractor a);

Eigen::Vector3d eval_vector_field(Attractor a, const Eigen::Vector3d& x);
Eigen::Matrix3d jacobian(Attractor a, const Eigen::Vector3d& x);

Eigen::Vector3d rk4_step(Attractor a, const Eigen::Vector3d& x, double dt);

/// n_steps RK4 steps; throws NumericalBlowupError if any component leaves
/// [-1e6, 1e6] or stops being finite.
Eigen::Vector3d advance(Attractor a, Eigen::Vector3d x, double dt,
                        long n_steps);

/// Fixed-step RK4 run recording every `subsample`-th state, including the
/// initial one, so the result has n_steps / subsample + 1 samples spaced
/// dt * subsample apart. n_steps must be a multiple of subsample.
Trajectory integrate_rk4(Attractor a, const Eigen::Vector3d& x0, double dt,
                         long n_steps, long subsample = 1);

}  // namespace css
