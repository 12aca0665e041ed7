#pragma once

#include <vector>

#include "css/attractors.hpp"

namespace css {

struct LyapunovConfig {
  double total_time = 1000.0;  // accumulation window after the transient
  double qr_interval = 0.1;    // time between reorthonormalizations
  double transient = 100.0;
  double dt = 1e-4;            // RK4 step for state and tangent matrix
};

struct LyapunovResult {
  Eigen::Vector3d exponents;  // sorted descending
  double kaplan_yorke_dimension = 0.0;
  LyapunovConfig config;
};

/// Kaplan-Yorke dimension of a spectrum sorted in descending order:
/// k + (sum of the first k exponents) / |exponent k+1| with k the largest
/// index keeping the partial sum nonnegative; 0 when the first exponent is
/// negative; the full dimension when every partial sum is nonnegative.
double kaplan_yorke(const std::vector<double>& exponents_descending);

/// Full spectrum by tangent-space integration: the state and a 3x3 tangent
/// frame advance together under one RK4 step using the analytic Jacobian, and
/// the frame is QR-reorthonormalized on a fixed schedule, accumulating
/// log |r_ii|.
LyapunovResult lyapunov_spectrum(Attractor a, const LyapunovConfig& cfg = {});

}  // namespace css
