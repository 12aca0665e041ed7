#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "css/trajectory.hpp"

namespace css {

// ---------------------------------------------------------------------------
// Kuramoto-Sivashinsky, y_t = -y y_x - y_xx - y_xxxx, periodic on [0, L).
// Integrated spectrally with ETDRK4; the phi-function coefficients come from
// a contour integral so small |h L_k| modes stay accurate.
// ---------------------------------------------------------------------------

struct KsConfig {
  double domain_length = 22.0;
  int n_points = 32;
  double dt = 1.0 / 16.0;  // ETDRK4 step
};

Eigen::VectorXd ks_default_initial(const KsConfig& cfg);

class KsIntegrator {
 public:
  explicit KsIntegrator(const KsConfig& cfg);
  ~KsIntegrator();
  KsIntegrator(const KsIntegrator&) = delete;
  KsIntegrator& operator=(const KsIntegrator&) = delete;

  const KsConfig& config() const { return cfg_; }
  void set_state(const Eigen::VectorXd& y);
  Eigen::VectorXd state() const;
  void step();  // one dt

 private:
  struct Impl;
  KsConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

/// n_steps ETDRK4 steps from y0, recording every subsample-th state including
/// the initial one (n_steps must be a multiple of subsample). Guards against
/// blow-up (max |y| above 1e3) with NumericalBlowupError.
Trajectory integrate_ks(const KsConfig& cfg, const Eigen::VectorXd& y0,
                        long n_steps, long subsample = 1);

// ---------------------------------------------------------------------------
// Lorenz 96, dx_i/dt = (x_{i+1} - x_{i-2}) x_{i-1} - x_i + F, cyclic.
// ---------------------------------------------------------------------------

struct Lorenz96Config {
  int n = 32;
  double forcing = 8.0;
  double dt = 0.001;  // RK4 step
};

Eigen::VectorXd lorenz96_default_initial(const Lorenz96Config& cfg);

Eigen::VectorXd lorenz96_rhs(const Lorenz96Config& cfg,
                             const Eigen::VectorXd& x);

Eigen::VectorXd lorenz96_rk4_step(const Lorenz96Config& cfg,
                                  const Eigen::VectorXd& x, double dt);

/// Same recording convention and blow-up guard as integrate_ks.
Trajectory integrate_lorenz96(const Lorenz96Config& cfg,
                              const Eigen::VectorXd& x0, long n_steps,
                              long subsample = 1);

}  // namespace css
