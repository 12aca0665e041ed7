#pragma once

#include <Eigen/Dense>
#include <vector>

#include "css/trajectory.hpp"

namespace css {

/// Shallow-water tank on the unit square with reflective walls:
///   h_t + (uh)_x + (vh)_y = p
///   (uh)_t + (u^2 h + g h^2 / 2)_x + (uvh)_y + b uh = 0
///   (vh)_t + (uvh)_x + (v^2 h + g h^2 / 2)_y + b vh = 0
/// where p injects the mixed signal through fixed zero-integral spatial
/// filters. dt is the forcing/sampling step; one explicit Lax-Wendroff step
/// at dt would violate the CFL bound on any useful grid, so the solver takes
/// substeps_per_sample internal steps per dt (0 = pick automatically so the
/// rest-state Courant number is at most cfl_rest_target).
struct TankConfig {
  int nx = 128;
  int ny = 128;
  double gravity = 9.8;
  double drag = 0.3;
  double dt = 0.03;
  int n_probes = 2000;
  int substeps_per_sample = 0;  // 0 = automatic from cfl_rest_target
  double cfl_rest_target = 0.5;
  // 2-D two-step Lax-Wendroff is stable up to a Courant number of 1/sqrt(2);
  // the runtime monitor aborts (never clamps) above this
  double cfl_abort = 0.70710678118654752;
  double filter_width_fraction = 1.0 / 16.0;  // Gaussian sigma / domain size
  // Fourth-difference artificial dissipation applied to the conserved fields
  // once per substep. The stepper restores the mixed-derivative term that
  // the face-based two-step form drops (see substep()), which makes the
  // linearized symbol neutral for Courant numbers up to about 0.6; this
  // term guards the band from there to cfl_abort and damps what the
  // nonlinear terms shed, at a cost that is third order in the cell size on
  // resolved waves. The operator telescopes, so volume stays exact. 0
  // disables it. Must be < 1/16.
  double dissipation_eps4 = 1.0 / 64.0;

  double dx() const { return 1.0 / static_cast<double>(nx); }
  double dy() const { return 1.0 / static_cast<double>(ny); }
  int resolved_substeps() const;
  double rest_courant_per_substep() const;
  void validate() const;
};

/// Water state on cell centers; index (i, j) = i * ny + j with i along x.
struct WaveField {
  int nx = 0;
  int ny = 0;
  double t = 0.0;
  std::vector<double> h, u, v;

  static WaveField quiescent(int nx, int ny);
  void validate() const;  // sizes, finiteness, h > 0
};

/// d fixed spatial input filters, each nx*ny, zero-integral, max |.| = 1.
struct InputFilterSet {
  int d = 0;
  int nx = 0;
  int ny = 0;
  std::vector<double> data;  // filter k at data[k * nx * ny + cell]

  const double* filter(int k) const { return data.data() + static_cast<std::ptrdiff_t>(k) * nx * ny; }
  double cell_sum(int k) const;
};

/// Seeded white noise, Gaussian-smoothed, peak-normalized, mean-subtracted
/// (the discrete sum is forced to zero exactly so forcing conserves volume).
InputFilterSet make_filters(int d, const TankConfig& cfg, std::uint64_t seed);

/// n_probes distinct cells drawn uniformly without replacement.
struct ProbeSet {
  std::vector<int> cells;
  std::uint64_t id = 0;  // content hash: seed, grid, cell list
};

ProbeSet make_probes(const TankConfig& cfg, std::uint64_t seed);

/// Owns the stepping buffers; one instance drives one simulation.
class Tank {
 public:
  Tank(const TankConfig& cfg, const InputFilterSet& filters);

  void reset();                        // quiescent, t = 0
  void reset(const WaveField& state);
  /// Advance one dt under constant forcing amplitudes (one per filter).
  void step(const Eigen::VectorXd& amplitudes);

  const TankConfig& config() const { return cfg_; }
  long steps_taken() const { return step_index_; }
  double time() const { return static_cast<double>(step_index_) * cfg_.dt; }
  WaveField field() const;
  double probe_height(int cell) const;  // h - 1
  double volume() const;                // sum h dA
  double energy() const;                // sum (h (u^2+v^2)/2 + g (h-1)^2 / 2) dA

 private:
  void refresh_ghosts();
  void substep(double dts);
  void dissipate();
  void check_courant() const;

  TankConfig cfg_;
  const InputFilterSet* filters_;
  int ld_ = 0;  // padded row stride
  long step_index_ = 0;
  std::vector<double> h_, hu_, hv_, p_;            // padded, ghost frame 2
  std::vector<double> fa_, fb_, fc_, d4_;          // per-cell flux / dissipation terms
  std::vector<double> xu_, xv_, xfu_, xfv_;        // x-face states/fluxes
  std::vector<double> yu_, yv_, yfu_, yfv_;        // y-face states/fluxes
};

/// Functional single step for tests and bindings: copies state in and out.
WaveField step(const WaveField& state, const Eigen::VectorXd& amplitudes,
               const InputFilterSet& filters, const TankConfig& cfg);

/// Drive the tank with one amplitude vector per sample of `mixed` and record
/// h - 1 at the probes after each step, discarding the first
/// t_dump / dt samples. Returns n_probes x (n_samples - dumped). When
/// final_state is non-null it receives the wave field after the last step.
Eigen::MatrixXd drive_and_record(const WaveField& initial,
                                 const Trajectory& mixed,
                                 const InputFilterSet& filters,
                                 const ProbeSet& probes, const TankConfig& cfg,
                                 double t_dump,
                                 WaveField* final_state = nullptr);

/// Grid snapshot, magic "SWE1": u32 nx, u32 ny, then h, u, v row-major f64,
/// all little-endian.
void write_snapshot(const WaveField& f, const std::string& path);
WaveField read_snapshot(const std::string& path);

}  // namespace css
