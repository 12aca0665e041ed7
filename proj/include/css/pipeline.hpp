#pragma once

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "css/attractors.hpp"
#include "css/highdim.hpp"
#include "css/readout.hpp"
#include "css/tank.hpp"
#include "css/trajectory.hpp"

namespace css {

/// One two-source separation experiment: generate both sources, mix them,
/// drive the tank, train the readout on a window of the drive, then score on
/// a continuation the readout never saw. Every derived random stream (input
/// filters, probe placement, initial states, measurement noise) is split off
/// master_seed by label, so the whole experiment is a pure function of this
/// struct.
struct ExperimentConfig {
  Attractor source_a = Attractor::lorenz;
  Attractor source_b = Attractor::rossler;
  double t_dump = 600.0;   // wash-out discarded before every recorded phase
  double t_train = 600.0;  // training window
  double t_test = 600.0;   // scoring window
  TankConfig tank;
  double alpha = 1e-3;        // ridge strength, added raw to the Gram diagonal
  double noise_sigma = 0.0;   // measurement noise on each source channel
  std::uint64_t master_seed = 1;

  void validate() const;  // durations must be multiples of tank.dt
};

/// Everything needed to reproduce or audit one run.
struct RunProvenance {
  std::string source_a, source_b;
  double t_dump = 0.0, t_train = 0.0, t_test = 0.0;
  double alpha = 0.0, noise_sigma = 0.0;
  TankConfig tank;
  std::uint64_t master_seed = 0;
  std::uint64_t filter_seed = 0, probe_seed = 0;
  std::uint64_t noise_seed_a = 0, noise_seed_b = 0;
  std::uint64_t probe_set_id = 0;  // content hash of the probe cells
};

/// Estimates and clean normalized truths over the same test window, plus the
/// mean squared errors (always against the clean truth, even when training
/// used noisy measurements). mse_a/mse_b are recomputable from the stored
/// trajectories.
struct SeparationResult {
  Trajectory estimated_a, estimated_b;
  Trajectory true_a, true_b;
  double mse_a = 0.0, mse_b = 0.0;
  RunProvenance provenance;
};

/// Elementwise sum of two aligned trajectories (same dims, dt, length).
Trajectory mix(const Trajectory& a, const Trajectory& b);

/// Adds sigma * N(0,1) independently to every channel and sample,
/// deterministic per seed. sigma = 0 returns the input unchanged.
Trajectory add_noise(const Trajectory& t, double sigma, std::uint64_t seed);

/// Optional sink for the tank's wave fields as they stand when the training
/// and test drives end — the driven state of the water, for visualization.
struct TankSnapshots {
  WaveField after_train;
  WaveField after_test;
};

SeparationResult run_separation(const ExperimentConfig& cfg,
                                TankSnapshots* snapshots = nullptr);

/// 6 x 6 separation quality over all 21 unordered source pairs. Entry (i, j)
/// is the MSE of recovering the system-i signal from the i+j mixture. Failed
/// pairs leave their entries NaN/invalid and are reported in `failures`.
struct MseMatrix {
  std::array<std::string, 6> labels;
  Eigen::Matrix<double, 6, 6> values =
      Eigen::Matrix<double, 6, 6>::Constant(
          std::numeric_limits<double>::quiet_NaN());
  std::array<std::array<bool, 6>, 6> valid{};
  std::vector<std::string> failures;
};

/// Runs every unordered pair (i <= j) with a pair-labeled seed split off
/// base.master_seed; source_a/source_b in `base` are ignored. The pairs are
/// independent jobs; n_workers > 1 runs them on that many threads (each
/// holds one tank grid) with byte-identical results.
MseMatrix run_matrix(const ExperimentConfig& base, int n_workers = 1);

struct NoiseSweepEntry {
  double sigma = 0.0;
  MseMatrix matrix;
};

/// run_matrix once per sigma. Noise streams are seeded independently of
/// sigma, so sweeps differ only by the noise amplitude, and sigma = 0
/// reproduces run_matrix(base) bit for bit.
std::vector<NoiseSweepEntry> noise_sweep(
    const ExperimentConfig& base,
    const std::vector<double>& sigmas = {0.0, 0.01, 0.1, 1.0},
    int n_workers = 1);

/// High-dimensional variant: a Kuramoto-Sivashinsky field plus a Lorenz 96
/// ring, both resampled onto the tank clock by integer substepping (tank.dt
/// must be an integer multiple of each source step).
struct HighdimConfig {
  KsConfig ks;          // dt defaults to 0.015 = half the tank sample step
  Lorenz96Config l96;   // dt 0.001 = one thirtieth of the tank sample step
  double t_dump = 600.0, t_train = 600.0, t_test = 600.0;
  TankConfig tank;      // defaults to 256 x 256 with drag 0.6
  double alpha = 1e-3;
  // Forcing amplitude applied to the mixture before it drives the tank.
  // 0 selects sqrt(3 / channels), which matches the injected power of the
  // three-channel experiments; driving 32 unit-peak filters at full
  // amplitude would swamp the tank. Targets and truths are never scaled.
  double drive_gain = 0.0;
  std::uint64_t master_seed = 1;

  HighdimConfig();
  void validate() const;
};

SeparationResult run_highdim(const HighdimConfig& cfg,
                             TankSnapshots* snapshots = nullptr);

/// Mean over channels of the per-channel Pearson correlation between the two
/// trajectories; degenerate (constant) channels contribute zero.
double mean_channel_correlation(const Trajectory& a, const Trajectory& b);

/// Mean of the valid off-diagonal entries of each row (NaN when a row has
/// none) -- the per-system recovery quality summary.
Eigen::Matrix<double, 6, 1> offdiagonal_row_means(const MseMatrix& m);

/// CSV with a label header row and a label column; invalid entries print as
/// nan.
void write_mse_csv(const MseMatrix& m, const std::string& path);

/// Writes <dir>/estimates.csv (time, estimated, and true values, channel by
/// channel) and <dir>/manifest.txt (provenance, MSEs, and a content hash of
/// the CSV).
void export_separation(const SeparationResult& r, const std::string& dir);

}  // namespace css
