#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "css/tank.hpp"

using namespace css;
using doctest::Approx;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TankConfig small_cfg(int n) {
  TankConfig cfg;
  cfg.nx = cfg.ny = n;
  cfg.n_probes = std::min(100, n * n);
  return cfg;
}

// centered Gaussian height bump, fluid at rest
WaveField bump_field(int n, double amplitude, double sigma, double x0 = 0.5,
                     double y0 = 0.5) {
  WaveField f = WaveField::quiescent(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = (i + 0.5) / n, y = (j + 0.5) / n;
      const double r2 = (x - x0) * (x - x0) + (y - y0) * (y - y0);
      f.h[i * n + j] = 1.0 + amplitude * std::exp(-r2 / (2 * sigma * sigma));
    }
  return f;
}

Trajectory zero_signal(int d, int n_samples, double dt) {
  Trajectory t;
  t.dt = dt;
  t.values = Eigen::MatrixXd::Zero(d, n_samples);
  return t;
}

}  // namespace

TEST_CASE("automatic substep count follows the rest-state Courant bound") {
  TankConfig cfg;  // 128 x 128, dt = 0.03, g = 9.8
  // sqrt(9.8) * 0.03 * 128 = 12.02 per sampling step; target 0.5 -> 25
  CHECK(cfg.resolved_substeps() == 25);
  CHECK(cfg.rest_courant_per_substep() == Approx(12.0214 / 25).epsilon(1e-3));
  CHECK(cfg.rest_courant_per_substep() <= cfg.cfl_rest_target);

  TankConfig c64 = small_cfg(64);
  CHECK(c64.resolved_substeps() == 13);

  // an explicit, too-coarse substep count is rejected up front
  TankConfig bad;
  bad.substeps_per_sample = 5;
  CHECK_THROWS_AS(bad.validate(), InvalidInputError);
  TankConfig fine;
  fine.substeps_per_sample = 30;
  fine.validate();
}

TEST_CASE("flat lake with zero forcing is an exact fixed point") {
  TankConfig cfg = small_cfg(16);
  const InputFilterSet filters = make_filters(2, cfg, 7);
  Tank tank(cfg, filters);
  for (int s = 0; s < 10; ++s) tank.step(Eigen::Vector2d::Zero());
  const WaveField f = tank.field();
  for (double h : f.h) CHECK(h == 1.0);
  for (double u : f.u) CHECK(u == 0.0);
  for (double v : f.v) CHECK(v == 0.0);
  CHECK(tank.steps_taken() == 10);
  CHECK(tank.time() == Approx(0.3));
}

TEST_CASE("filters are smooth, centered, peaked near one, and reproducible") {
  TankConfig cfg = small_cfg(64);
  const InputFilterSet fs = make_filters(3, cfg, 42);
  REQUIRE(fs.d == 3);

  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(fs.cell_sum(k)) < 1e-12);  // exact zero integral
    double peak = 0.0;
    const double* f = fs.filter(k);
    for (int c = 0; c < 64 * 64; ++c) peak = std::max(peak, std::abs(f[c]));
    CHECK(peak > 0.8);
    CHECK(peak < 1.2);
    // smoothness: neighbor differences stay a fraction of the unit peak,
    // consistent with the four-cell smoothing scale
    double max_jump = 0.0;
    for (int i = 0; i < 64; ++i)
      for (int j = 0; j + 1 < 64; ++j)
        max_jump = std::max(max_jump, std::abs(f[i * 64 + j + 1] - f[i * 64 + j]));
    CHECK(max_jump < 0.35);
  }

  const InputFilterSet fs2 = make_filters(3, cfg, 42);
  CHECK(fs.data == fs2.data);

  // distinct filters decorrelate
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      Eigen::Map<const Eigen::VectorXd> fa(fs.filter(a), 64 * 64);
      Eigen::Map<const Eigen::VectorXd> fb(fs.filter(b), 64 * 64);
      const double corr =
          (fa.array() - fa.mean()).matrix().normalized().dot(
              (fb.array() - fb.mean()).matrix().normalized());
      CHECK(std::abs(corr) < 0.35);
    }
}

TEST_CASE("probe sets are distinct cells with a content-derived id") {
  TankConfig cfg = small_cfg(32);
  cfg.n_probes = 200;
  const ProbeSet ps = make_probes(cfg, 5);
  CHECK(ps.cells.size() == 200);
  std::vector<int> sorted = ps.cells;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
  CHECK(sorted.front() >= 0);
  CHECK(sorted.back() < 32 * 32);

  CHECK(make_probes(cfg, 5).id == ps.id);
  CHECK(make_probes(cfg, 6).id != ps.id);
  CHECK(make_probes(cfg, 6).cells != ps.cells);
}

TEST_CASE("forced tank conserves volume to rounding") {
  TankConfig cfg = small_cfg(32);
  const InputFilterSet filters = make_filters(3, cfg, 11);
  Tank tank(cfg, filters);
  const double v0 = tank.volume();
  CHECK(v0 == Approx(1.0));

  Eigen::Vector3d amps;
  for (int s = 0; s < 400; ++s) {
    const double t = s * cfg.dt;
    amps << 2.0 * std::sin(3.0 * t), 1.5 * std::cos(5.0 * t),
        -1.0 * std::sin(7.0 * t + 0.5);
    tank.step(amps);
  }
  CHECK(std::abs(tank.volume() - v0) / v0 < 1e-12);
  // and the tank actually moved
  const WaveField f = tank.field();
  double dev = 0.0;
  for (double h : f.h) dev = std::max(dev, std::abs(h - 1.0));
  CHECK(dev > 1e-4);
}

TEST_CASE("x-y mirror symmetry is preserved by the stepper") {
  TankConfig cfg = small_cfg(32);
  const InputFilterSet filters = make_filters(2, cfg, 3);

  // transpose the filters and the initial state
  InputFilterSet filters_t = filters;
  for (int k = 0; k < filters.d; ++k) {
    const double* src = filters.filter(k);
    double* dst = filters_t.data.data() + k * 32 * 32;
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j) dst[j * 32 + i] = src[i * 32 + j];
  }
  const WaveField f0 = bump_field(32, 0.02, 0.12, 0.35, 0.6);
  WaveField f0t = f0;
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      f0t.h[j * 32 + i] = f0.h[i * 32 + j];
      f0t.u[j * 32 + i] = f0.v[i * 32 + j];
      f0t.v[j * 32 + i] = f0.u[i * 32 + j];
    }

  Tank a(cfg, filters), b(cfg, filters_t);
  a.reset(f0);
  b.reset(f0t);
  Eigen::Vector2d amps(0.8, -1.3);
  for (int s = 0; s < 20; ++s) {
    a.step(amps);
    b.step(amps);
  }
  const WaveField fa = a.field(), fb = b.field();
  double err = 0.0;
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      err = std::max(err, std::abs(fa.h[i * 32 + j] - fb.h[j * 32 + i]));
      err = std::max(err, std::abs(fa.u[i * 32 + j] - fb.v[j * 32 + i]));
      err = std::max(err, std::abs(fa.v[i * 32 + j] - fb.u[j * 32 + i]));
    }
  CHECK(err < 1e-13);
}

TEST_CASE("undriven waves lose energy, and amplitude dies down") {
  TankConfig cfg = small_cfg(64);
  const InputFilterSet filters = make_filters(1, cfg, 9);
  Tank tank(cfg, filters);
  tank.reset(bump_field(64, 0.05, 0.1));

  // energy must fall every window; the pointwise peak may wobble while
  // dispersing waves focus and defocus, but has to end far below the start
  const Eigen::VectorXd quiet = Eigen::VectorXd::Zero(1);
  double prev_energy = tank.energy();
  double first_peak = 0.0, last_peak = 0.0;
  for (int window = 0; window < 10; ++window) {
    double peak = 0.0;
    for (int s = 0; s < 33; ++s) {  // about one time unit
      tank.step(quiet);
      const WaveField f = tank.field();
      for (double h : f.h) peak = std::max(peak, std::abs(h - 1.0));
    }
    const double energy = tank.energy();
    CHECK(energy < prev_energy * (1.0 + 1e-12));
    prev_energy = energy;
    if (window == 0) first_peak = peak;
    last_peak = peak;
  }
  CHECK(first_peak > 0.01);
  CHECK(last_peak < 0.3 * first_peak);
  CHECK(prev_energy < 0.1 * 0.5 * 9.8 * 0.05 * 0.05);  // well below the start
}

TEST_CASE("two-step scheme converges at second order on a smooth wave") {
  const double amp = 0.01, sigma = 0.1, T = 0.06;
  auto coarse_h = [&](int n) {
    TankConfig cfg = small_cfg(n);
    const InputFilterSet filters = make_filters(1, cfg, 1);
    Tank tank(cfg, filters);
    tank.reset(bump_field(n, amp, sigma));
    const Eigen::VectorXd quiet = Eigen::VectorXd::Zero(1);
    for (int s = 0; s < std::lround(T / cfg.dt); ++s) tank.step(quiet);
    const WaveField f = tank.field();
    // block-average onto the 32 x 32 reference partition
    const int block = n / 32;
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(32, 32);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        avg(i / block, j / block) += f.h[i * n + j] / (block * block);
    return avg;
  };

  const Eigen::MatrixXd ref = coarse_h(256);
  const double e32 = (coarse_h(32) - ref).cwiseAbs().maxCoeff();
  const double e64 = (coarse_h(64) - ref).cwiseAbs().maxCoeff();
  const double e128 = (coarse_h(128) - ref).cwiseAbs().maxCoeff();
  const double order_a = std::log2(e32 / e64);
  const double order_b = std::log2(e64 / e128);
  CAPTURE(e32);
  CAPTURE(e64);
  CAPTURE(e128);
  CHECK(order_a > 1.5);
  CHECK(order_a < 2.7);
  CHECK(order_b > 1.5);
  CHECK(order_b < 2.7);
}

TEST_CASE("identical forcing washes out different initial states") {
  TankConfig cfg = small_cfg(64);
  cfg.n_probes = 50;
  const InputFilterSet filters = make_filters(2, cfg, 21);
  const ProbeSet probes = make_probes(cfg, 22);

  Rng rng(99);
  Trajectory drive;
  drive.dt = cfg.dt;
  drive.values.resize(2, 1000);  // 30 time units
  for (int s = 0; s < 1000; ++s) {
    drive.values(0, s) = 1.2 * std::sin(0.7 * s * cfg.dt) + 0.3 * rng.normal();
    drive.values(1, s) = -0.9 * std::cos(1.3 * s * cfg.dt) + 0.3 * rng.normal();
  }

  // the perturbed start must hold the same total volume: volume is conserved
  // exactly, so a mean-height offset would persist forever by construction
  WaveField perturbed = bump_field(64, 0.05, 0.15);
  double mean = 0.0;
  for (double h : perturbed.h) mean += h - 1.0;
  mean /= static_cast<double>(perturbed.h.size());
  for (double& h : perturbed.h) h -= mean;

  const Eigen::MatrixXd ra = drive_and_record(
      WaveField::quiescent(64, 64), drive, filters, probes, cfg, 0.0);
  const Eigen::MatrixXd rb =
      drive_and_record(perturbed, drive, filters, probes, cfg, 0.0);
  const Eigen::VectorXd gap =
      (ra - rb).cwiseAbs().colwise().maxCoeff().transpose();
  CHECK(gap(0) > 1e-3);                       // initially far apart
  CHECK(gap(999) < gap(0) / 50.0);            // contracted by the drive
  CHECK(gap.tail(10).maxCoeff() < gap.head(10).minCoeff());
}

TEST_CASE("drive_and_record validates inputs and honors the dump window") {
  TankConfig cfg = small_cfg(16);
  cfg.n_probes = 10;
  const InputFilterSet filters = make_filters(2, cfg, 4);
  const ProbeSet probes = make_probes(cfg, 5);

  const Trajectory quiet = zero_signal(2, 40, cfg.dt);
  const Eigen::MatrixXd rec = drive_and_record(
      WaveField::quiescent(16, 16), quiet, filters, probes, cfg, 0.3);
  CHECK(rec.rows() == 10);
  CHECK(rec.cols() == 30);
  CHECK(rec.cwiseAbs().maxCoeff() == 0.0);  // quiescent + zero drive

  Trajectory wrong_dt = quiet;
  wrong_dt.dt = 0.05;
  CHECK_THROWS_AS(drive_and_record(WaveField::quiescent(16, 16), wrong_dt,
                                   filters, probes, cfg, 0.0),
                  InvalidInputError);
  CHECK_THROWS_AS(drive_and_record(WaveField::quiescent(16, 16),
                                   zero_signal(3, 40, cfg.dt), filters, probes,
                                   cfg, 0.0),
                  InvalidInputError);
  CHECK_THROWS_AS(drive_and_record(WaveField::quiescent(16, 16), quiet,
                                   filters, probes, cfg, 40 * cfg.dt),
                  InvalidInputError);
}

TEST_CASE("absurd forcing trips the stability or depth guards, never NaNs") {
  TankConfig cfg = small_cfg(16);
  const InputFilterSet filters = make_filters(1, cfg, 2);
  Tank tank(cfg, filters);
  Eigen::VectorXd amps(1);
  amps << 1e6;
  bool caught = false;
  try {
    for (int s = 0; s < 50; ++s) tank.step(amps);
  } catch (const StabilityError& e) {
    caught = true;
    CHECK(e.step >= 0);
    CHECK(e.courant > cfg.cfl_abort);
  } catch (const DryCellError& e) {
    caught = true;
    CHECK(e.step >= 0);
  } catch (const NumericalBlowupError& e) {
    caught = true;
    CHECK(e.step >= 0);
  }
  CHECK(caught);
}

TEST_CASE("functional step matches the stateful tank") {
  TankConfig cfg = small_cfg(16);
  const InputFilterSet filters = make_filters(2, cfg, 8);
  const WaveField f0 = bump_field(16, 0.01, 0.15);
  Eigen::Vector2d amps(0.4, -0.2);

  Tank tank(cfg, filters);
  tank.reset(f0);
  tank.step(amps);
  const WaveField a = tank.field();
  const WaveField b = step(f0, amps, filters, cfg);
  CHECK(a.h == b.h);
  CHECK(a.u == b.u);
  CHECK(a.v == b.v);
  CHECK(b.t == Approx(f0.t + cfg.dt));
}

TEST_CASE("snapshot files round-trip exactly and reject corruption") {
  const WaveField f = bump_field(24, 0.03, 0.2);
  const std::string path = temp_path("css_tank_snapshot.bin");
  write_snapshot(f, path);
  const WaveField back = read_snapshot(path);
  CHECK(back.nx == 24);
  CHECK(back.ny == 24);
  CHECK(back.h == f.h);
  CHECK(back.u == f.u);
  CHECK(back.v == f.v);

  write_file_atomic(path, "SWE2junk");
  CHECK_THROWS_AS(read_snapshot(path), InvalidInputError);
  std::remove(path.c_str());
}

TEST_CASE("field validation catches bad inputs") {
  WaveField f = WaveField::quiescent(16, 16);
  f.h[5] = -0.2;
  CHECK_THROWS_AS(f.validate(), InvalidInputError);
  f = WaveField::quiescent(16, 16);
  f.u[3] = std::nan("");
  CHECK_THROWS_AS(f.validate(), InvalidInputError);
  f = WaveField::quiescent(16, 16);
  f.v.pop_back();
  CHECK_THROWS_AS(f.validate(), InvalidInputError);
}
