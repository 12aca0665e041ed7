// chaossep: config-driven front end for the chaotic source separation
// library. Runs single separations, the full 6 x 6 pairwise matrix, noise
// sweeps, the high-dimensional experiment, Lyapunov analysis of the source
// systems, and observability diagnostics; writes CSV tables, binary
// snapshots, and plot-ready data files.
//
// Every command takes `--config <path>` (INI-style; missing keys fall back
// to built-in defaults that reproduce the reference experiment) and writes
// into `--out <dir>`: its data files plus `run_manifest.txt` (resolved
// settings, seeds, and a content hash per output file -- byte-identical
// across reruns) and `runtime.txt` (wall-clock timings, the only
// non-reproducible output).
//
// Exit codes: 0 success, 1 numerical failure, 2 usage or config error.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "css/attractors.hpp"
#include "css/config.hpp"
#include "css/highdim.hpp"
#include "css/lyapunov.hpp"
#include "css/observability.hpp"
#include "css/pipeline.hpp"
#include "css/tank.hpp"

#ifndef CHAOSSEP_VERSION
#define CHAOSSEP_VERSION "0.0.0"
#endif

namespace {

using namespace css;

// ---------------------------------------------------------------------------
// Shared flags and the run manifest.
// ---------------------------------------------------------------------------

struct CommonFlags {
  std::string config_path;  // empty = built-in defaults
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int grid = 0;  // 0 = no override
  int workers = 1;
  bool emit_snapshots = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags* f, bool with_workers,
                      bool with_snapshots) {
  cmd->add_option("--config", f->config_path,
                  "configuration file (INI-style sections)");
  cmd->add_option("--out", f->out_dir, "output directory (default .)");
  cmd->add_option("--seed", f->seed, "override the master seed")
      ->each([f](const std::string&) { f->seed_set = true; });
  cmd->add_option("--grid", f->grid, "override the tank grid to N x N cells")
      ->check(CLI::PositiveNumber);
  if (with_workers)
    cmd->add_option("--workers", f->workers,
                    "parallel pair jobs (each holds one tank grid)")
        ->check(CLI::PositiveNumber);
  if (with_snapshots)
    cmd->add_flag("--emit-snapshots", f->emit_snapshots,
                  "also write tank wave-field snapshots");
}

/// Loads the config file when given, otherwise an empty default config.
Config load_config(const CommonFlags& f) {
  if (f.config_path.empty()) return Config::parse("", "<defaults>");
  return Config::load(f.config_path);
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

/// Deterministic run record: resolved settings and a content hash per
/// output file. Wall-clock timings go to runtime.txt instead so that the
/// manifest is byte-identical across reruns.
class Manifest {
 public:
  explicit Manifest(std::string command) {
    line("tool = chaossep " CHAOSSEP_VERSION);
    line("command = " + std::move(command));
  }

  void section(const std::string& name) { line("\n[" + name + "]"); }
  void kv(const std::string& key, const std::string& value) {
    line(key + " = " + value);
  }
  void kv(const std::string& key, const char* value) {
    kv(key, std::string(value));
  }
  void kv(const std::string& key, double value) {
    kv(key, format_double(value));
  }
  void kv(const std::string& key, int value) { kv(key, std::to_string(value)); }
  void kv(const std::string& key, long long value) {
    kv(key, std::to_string(value));
  }
  void kv(const std::string& key, std::uint64_t value) {
    kv(key, std::to_string(value));
  }

  /// Records name, size, and FNV-1a hash of a file already written to dir.
  void output_file(const std::string& dir, const std::string& name) {
    const std::string blob = read_file(join_path(dir, name));
    char buf[128];
    std::snprintf(buf, sizeof buf, "output = %s bytes=%zu fnv1a64=%016llx",
                  name.c_str(), blob.size(),
                  static_cast<unsigned long long>(
                      fnv1a64_bytes(blob.data(), blob.size())));
    outputs_.emplace_back(buf);
  }

  void write(const std::string& dir) {
    std::string text = body_;
    if (!outputs_.empty()) {
      text += "\n[outputs]\n";
      for (const std::string& o : outputs_) text += o + "\n";
    }
    write_file_atomic(join_path(dir, "run_manifest.txt"), text);
  }

 private:
  void line(const std::string& s) { body_ += s + "\n"; }
  std::string body_;
  std::vector<std::string> outputs_;
};

/// Wall-clock record, separate from the manifest so reruns stay
/// byte-identical everywhere else.
class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}

  void lap(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    laps_ += name + " = " +
             format_double(std::chrono::duration<double>(now - last_).count()) +
             " s\n";
    last_ = now;
  }

  void write(const std::string& dir) const {
    const auto now = std::chrono::steady_clock::now();
    std::string text = laps_;
    text += "total = " +
            format_double(std::chrono::duration<double>(now - start_).count()) +
            " s\n";
    const std::time_t t = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    text += std::string("finished_utc = ") + stamp + "\n";
    write_file_atomic(join_path(dir, "runtime.txt"), text);
  }

 private:
  std::chrono::steady_clock::time_point start_, last_ = start_;
  std::string laps_;
};

// ---------------------------------------------------------------------------
// Config readers: INI sections -> typed configs, with flag overrides.
// Key names carry explicit units (`*_time_units`).
// ---------------------------------------------------------------------------

TankConfig read_tank(const Config& c, const CommonFlags& f,
                     const TankConfig& defaults) {
  TankConfig t = defaults;
  t.nx = static_cast<int>(c.get_int("tank", "nx", t.nx));
  t.ny = static_cast<int>(c.get_int("tank", "ny", t.ny));
  t.gravity = c.get_double("tank", "gravity", t.gravity);
  t.drag = c.get_double("tank", "drag", t.drag);
  t.dt = c.get_double("tank", "dt_time_units", t.dt);
  t.n_probes = static_cast<int>(c.get_int("tank", "n_probes", t.n_probes));
  t.substeps_per_sample = static_cast<int>(
      c.get_int("tank", "substeps_per_sample", t.substeps_per_sample));
  t.cfl_rest_target =
      c.get_double("tank", "cfl_rest_target", t.cfl_rest_target);
  t.filter_width_fraction =
      c.get_double("tank", "filter_width_fraction", t.filter_width_fraction);
  t.dissipation_eps4 =
      c.get_double("tank", "dissipation_eps4", t.dissipation_eps4);
  if (f.grid > 0) t.nx = t.ny = f.grid;
  return t;
}

void manifest_tank(Manifest& m, const TankConfig& t) {
  m.section("tank");
  m.kv("nx", t.nx);
  m.kv("ny", t.ny);
  m.kv("gravity", t.gravity);
  m.kv("drag", t.drag);
  m.kv("dt_time_units", t.dt);
  m.kv("n_probes", t.n_probes);
  m.kv("substeps_per_sample", t.substeps_per_sample);
  m.kv("cfl_rest_target", t.cfl_rest_target);
  m.kv("filter_width_fraction", t.filter_width_fraction);
  m.kv("dissipation_eps4", t.dissipation_eps4);
}

ExperimentConfig read_experiment(const Config& c, const CommonFlags& f,
                                 bool with_sources) {
  ExperimentConfig e;
  if (with_sources) {
    e.source_a =
        attractor_from_string(c.get_string("experiment", "source_a",
                                           std::string(to_string(e.source_a))));
    e.source_b =
        attractor_from_string(c.get_string("experiment", "source_b",
                                           std::string(to_string(e.source_b))));
  }
  e.t_dump = c.get_double("experiment", "t_dump_time_units", e.t_dump);
  e.t_train = c.get_double("experiment", "t_train_time_units", e.t_train);
  e.t_test = c.get_double("experiment", "t_test_time_units", e.t_test);
  e.alpha = c.get_double("experiment", "alpha", e.alpha);
  e.noise_sigma = c.get_double("experiment", "noise_sigma", e.noise_sigma);
  e.master_seed = c.get_u64("experiment", "master_seed", e.master_seed);
  e.tank = read_tank(c, f, e.tank);
  if (f.seed_set) e.master_seed = f.seed;
  return e;
}

void manifest_experiment(Manifest& m, const ExperimentConfig& e,
                         bool with_sources) {
  m.section("experiment");
  if (with_sources) {
    m.kv("source_a", std::string(to_string(e.source_a)));
    m.kv("source_b", std::string(to_string(e.source_b)));
  }
  m.kv("t_dump_time_units", e.t_dump);
  m.kv("t_train_time_units", e.t_train);
  m.kv("t_test_time_units", e.t_test);
  m.kv("alpha", e.alpha);
  m.kv("noise_sigma", e.noise_sigma);
  m.kv("master_seed", e.master_seed);
  manifest_tank(m, e.tank);
}

HighdimConfig read_highdim(const Config& c, const CommonFlags& f) {
  HighdimConfig h;
  h.ks.domain_length =
      c.get_double("highdim", "ks_domain_length", h.ks.domain_length);
  h.ks.n_points =
      static_cast<int>(c.get_int("highdim", "ks_n_points", h.ks.n_points));
  h.ks.dt = c.get_double("highdim", "ks_dt_time_units", h.ks.dt);
  h.l96.n = static_cast<int>(c.get_int("highdim", "l96_n", h.l96.n));
  h.l96.forcing = c.get_double("highdim", "l96_forcing", h.l96.forcing);
  h.l96.dt = c.get_double("highdim", "l96_dt_time_units", h.l96.dt);
  h.drive_gain = c.get_double("highdim", "drive_gain", h.drive_gain);
  h.t_dump = c.get_double("experiment", "t_dump_time_units", h.t_dump);
  h.t_train = c.get_double("experiment", "t_train_time_units", h.t_train);
  h.t_test = c.get_double("experiment", "t_test_time_units", h.t_test);
  h.alpha = c.get_double("experiment", "alpha", h.alpha);
  h.master_seed = c.get_u64("experiment", "master_seed", h.master_seed);
  h.tank = read_tank(c, f, h.tank);
  if (f.seed_set) h.master_seed = f.seed;
  return h;
}

void manifest_highdim(Manifest& m, const HighdimConfig& h) {
  m.section("experiment");
  m.kv("t_dump_time_units", h.t_dump);
  m.kv("t_train_time_units", h.t_train);
  m.kv("t_test_time_units", h.t_test);
  m.kv("alpha", h.alpha);
  m.kv("master_seed", h.master_seed);
  m.section("highdim");
  m.kv("ks_domain_length", h.ks.domain_length);
  m.kv("ks_n_points", h.ks.n_points);
  m.kv("ks_dt_time_units", h.ks.dt);
  m.kv("l96_n", h.l96.n);
  m.kv("l96_forcing", h.l96.forcing);
  m.kv("l96_dt_time_units", h.l96.dt);
  m.kv("drive_gain", h.drive_gain);
  manifest_tank(m, h.tank);
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw ConfigError("cannot create output directory " + dir + ": " +
                      ec.message());
}

// ---------------------------------------------------------------------------
// trajectory: one source, CSV plus a plot-ready data file.
// ---------------------------------------------------------------------------

int cmd_trajectory(const CommonFlags& flags) {
  Stopwatch watch;
  const Config c = load_config(flags);
  const std::string system = c.get_string("trajectory", "system", "lorenz");
  const double duration =
      c.get_double("trajectory", "duration_time_units", 5000.0);
  const double store_dt =
      c.get_double("trajectory", "store_dt_time_units", 0.03);
  require(duration > 0.0 && store_dt > 0.0,
          "duration and store_dt must be positive");
  // Number of stored samples: floor(duration / store_dt) + 1 including the
  // initial state, covering [0, duration].
  const auto n_samples =
      static_cast<long>(duration / store_dt + 1e-9) + 1;

  Trajectory t;
  if (system == "kuramoto_sivashinsky" || system == "lorenz96") {
    HighdimConfig h = read_highdim(c, flags);
    if (system == "kuramoto_sivashinsky") {
      const long sub = std::lround(store_dt / h.ks.dt);
      require(sub >= 1 && std::abs(store_dt - static_cast<double>(sub) *
                                                  h.ks.dt) <= 1e-9 * store_dt,
              "store_dt must be an integer multiple of ks_dt_time_units");
      const long settle = std::lround(200.0 / h.ks.dt);
      Eigen::VectorXd y0 = ks_default_initial(h.ks);
      y0 = integrate_ks(h.ks, y0, settle, settle).values.col(1);
      t = integrate_ks(h.ks, y0, (n_samples - 1) * sub, sub);
    } else {
      const long sub = std::lround(store_dt / h.l96.dt);
      require(sub >= 1 && std::abs(store_dt - static_cast<double>(sub) *
                                                  h.l96.dt) <= 1e-9 * store_dt,
              "store_dt must be an integer multiple of l96_dt_time_units");
      const long settle = std::lround(100.0 / h.l96.dt);
      Eigen::VectorXd x0 = lorenz96_default_initial(h.l96);
      x0 = integrate_lorenz96(h.l96, x0, settle, settle).values.col(1);
      t = integrate_lorenz96(h.l96, x0, (n_samples - 1) * sub, sub);
    }
    t.dt = store_dt;
  } else {
    const Attractor a = attractor_from_string(system);
    const AttractorSpec spec = attractor_spec(a);
    const long sub = std::lround(store_dt / spec.integration_dt);
    require(sub >= 1 &&
                std::abs(store_dt - static_cast<double>(sub) *
                                        spec.integration_dt) <=
                    1e-9 * store_dt,
            "store_dt must be an integer multiple of the integration step");
    const Eigen::Vector3d x0 = advance(
        a, spec.default_initial_state, spec.integration_dt,
        std::lround(spec.default_transient / spec.integration_dt));
    t = integrate_rk4(a, x0, spec.integration_dt, (n_samples - 1) * sub, sub);
    t.dt = store_dt;
  }
  c.require_fully_consumed();
  watch.lap("integrate");

  ensure_out_dir(flags.out_dir);
  write_csv(t, join_path(flags.out_dir, "trajectory.csv"));

  std::string plot_name;
  if (t.dims() == 3) {
    // 3-D curve data: x,y,z rows decimated to at most 20000 points.
    plot_name = "curve3d.csv";
    const Eigen::Index stride = std::max<Eigen::Index>(
        1, (t.n_samples() + 19999) / 20000);
    std::string text = "x,y,z\n";
    for (Eigen::Index s = 0; s < t.n_samples(); s += stride)
      text += format_double(t.values(0, s)) + "," +
              format_double(t.values(1, s)) + "," +
              format_double(t.values(2, s)) + "\n";
    write_file_atomic(join_path(flags.out_dir, plot_name), text);
  } else {
    // Heat-map data: one row per channel, one column per kept sample.
    plot_name = "heatmap.csv";
    const Eigen::Index stride =
        std::max<Eigen::Index>(1, (t.n_samples() + 3999) / 4000);
    std::string text;
    for (Eigen::Index i = 0; i < t.dims(); ++i) {
      for (Eigen::Index s = 0; s < t.n_samples(); s += stride) {
        if (s > 0) text += ",";
        text += format_double(t.values(i, s));
      }
      text += "\n";
    }
    write_file_atomic(join_path(flags.out_dir, plot_name), text);
  }
  watch.lap("write");

  Manifest m("trajectory");
  m.section("trajectory");
  m.kv("system", system);
  m.kv("duration_time_units", duration);
  m.kv("store_dt_time_units", store_dt);
  m.kv("samples", static_cast<long long>(t.n_samples()));
  m.kv("channels", static_cast<long long>(t.dims()));
  m.output_file(flags.out_dir, "trajectory.csv");
  m.output_file(flags.out_dir, plot_name);
  m.write(flags.out_dir);
  watch.write(flags.out_dir);
  std::printf("wrote %s and %s in %s\n", "trajectory.csv", plot_name.c_str(),
              flags.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// separate / highdim: one full experiment with per-channel estimates.
// ---------------------------------------------------------------------------

void write_snapshots(const TankSnapshots& snaps, const std::string& dir,
                     Manifest& m) {
  write_snapshot(snaps.after_train, join_path(dir, "tank_after_train.swe"));
  write_snapshot(snaps.after_test, join_path(dir, "tank_after_test.swe"));
  m.output_file(dir, "tank_after_train.swe");
  m.output_file(dir, "tank_after_test.swe");
}

int cmd_separate(const CommonFlags& flags) {
  Stopwatch watch;
  const Config c = load_config(flags);
  const ExperimentConfig cfg = read_experiment(c, flags, true);
  c.require_fully_consumed();

  TankSnapshots snaps;
  const SeparationResult r =
      run_separation(cfg, flags.emit_snapshots ? &snaps : nullptr);
  watch.lap("experiment");

  ensure_out_dir(flags.out_dir);
  export_separation(r, flags.out_dir);
  Manifest m("separate");
  manifest_experiment(m, cfg, true);
  m.section("result");
  m.kv("mse_a", r.mse_a);
  m.kv("mse_b", r.mse_b);
  if (flags.emit_snapshots) write_snapshots(snaps, flags.out_dir, m);
  m.output_file(flags.out_dir, "estimates.csv");
  m.output_file(flags.out_dir, "manifest.txt");
  m.write(flags.out_dir);
  watch.write(flags.out_dir);
  std::printf("mse_a = %s  mse_b = %s\n", format_double(r.mse_a).c_str(),
              format_double(r.mse_b).c_str());
  return 0;
}

int cmd_highdim(const CommonFlags& flags) {
  Stopwatch watch;
  const Config c = load_config(flags);
  const HighdimConfig cfg = read_highdim(c, flags);
  c.require_fully_consumed();

  TankSnapshots snaps;
  const SeparationResult r =
      run_highdim(cfg, flags.emit_snapshots ? &snaps : nullptr);
  watch.lap("experiment");

  ensure_out_dir(flags.out_dir);
  export_separation(r, flags.out_dir);
  const double corr_a = mean_channel_correlation(r.estimated_a, r.true_a);
  const double corr_b = mean_channel_correlation(r.estimated_b, r.true_b);
  write_file_atomic(join_path(flags.out_dir, "correlations.csv"),
                    "source,mean_channel_correlation\na," +
                        format_double(corr_a) + "\nb," +
                        format_double(corr_b) + "\n");

  Manifest m("highdim");
  manifest_highdim(m, cfg);
  m.section("result");
  m.kv("mse_a", r.mse_a);
  m.kv("mse_b", r.mse_b);
  m.kv("mean_channel_correlation_a", corr_a);
  m.kv("mean_channel_correlation_b", corr_b);
  if (flags.emit_snapshots) write_snapshots(snaps, flags.out_dir, m);
  m.output_file(flags.out_dir, "estimates.csv");
  m.output_file(flags.out_dir, "manifest.txt");
  m.output_file(flags.out_dir, "correlations.csv");
  m.write(flags.out_dir);
  watch.write(flags.out_dir);
  std::printf("mse_a = %s (corr %s)  mse_b = %s (corr %s)\n",
              format_double(r.mse_a).c_str(), format_double(corr_a).c_str(),
              format_double(r.mse_b).c_str(), format_double(corr_b).c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// matrix / noise: pairwise MSE tables.
// ---------------------------------------------------------------------------

/// Writes failures.txt when a matrix has failed pairs; returns whether any.
bool report_failures(const MseMatrix& m, const std::string& dir,
                     Manifest& manifest) {
  if (m.failures.empty()) return false;
  std::string text;
  for (const std::string& f : m.failures) text += f + "\n";
  write_file_atomic(join_path(dir, "failures.txt"), text);
  manifest.output_file(dir, "failures.txt");
  return true;
}

int cmd_matrix(const CommonFlags& flags) {
  Stopwatch watch;
  const Config c = load_config(flags);
  const ExperimentConfig cfg = read_experiment(c, flags, false);
  c.require_fully_consumed();

  const MseMatrix m = run_matrix(cfg, flags.workers);
  watch.lap("matrix");

  ensure_out_dir(flags.out_dir);
  write_mse_csv(m, join_path(flags.out_dir, "mse_matrix.csv"));
  Manifest manifest("matrix");
  manifest_experiment(manifest, cfg, false);
  manifest.section("result");
  manifest.kv("workers", flags.workers);
  manifest.kv("failed_pairs", static_cast<long long>(m.failures.size()));
  const bool failed = report_failures(m, flags.out_dir, manifest);
  manifest.output_file(flags.out_dir, "mse_matrix.csv");
  manifest.write(flags.out_dir);
  watch.write(flags.out_dir);
  if (failed) {
    std::fprintf(stderr, "%zu pair(s) failed; see failures.txt\n",
                 m.failures.size());
    return 1;
  }
  std::printf("wrote mse_matrix.csv in %s\n", flags.out_dir.c_str());
  return 0;
}

/// File tag for a noise level: 0.01 -> "0.01" with '.' kept (safe in names).
std::string sigma_tag(double sigma) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", sigma);
  return buf;
}

int cmd_noise(const CommonFlags& flags) {
  Stopwatch watch;
  const Config c = load_config(flags);
  const ExperimentConfig cfg = read_experiment(c, flags, false);
  std::vector<double> sigmas = {0.0, 0.01, 0.1, 1.0};
  if (c.has("noise", "sigmas")) sigmas = c.get_double_list("noise", "sigmas");
  c.require_fully_consumed();

  const std::vector<NoiseSweepEntry> sweep =
      noise_sweep(cfg, sigmas, flags.workers);
  watch.lap("sweep");

  ensure_out_dir(flags.out_dir);
  Manifest manifest("noise");
  manifest_experiment(manifest, cfg, false);
  manifest.section("noise");
  std::string sig_text;
  for (double s : sigmas) sig_text += (sig_text.empty() ? "" : " ") +
                                      format_double(s);
  manifest.kv("sigmas", sig_text);
  manifest.kv("workers", flags.workers);

  std::string summary = "sigma,mean_offdiagonal_mse,max_offdiagonal_mse,"
                        "n_failures\n";
  bool any_failed = false;
  for (const NoiseSweepEntry& e : sweep) {
    const std::string name = "noise_mse_sigma_" + sigma_tag(e.sigma) + ".csv";
    write_mse_csv(e.matrix, join_path(flags.out_dir, name));
    manifest.output_file(flags.out_dir, name);

    double sum = 0.0, peak = 0.0;
    int n = 0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        if (i != j && e.matrix.valid[static_cast<std::size_t>(i)]
                                    [static_cast<std::size_t>(j)]) {
          sum += e.matrix.values(i, j);
          peak = std::max(peak, e.matrix.values(i, j));
          ++n;
        }
    summary += sigma_tag(e.sigma) + "," +
               (n > 0 ? format_double(sum / n) : "nan") + "," +
               (n > 0 ? format_double(peak) : "nan") + "," +
               std::to_string(e.matrix.failures.size()) + "\n";
    if (!e.matrix.failures.empty()) {
      any_failed = true;
      std::string text;
      for (const std::string& f : e.matrix.failures) text += f + "\n";
      const std::string fname =
          "noise_failures_sigma_" + sigma_tag(e.sigma) + ".txt";
      write_file_atomic(join_path(flags.out_dir, fname), text);
      manifest.output_file(flags.out_dir, fname);
    }
  }
  write_file_atomic(join_path(flags.out_dir, "noise_summary.csv"), summary);
  manifest.output_file(flags.out_dir, "noise_summary.csv");
  manifest.write(flags.out_dir);
  watch.write(flags.out_dir);
  if (any_failed) {
    std::fprintf(stderr, "some pairs failed; see noise_failures_sigma_*.txt\n");
    return 1;
  }
  std::printf("wrote %zu matrices and noise_summary.csv in %s\n", sweep.size(),
              flags.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// lyapunov: spectrum table for all six source systems.
// ---------------------------------------------------------------------------

int cmd_lyapunov(const CommonFlags& flags) {
  Stopwatch watch;
  const Config c = load_config(flags);
  LyapunovConfig lcfg;
  lcfg.total_time =
      c.get_double("lyapunov", "accumulation_time_units", lcfg.total_time);
  lcfg.qr_interval =
      c.get_double("lyapunov", "qr_interval_time_units", lcfg.qr_interval);
  lcfg.transient =
      c.get_double("lyapunov", "transient_time_units", lcfg.transient);
  lcfg.dt = c.get_double("lyapunov", "dt_time_units", lcfg.dt);
  std::vector<Attractor> systems(kAllAttractors.begin(), kAllAttractors.end());
  if (c.has("lyapunov", "systems")) {
    systems.clear();
    for (const std::string& name : c.get_string_list("lyapunov", "systems"))
      systems.push_back(attractor_from_string(name));
  }
  c.require_fully_consumed();

  std::string csv = "system,lambda1,lambda2,lambda3,kaplan_yorke_dimension\n";
  for (Attractor a : systems) {
    const LyapunovResult r = lyapunov_spectrum(a, lcfg);
    csv += std::string(to_string(a));
    for (int i = 0; i < 3; ++i) csv += "," + format_double(r.exponents(i));
    csv += "," + format_double(r.kaplan_yorke_dimension) + "\n";
    watch.lap(std::string(to_string(a)));
  }

  ensure_out_dir(flags.out_dir);
  write_file_atomic(join_path(flags.out_dir, "lyapunov.csv"), csv);
  Manifest m("lyapunov");
  m.section("lyapunov");
  m.kv("accumulation_time_units", lcfg.total_time);
  m.kv("qr_interval_time_units", lcfg.qr_interval);
  m.kv("transient_time_units", lcfg.transient);
  m.kv("dt_time_units", lcfg.dt);
  m.kv("systems", static_cast<long long>(systems.size()));
  m.output_file(flags.out_dir, "lyapunov.csv");
  m.write(flags.out_dir);
  watch.write(flags.out_dir);
  std::printf("wrote lyapunov.csv (%zu systems) in %s\n", systems.size(),
              flags.out_dir.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// observability: swap-symmetry and univalence diagnostics per source pair.
// ---------------------------------------------------------------------------

int cmd_observability(const CommonFlags& flags) {
  Stopwatch watch;
  const Config c = load_config(flags);
  const long n_states = c.get_int("observability", "n_states", 100);
  const int k_max =
      static_cast<int>(c.get_int("observability", "k_max", 3));
  StackOptions opt;
  opt.step = c.get_double("observability", "step_time_units", opt.step);
  opt.substeps =
      static_cast<int>(c.get_int("observability", "substeps", opt.substeps));
  const long uni_samples =
      c.get_int("observability", "univalence_samples", 100);
  const double threshold =
      c.get_double("observability", "collision_threshold", 1e-4);
  std::uint64_t seed = c.get_u64("observability", "master_seed", 1);
  if (flags.seed_set) seed = flags.seed;

  std::vector<std::pair<Attractor, Attractor>> pairs;
  if (c.has("observability", "pairs")) {
    for (const std::string& token :
         c.get_string_list("observability", "pairs")) {
      const std::size_t plus = token.find('+');
      if (plus == std::string::npos)
        throw ConfigError("pairs entries must look like lorenz+rossler: `" +
                              token + "`",
                          c.line_of("observability", "pairs"));
      pairs.emplace_back(attractor_from_string(token.substr(0, plus)),
                         attractor_from_string(token.substr(plus + 1)));
    }
  } else {
    for (std::size_t i = 0; i < kAllAttractors.size(); ++i)
      for (std::size_t j = i; j < kAllAttractors.size(); ++j)
        pairs.emplace_back(kAllAttractors[i], kAllAttractors[j]);
  }
  require(n_states >= 1 && uni_samples >= 0, "need at least one state");
  c.require_fully_consumed();

  std::string swap_csv = "pair,state_index,k,residual,scale,ratio\n";
  std::string uni_csv =
      "pair,sample_index,separation,stack_distance,ratio,swapped\n";
  std::string summary = "observability diagnostics (k_max = " +
                        std::to_string(k_max) + ", " +
                        std::to_string(n_states) + " states per pair)\n\n";

  for (const auto& [a, b] : pairs) {
    const std::string pair =
        std::string(to_string(a)) + "+" + std::string(to_string(b));
    // Paired on-attractor states; the second copy of an identical system is
    // decorrelated by an extended transient.
    const Eigen::Matrix3Xd sa = sample_attractor_states(
        a, n_states, derive_seed(seed, "obs/" + pair + "/a"));
    const Eigen::Matrix3Xd sb = sample_attractor_states(
        b, n_states, derive_seed(seed, "obs/" + pair + "/b"),
        a == b ? 50.0 : 0.0);

    double worst_ratio = 0.0;  // largest over states (identical systems)
    long n_broken = 0;         // states with ratio > 1e-2 (distinct systems)
    for (long s = 0; s < n_states; ++s) {
      const CombinedState x = make_combined(sa.col(s), sb.col(s));
      const SwapSymmetryReport rep = swap_symmetry_check(a, b, x, k_max, opt);
      for (const SwapOrderResidual& r : rep.per_order)
        swap_csv += pair + "," + std::to_string(s) + "," +
                    std::to_string(r.k) + "," + format_double(r.residual) +
                    "," + format_double(r.scale) + "," +
                    format_double(r.ratio) + "\n";
      worst_ratio = std::max(worst_ratio, rep.ratio);
      if (rep.ratio > 1e-2) ++n_broken;
    }

    const UnivalenceStats uni = univalence_probe(
        a, b, uni_samples, k_max, derive_seed(seed, "obs/" + pair + "/uni"),
        threshold, opt);
    for (std::size_t s = 0; s < uni.pairs.size(); ++s) {
      const UnivalencePair& p = uni.pairs[s];
      uni_csv += pair + "," + std::to_string(s) + "," +
                 format_double(p.separation) + "," +
                 format_double(p.stack_distance) + "," +
                 format_double(p.ratio) + "," + (p.swapped ? "1" : "0") + "\n";
    }

    summary += pair + ":\n";
    summary += "  swap ratio: worst " + format_double(worst_ratio) +
               ", above 1e-2 at " + std::to_string(n_broken) + "/" +
               std::to_string(n_states) + " states";
    summary += a == b ? " (identical pair: expected ~0 everywhere)\n"
                      : " (distinct pair: expected ~all states)\n";
    summary += "  univalence: min ratio " + format_double(uni.min_ratio) +
               ", near-collisions " + std::to_string(uni.n_near_collisions) +
               "/" + std::to_string(uni.n_evaluated) + " below " +
               format_double(uni.threshold) + "\n";
    watch.lap(pair);
  }

  ensure_out_dir(flags.out_dir);
  write_file_atomic(join_path(flags.out_dir, "swap_symmetry.csv"), swap_csv);
  write_file_atomic(join_path(flags.out_dir, "univalence.csv"), uni_csv);
  write_file_atomic(join_path(flags.out_dir, "summary.txt"), summary);
  Manifest m("observability");
  m.section("observability");
  m.kv("n_states", static_cast<long long>(n_states));
  m.kv("k_max", k_max);
  m.kv("step_time_units", opt.step);
  m.kv("substeps", opt.substeps);
  m.kv("univalence_samples", static_cast<long long>(uni_samples));
  m.kv("collision_threshold", threshold);
  m.kv("master_seed", seed);
  m.kv("pairs", static_cast<long long>(pairs.size()));
  m.output_file(flags.out_dir, "swap_symmetry.csv");
  m.output_file(flags.out_dir, "univalence.csv");
  m.output_file(flags.out_dir, "summary.txt");
  m.write(flags.out_dir);
  watch.write(flags.out_dir);
  std::printf("wrote swap_symmetry.csv, univalence.csv, summary.txt in %s\n",
              flags.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chaotic source separation by a simulated water tank"};
  app.set_version_flag("--version", "chaossep " CHAOSSEP_VERSION);
  app.require_subcommand(1);

  struct Cmd {
    const char* name;
    const char* help;
    bool workers, snapshots;
    int (*run)(const CommonFlags&);
  };
  const Cmd cmds[] = {
      {"trajectory", "integrate one source system and write CSV + plot data",
       false, false, cmd_trajectory},
      {"separate", "run one separation experiment", false, true, cmd_separate},
      {"matrix", "run all 21 source pairs and write the 6x6 MSE table", true,
       false, cmd_matrix},
      {"noise", "run the pairwise matrix at several noise levels", true, false,
       cmd_noise},
      {"highdim", "separate the two high-dimensional sources", false, true,
       cmd_highdim},
      {"lyapunov", "compute Lyapunov spectra of the source systems", false,
       false, cmd_lyapunov},
      {"observability", "swap-symmetry and univalence diagnostics", false,
       false, cmd_observability},
  };

  CommonFlags flags[std::size(cmds)];
  const Cmd* chosen = nullptr;
  const CommonFlags* chosen_flags = nullptr;
  for (std::size_t i = 0; i < std::size(cmds); ++i) {
    CLI::App* sub = app.add_subcommand(cmds[i].name, cmds[i].help);
    add_common_flags(sub, &flags[i], cmds[i].workers, cmds[i].snapshots);
    sub->callback([&, i] {
      chosen = &cmds[i];
      chosen_flags = &flags[i];
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit 0; usage errors exit 2
  }

  try {
    return chosen->run(*chosen_flags);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const InvalidInputError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
