#include "css/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>
#include <utility>

namespace css {

namespace {

// Largest block of samples lifted to features at once; bounds the transient
// memory of training and prediction at ~chunk * 3 * n_probes doubles.
constexpr Eigen::Index kChunk = 2048;

Eigen::Index duration_to_samples(double t, double dt, const char* what,
                                 bool allow_zero) {
  require(std::isfinite(t) && t >= 0.0,
          std::string(what) + " must be finite and nonnegative");
  const auto n = static_cast<Eigen::Index>(std::llround(t / dt));
  require(std::abs(t - static_cast<double>(n) * dt) <= 1e-6 * dt,
          std::string(what) + " must be a multiple of the tank dt");
  require(allow_zero || n > 0, std::string(what) + " must be positive");
  return n;
}

std::string channel_name(const Trajectory& t, Eigen::Index i) {
  return t.channel_names.empty() ? "c" + std::to_string(i)
                                 : t.channel_names[static_cast<std::size_t>(i)];
}

// Initial state nudged off the generic point by a labeled stream, then
// advanced through the system's transient so it sits on the attractor.
Eigen::Vector3d settled_state(Attractor a, std::uint64_t ic_seed) {
  const AttractorSpec spec = attractor_spec(a);
  Rng rng(ic_seed);
  Eigen::Vector3d x0 = spec.default_initial_state;
  for (int k = 0; k < 3; ++k) x0(k) += 0.1 * rng.normal();
  const long n = std::lround(spec.default_transient / spec.integration_dt);
  return advance(a, x0, spec.integration_dt, n);
}

// Post-transient launch states for both sources. When the sources are the
// same system the second state is re-drawn until the two sit at least one
// unit apart, so the mixed signal is never a doubled trajectory.
std::pair<Eigen::Vector3d, Eigen::Vector3d> launch_states(
    Attractor a, Attractor b, std::uint64_t seed_a, std::uint64_t seed_b) {
  const Eigen::Vector3d xa = settled_state(a, seed_a);
  Eigen::Vector3d xb = settled_state(b, seed_b);
  if (a == b) {
    std::uint64_t seed = seed_b;
    for (int attempt = 0; (xb - xa).norm() < 1.0; ++attempt) {
      require(attempt < 64,
              "could not find two initial conditions at least one unit apart");
      seed = derive_seed(seed, "redraw");
      xb = settled_state(b, seed);
    }
  }
  return {xa, xb};
}

// n_samples states spaced exactly tank_dt apart (integer RK4 substepping).
Trajectory attractor_source(Attractor a, const Eigen::Vector3d& x0,
                            double tank_dt, Eigen::Index n_samples) {
  const AttractorSpec spec = attractor_spec(a);
  const long sub = std::lround(tank_dt / spec.integration_dt);
  require(sub >= 1 && std::abs(tank_dt - static_cast<double>(sub) *
                                             spec.integration_dt) <=
                          1e-9 * tank_dt,
          "tank dt must be an integer multiple of the integration step");
  Trajectory t = integrate_rk4(a, x0, spec.integration_dt,
                               (n_samples - 1) * sub, sub);
  t.dt = tank_dt;  // sub integration steps span exactly one tank sample
  return t;
}

// The shared measure/train/test protocol. Fills every provenance field
// except the source ids and the nominal durations, which the caller owns.
// drive_gain scales the forcing amplitudes only (the targets and truths are
// untouched); the three-channel experiments always use 1.
SeparationResult separate_measured(const Trajectory& clean_a,
                                   const Trajectory& clean_b,
                                   const TankConfig& tank, Eigen::Index n_dump,
                                   Eigen::Index n_train, Eigen::Index n_test,
                                   double alpha, double noise_sigma,
                                   std::uint64_t master_seed,
                                   double drive_gain = 1.0,
                                   TankSnapshots* snapshots = nullptr) {
  const std::uint64_t filter_seed = derive_seed(master_seed, "tank-filters");
  const std::uint64_t probe_seed = derive_seed(master_seed, "tank-probes");
  const std::uint64_t noise_seed_a =
      derive_seed(master_seed, "measurement-noise/a");
  const std::uint64_t noise_seed_b =
      derive_seed(master_seed, "measurement-noise/b");

  // Measured signals: the clean normalized sources plus (optional) noise.
  // Training regresses onto the measured signals; scoring below always
  // compares against the clean ones.
  const Trajectory measured_a = add_noise(clean_a, noise_sigma, noise_seed_a);
  const Trajectory measured_b = add_noise(clean_b, noise_sigma, noise_seed_b);
  Trajectory mixture = mix(measured_a, measured_b);
  if (drive_gain != 1.0) mixture.values *= drive_gain;

  const InputFilterSet filters =
      make_filters(static_cast<int>(mixture.dims()), tank, filter_seed);
  const ProbeSet probes = make_probes(tank, probe_seed);
  const double t_dump = static_cast<double>(n_dump) * tank.dt;

  const Eigen::Index da = clean_a.dims();
  const Eigen::Index db = clean_b.dims();

  ReadoutModel model;
  {
    const Eigen::MatrixXd rec = drive_and_record(
        WaveField::quiescent(tank.nx, tank.ny),
        slice(mixture, 0, n_dump + n_train), filters, probes, tank, t_dump,
        snapshots ? &snapshots->after_train : nullptr);
    TrainAccumulator acc(tank.n_probes, static_cast<int>(da + db));
    for (Eigen::Index c = 0; c < n_train; c += kChunk) {
      const Eigen::Index n = std::min(kChunk, n_train - c);
      Eigen::MatrixXd tgt(da + db, n);
      tgt.topRows(da) = measured_a.values.middleCols(n_dump + c, n);
      tgt.bottomRows(db) = measured_b.values.middleCols(n_dump + c, n);
      acc.add_block(rec.middleCols(c, n), tgt);
    }
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(da + db));
    for (Eigen::Index i = 0; i < da; ++i)
      names.push_back("a:" + channel_name(clean_a, i));
    for (Eigen::Index i = 0; i < db; ++i)
      names.push_back("b:" + channel_name(clean_b, i));
    model = acc.solve(alpha, std::move(names));
  }

  // Test on a continuation the readout never saw, from a tank restarted at
  // quiescence with a fresh wash-out discarded.
  const Eigen::Index test0 = 2 * n_dump + n_train;
  Eigen::MatrixXd est(da + db, n_test);
  {
    const Eigen::MatrixXd rec = drive_and_record(
        WaveField::quiescent(tank.nx, tank.ny),
        slice(mixture, n_dump + n_train, n_dump + n_test), filters, probes,
        tank, t_dump, snapshots ? &snapshots->after_test : nullptr);
    for (Eigen::Index c = 0; c < n_test; c += kChunk) {
      const Eigen::Index n = std::min(kChunk, n_test - c);
      est.middleCols(c, n) =
          model.predict(Eigen::MatrixXd(rec.middleCols(c, n)));
    }
  }

  SeparationResult r;
  r.true_a = slice(clean_a, test0, n_test);
  r.true_b = slice(clean_b, test0, n_test);
  r.estimated_a.dt = tank.dt;
  r.estimated_a.channel_names = r.true_a.channel_names;
  r.estimated_a.values = est.topRows(da);
  r.estimated_b.dt = tank.dt;
  r.estimated_b.channel_names = r.true_b.channel_names;
  r.estimated_b.values = est.bottomRows(db);
  r.mse_a = mse(r.estimated_a.values, r.true_a.values);
  r.mse_b = mse(r.estimated_b.values, r.true_b.values);

  r.provenance.alpha = alpha;
  r.provenance.noise_sigma = noise_sigma;
  r.provenance.tank = tank;
  r.provenance.master_seed = master_seed;
  r.provenance.filter_seed = filter_seed;
  r.provenance.probe_seed = probe_seed;
  r.provenance.noise_seed_a = noise_seed_a;
  r.provenance.noise_seed_b = noise_seed_b;
  r.provenance.probe_set_id = probes.id;
  return r;
}

}  // namespace

void ExperimentConfig::validate() const {
  tank.validate();
  require(std::isfinite(alpha) && alpha >= 0.0,
          "alpha must be finite and nonnegative");
  require(std::isfinite(noise_sigma) && noise_sigma >= 0.0,
          "noise_sigma must be finite and nonnegative");
  duration_to_samples(t_dump, tank.dt, "t_dump", true);
  duration_to_samples(t_train, tank.dt, "t_train", false);
  duration_to_samples(t_test, tank.dt, "t_test", false);
}

Trajectory mix(const Trajectory& a, const Trajectory& b) {
  a.validate();
  b.validate();
  require(a.dims() == b.dims(), "mix: channel count mismatch");
  require(a.n_samples() == b.n_samples(), "mix: sample count mismatch");
  require(std::abs(a.dt - b.dt) <= 1e-9 * a.dt, "mix: sample step mismatch");
  Trajectory out;
  out.dt = a.dt;
  out.values = a.values + b.values;
  if (!a.channel_names.empty() && !b.channel_names.empty()) {
    out.channel_names.reserve(a.channel_names.size());
    for (std::size_t i = 0; i < a.channel_names.size(); ++i)
      out.channel_names.push_back(a.channel_names[i] + "+" +
                                  b.channel_names[i]);
  }
  return out;
}

Trajectory add_noise(const Trajectory& t, double sigma, std::uint64_t seed) {
  t.validate();
  require(std::isfinite(sigma) && sigma >= 0.0,
          "add_noise: sigma must be finite and nonnegative");
  if (sigma == 0.0) return t;
  Trajectory out = t;
  Rng rng(seed);
  // sample-major, channel-fastest: one fixed draw order per seed
  for (Eigen::Index s = 0; s < out.n_samples(); ++s)
    for (Eigen::Index c = 0; c < out.dims(); ++c)
      out.values(c, s) += sigma * rng.normal();
  out.normalization.reset();
  return out;
}

SeparationResult run_separation(const ExperimentConfig& cfg,
                                TankSnapshots* snapshots) {
  cfg.validate();
  const double dt = cfg.tank.dt;
  const Eigen::Index n_dump = duration_to_samples(cfg.t_dump, dt, "t_dump", true);
  const Eigen::Index n_train =
      duration_to_samples(cfg.t_train, dt, "t_train", false);
  const Eigen::Index n_test =
      duration_to_samples(cfg.t_test, dt, "t_test", false);
  const Eigen::Index total = 2 * n_dump + n_train + n_test;

  const auto [xa, xb] =
      launch_states(cfg.source_a, cfg.source_b,
                    derive_seed(cfg.master_seed, "initial-state/a"),
                    derive_seed(cfg.master_seed, "initial-state/b"));
  const Trajectory clean_a =
      normalize(attractor_source(cfg.source_a, xa, dt, total));
  const Trajectory clean_b =
      normalize(attractor_source(cfg.source_b, xb, dt, total));

  SeparationResult r =
      separate_measured(clean_a, clean_b, cfg.tank, n_dump, n_train, n_test,
                        cfg.alpha, cfg.noise_sigma, cfg.master_seed, 1.0,
                        snapshots);
  r.provenance.source_a = std::string(to_string(cfg.source_a));
  r.provenance.source_b = std::string(to_string(cfg.source_b));
  r.provenance.t_dump = cfg.t_dump;
  r.provenance.t_train = cfg.t_train;
  r.provenance.t_test = cfg.t_test;
  return r;
}

MseMatrix run_matrix(const ExperimentConfig& base, int n_workers) {
  base.validate();
  require(n_workers >= 1, "n_workers must be at least 1");
  MseMatrix m;
  for (int i = 0; i < 6; ++i)
    m.labels[static_cast<std::size_t>(i)] =
        std::string(to_string(kAllAttractors[static_cast<std::size_t>(i)]));

  // The 21 pair experiments are independent jobs with disjoint derived
  // seeds. Workers pull jobs from a shared counter; results land in
  // per-job slots and are assembled in job order afterwards, so the output
  // is byte-identical for every worker count.
  struct Job {
    int i = 0, j = 0;
    std::string pair;
    double mse_a = 0.0, mse_b = 0.0;
    bool ok = false;
    std::string failure;
  };
  std::vector<Job> jobs;
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j)
      jobs.push_back({i, j,
                      m.labels[static_cast<std::size_t>(i)] + "+" +
                          m.labels[static_cast<std::size_t>(j)],
                      0.0, 0.0, false, {}});

  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  const auto work = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= jobs.size()) return;
      Job& job = jobs[idx];
      ExperimentConfig cfg = base;
      cfg.source_a = kAllAttractors[static_cast<std::size_t>(job.i)];
      cfg.source_b = kAllAttractors[static_cast<std::size_t>(job.j)];
      cfg.master_seed = derive_seed(base.master_seed, "pair/" + job.pair);
      try {
        const SeparationResult r = run_separation(cfg);
        job.mse_a = r.mse_a;
        job.mse_b = r.mse_b;
        job.ok = true;
      } catch (const Error& e) {
        job.failure = job.pair + ": " + e.what();
      } catch (...) {
        const std::lock_guard<std::mutex> lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        return;
      }
    }
  };

  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    const int n = std::min<int>(n_workers, static_cast<int>(jobs.size()));
    pool.reserve(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);

  for (const Job& job : jobs) {
    const auto i = static_cast<std::size_t>(job.i);
    const auto j = static_cast<std::size_t>(job.j);
    if (!job.ok) {
      m.failures.push_back(job.failure);
      continue;
    }
    m.values(job.i, job.j) = job.mse_a;
    m.valid[i][j] = true;
    if (job.j != job.i) {
      m.values(job.j, job.i) = job.mse_b;
      m.valid[j][i] = true;
    }
  }
  return m;
}

std::vector<NoiseSweepEntry> noise_sweep(const ExperimentConfig& base,
                                         const std::vector<double>& sigmas,
                                         int n_workers) {
  require(!sigmas.empty(), "noise_sweep: need at least one sigma");
  for (double s : sigmas)
    require(std::isfinite(s) && s >= 0.0,
            "noise_sweep: sigmas must be finite and nonnegative");
  std::vector<NoiseSweepEntry> out;
  out.reserve(sigmas.size());
  for (double s : sigmas) {
    ExperimentConfig cfg = base;
    cfg.noise_sigma = s;
    out.push_back({s, run_matrix(cfg, n_workers)});
  }
  return out;
}

HighdimConfig::HighdimConfig() {
  ks.dt = 0.015;  // two spectral steps per tank sample
  tank.nx = 256;
  tank.ny = 256;
  tank.drag = 0.6;
}

void HighdimConfig::validate() const {
  tank.validate();
  require(std::isfinite(alpha) && alpha >= 0.0,
          "alpha must be finite and nonnegative");
  require(std::isfinite(drive_gain) && drive_gain >= 0.0,
          "drive_gain must be finite and nonnegative (0 = automatic)");
  duration_to_samples(t_dump, tank.dt, "t_dump", true);
  duration_to_samples(t_train, tank.dt, "t_train", false);
  duration_to_samples(t_test, tank.dt, "t_test", false);
  require(ks.n_points >= 4 && ks.domain_length > 0.0 && ks.dt > 0.0,
          "invalid Kuramoto-Sivashinsky configuration");
  require(l96.n >= 4 && l96.dt > 0.0, "invalid Lorenz 96 configuration");
  for (const auto& [step, name] :
       {std::pair<double, const char*>{ks.dt, "the spectral step"},
        std::pair<double, const char*>{l96.dt, "the Lorenz 96 step"}}) {
    const long sub = std::lround(tank.dt / step);
    require(sub >= 1 && std::abs(tank.dt - static_cast<double>(sub) * step) <=
                            1e-9 * tank.dt,
            std::string("tank dt must be an integer multiple of ") + name);
  }
}

SeparationResult run_highdim(const HighdimConfig& cfg,
                             TankSnapshots* snapshots) {
  cfg.validate();
  const double dt = cfg.tank.dt;
  const Eigen::Index n_dump = duration_to_samples(cfg.t_dump, dt, "t_dump", true);
  const Eigen::Index n_train =
      duration_to_samples(cfg.t_train, dt, "t_train", false);
  const Eigen::Index n_test =
      duration_to_samples(cfg.t_test, dt, "t_test", false);
  const Eigen::Index total = 2 * n_dump + n_train + n_test;

  // Kuramoto-Sivashinsky source: nudge the generic profile, settle onto the
  // attractor, then record on the tank clock.
  const long ks_sub = std::lround(dt / cfg.ks.dt);
  Eigen::VectorXd y0 = ks_default_initial(cfg.ks);
  {
    Rng rng(derive_seed(cfg.master_seed, "initial-state/a"));
    for (Eigen::Index i = 0; i < y0.size(); ++i) y0(i) += 0.01 * rng.normal();
  }
  const long ks_settle = std::lround(200.0 / cfg.ks.dt);
  y0 = integrate_ks(cfg.ks, y0, ks_settle, ks_settle).values.col(1);
  Trajectory raw_a = integrate_ks(cfg.ks, y0, (total - 1) * ks_sub, ks_sub);
  raw_a.dt = dt;

  // Lorenz 96 source, same treatment.
  const long l_sub = std::lround(dt / cfg.l96.dt);
  Eigen::VectorXd x0 = lorenz96_default_initial(cfg.l96);
  {
    Rng rng(derive_seed(cfg.master_seed, "initial-state/b"));
    for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) += 0.01 * rng.normal();
  }
  const long l_settle = std::lround(100.0 / cfg.l96.dt);
  x0 = integrate_lorenz96(cfg.l96, x0, l_settle, l_settle).values.col(1);
  Trajectory raw_b =
      integrate_lorenz96(cfg.l96, x0, (total - 1) * l_sub, l_sub);
  raw_b.dt = dt;

  // Every filter has unit peak amplitude, so d driven channels inject about
  // d/3 times the power of the three-channel experiments. Matching that
  // power keeps the waves in the same regime the tank is known to resolve;
  // without it the 32-channel drive runs cells dry.
  const double gain = cfg.drive_gain > 0.0
                          ? cfg.drive_gain
                          : std::sqrt(3.0 / static_cast<double>(raw_a.dims()));

  SeparationResult r = separate_measured(normalize(raw_a), normalize(raw_b),
                                         cfg.tank, n_dump, n_train, n_test,
                                         cfg.alpha, 0.0, cfg.master_seed, gain,
                                         snapshots);
  r.provenance.source_a = "kuramoto-sivashinsky";
  r.provenance.source_b = "lorenz96";
  r.provenance.t_dump = cfg.t_dump;
  r.provenance.t_train = cfg.t_train;
  r.provenance.t_test = cfg.t_test;
  return r;
}

double mean_channel_correlation(const Trajectory& a, const Trajectory& b) {
  a.validate();
  b.validate();
  require(a.dims() == b.dims() && a.n_samples() == b.n_samples(),
          "correlation: shape mismatch");
  require(a.n_samples() >= 2, "correlation: need at least two samples");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.dims(); ++i) {
    const Eigen::RowVectorXd va = a.values.row(i).array() - a.values.row(i).mean();
    const Eigen::RowVectorXd vb = b.values.row(i).array() - b.values.row(i).mean();
    const double na = va.norm();
    const double nb = vb.norm();
    if (na > 0.0 && nb > 0.0) acc += va.dot(vb) / (na * nb);
  }
  return acc / static_cast<double>(a.dims());
}

Eigen::Matrix<double, 6, 1> offdiagonal_row_means(const MseMatrix& m) {
  Eigen::Matrix<double, 6, 1> out;
  for (int i = 0; i < 6; ++i) {
    double sum = 0.0;
    int n = 0;
    for (int j = 0; j < 6; ++j) {
      if (j == i) continue;
      if (!m.valid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
        continue;
      sum += m.values(i, j);
      ++n;
    }
    out(i) = n > 0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void write_mse_csv(const MseMatrix& m, const std::string& path) {
  std::string text = "system";
  for (const auto& label : m.labels) text += "," + label;
  text += "\n";
  for (int i = 0; i < 6; ++i) {
    text += m.labels[static_cast<std::size_t>(i)];
    for (int j = 0; j < 6; ++j) {
      text += ",";
      text += m.valid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                  ? format_double(m.values(i, j))
                  : "nan";
    }
    text += "\n";
  }
  write_file_atomic(path, text);
}

void export_separation(const SeparationResult& r, const std::string& dir) {
  r.estimated_a.validate();
  r.estimated_b.validate();
  r.true_a.validate();
  r.true_b.validate();
  const Eigen::Index n = r.estimated_a.n_samples();
  require(r.estimated_b.n_samples() == n && r.true_a.n_samples() == n &&
              r.true_b.n_samples() == n,
          "export: result trajectories are not aligned");

  std::string text = "t";
  const auto add_header = [&text](const Trajectory& t, const char* tag) {
    for (Eigen::Index i = 0; i < t.dims(); ++i)
      text += "," + std::string(tag) + ":" + channel_name(t, i);
  };
  add_header(r.estimated_a, "est_a");
  add_header(r.true_a, "true_a");
  add_header(r.estimated_b, "est_b");
  add_header(r.true_b, "true_b");
  text += "\n";
  for (Eigen::Index s = 0; s < n; ++s) {
    text += format_double(static_cast<double>(s) * r.estimated_a.dt);
    const auto add_row = [&text, s](const Trajectory& t) {
      for (Eigen::Index i = 0; i < t.dims(); ++i)
        text += "," + format_double(t.values(i, s));
    };
    add_row(r.estimated_a);
    add_row(r.true_a);
    add_row(r.estimated_b);
    add_row(r.true_b);
    text += "\n";
  }
  write_file_atomic(dir + "/estimates.csv", text);
  const std::uint64_t hash = fnv1a64_bytes(text.data(), text.size());

  const RunProvenance& p = r.provenance;
  std::string manifest;
  const auto line = [&manifest](const std::string& key,
                                const std::string& value) {
    manifest += key + " = " + value + "\n";
  };
  line("source_a", p.source_a);
  line("source_b", p.source_b);
  line("t_dump", format_double(p.t_dump));
  line("t_train", format_double(p.t_train));
  line("t_test", format_double(p.t_test));
  line("alpha", format_double(p.alpha));
  line("noise_sigma", format_double(p.noise_sigma));
  line("grid", std::to_string(p.tank.nx) + " x " + std::to_string(p.tank.ny));
  line("n_probes", std::to_string(p.tank.n_probes));
  line("gravity", format_double(p.tank.gravity));
  line("drag", format_double(p.tank.drag));
  line("tank_dt", format_double(p.tank.dt));
  line("master_seed", std::to_string(p.master_seed));
  line("filter_seed", std::to_string(p.filter_seed));
  line("probe_seed", std::to_string(p.probe_seed));
  line("noise_seed_a", std::to_string(p.noise_seed_a));
  line("noise_seed_b", std::to_string(p.noise_seed_b));
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(p.probe_set_id));
  line("probe_set_id", hex);
  line("mse_a", format_double(r.mse_a));
  line("mse_b", format_double(r.mse_b));
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(hash));
  line("estimates_csv_fnv1a64", hex);
  write_file_atomic(dir + "/manifest.txt", manifest);
}

}  // namespace css
