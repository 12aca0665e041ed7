#include "css/highdim.hpp"

#include <fftw3.h>

#include <cmath>

namespace css {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kFieldBound = 1e3;

void check_field(const Eigen::VectorXd& y, const char* what, long step) {
  if (!y.allFinite() || y.cwiseAbs().maxCoeff() > kFieldBound)
    throw NumericalBlowupError(std::string(what) + " field left [-1e3, 1e3]",
                               step);
}

std::vector<std::string> numbered_channels(const char* prefix, int n) {
  std::vector<std::string> names(n);
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%s%02d", prefix, i);
    names[i] = buf;
  }
  return names;
}

}  // namespace

// ---------------------------------------------------------------------------
// Kuramoto-Sivashinsky
// ---------------------------------------------------------------------------

Eigen::VectorXd ks_default_initial(const KsConfig& cfg) {
  Eigen::VectorXd y(cfg.n_points);
  for (int j = 0; j < cfg.n_points; ++j) {
    const double x = kTwoPi * static_cast<double>(j) /
                     static_cast<double>(cfg.n_points);
    y(j) = std::cos(x) * (1.0 + std::sin(x));
  }
  return y;
}

struct KsIntegrator::Impl {
  using cplx = std::complex<double>;

  int n;
  std::vector<cplx> v;                       // spectral state
  std::vector<cplx> va, vb, vc;              // ETDRK4 stages
  std::vector<cplx> nv, na, nb, nc;          // nonlinear evaluations
  std::vector<cplx> in, out;                 // FFT work buffers
  std::vector<double> e_full, e_half;        // exp(h L), exp(h L / 2)
  std::vector<double> q, f1, f2, f3;         // phi-function weights
  std::vector<double> deriv;                 // k for the nonlinear term
  std::vector<bool> keep;                    // 2/3-rule mask
  fftw_plan fwd = nullptr, bwd = nullptr;

  explicit Impl(const KsConfig& cfg) : n(cfg.n_points) {
    require(n >= 8 && n % 2 == 0, "ks n_points must be even and >= 8");
    require(cfg.dt > 0 && cfg.domain_length > 0,
            "ks dt and domain_length must be positive");
    v.resize(n);
    va.resize(n);
    vb.resize(n);
    vc.resize(n);
    nv.resize(n);
    na.resize(n);
    nb.resize(n);
    nc.resize(n);
    in.resize(n);
    out.resize(n);
    fwd = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()),
                           reinterpret_cast<fftw_complex*>(out.data()),
                           FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(in.data()),
                           reinterpret_cast<fftw_complex*>(out.data()),
                           FFTW_BACKWARD, FFTW_ESTIMATE);

    e_full.resize(n);
    e_half.resize(n);
    q.resize(n);
    f1.resize(n);
    f2.resize(n);
    f3.resize(n);
    deriv.resize(n);
    keep.resize(n);

    const double h = cfg.dt;
    const int cutoff = n / 3;
    for (int m = 0; m < n; ++m) {
      const int mm = m <= n / 2 ? m : m - n;
      const double k = kTwoPi * static_cast<double>(mm) / cfg.domain_length;
      const double lin = k * k - k * k * k * k;
      e_full[m] = std::exp(h * lin);
      e_half[m] = std::exp(0.5 * h * lin);
      // k used inside the nonlinear term: drop the (unsigned) Nyquist mode
      deriv[m] = (m == n / 2) ? 0.0 : k;
      keep[m] = std::abs(mm) <= cutoff;

      // phi weights by averaging over a unit circle around h*lin; this is
      // exact in the limit of many points and immune to cancellation at
      // small |h*lin|
      const int n_contour = 32;
      cplx sq = 0, sf1 = 0, sf2 = 0, sf3 = 0;
      for (int r = 0; r < n_contour; ++r) {
        const double th = kTwoPi * (static_cast<double>(r) + 0.5) /
                          static_cast<double>(n_contour);
        const cplx z = h * lin + std::polar(1.0, th);
        const cplx ez = std::exp(z);
        const cplx z2 = z * z, z3 = z2 * z;
        sq += (std::exp(0.5 * z) - 1.0) / z;
        sf1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z2)) / z3;
        sf2 += (2.0 + z + ez * (-2.0 + z)) / z3;
        sf3 += (-4.0 - 3.0 * z - z2 + ez * (4.0 - z)) / z3;
      }
      const double scale = h / static_cast<double>(n_contour);
      q[m] = scale * sq.real();
      f1[m] = scale * sf1.real();
      f2[m] = scale * sf2.real();
      f3[m] = scale * sf3.real();
    }
  }

  ~Impl() {
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
  }

  // nl = -0.5 i k fft(real(ifft(v))^2), 2/3-rule dealiased on both sides
  void nonlinear(const std::vector<cplx>& src, std::vector<cplx>& nl) {
    for (int m = 0; m < n; ++m) in[m] = keep[m] ? src[m] : cplx(0, 0);
    fftw_execute(bwd);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int m = 0; m < n; ++m) {
      const double y = out[m].real() * inv_n;
      in[m] = cplx(y * y, 0.0);
    }
    fftw_execute(fwd);
    for (int m = 0; m < n; ++m)
      nl[m] = keep[m] ? cplx(0.0, -0.5 * deriv[m]) * out[m] : cplx(0, 0);
  }

  void step() {
    nonlinear(v, nv);
    for (int m = 0; m < n; ++m) va[m] = e_half[m] * v[m] + q[m] * nv[m];
    nonlinear(va, na);
    for (int m = 0; m < n; ++m) vb[m] = e_half[m] * v[m] + q[m] * na[m];
    nonlinear(vb, nb);
    for (int m = 0; m < n; ++m)
      vc[m] = e_half[m] * va[m] + q[m] * (2.0 * nb[m] - nv[m]);
    nonlinear(vc, nc);
    for (int m = 0; m < n; ++m)
      v[m] = e_full[m] * v[m] + f1[m] * nv[m] + 2.0 * f2[m] * (na[m] + nb[m]) +
             f3[m] * nc[m];
  }

  void set_state(const Eigen::VectorXd& y) {
    require(y.size() == n, "ks state has the wrong length");
    if (!y.allFinite()) throw InvalidInputError("ks state is not finite");
    for (int m = 0; m < n; ++m) in[m] = cplx(y(m), 0.0);
    fftw_execute(fwd);
    for (int m = 0; m < n; ++m) v[m] = out[m];
  }

  Eigen::VectorXd state() {
    for (int m = 0; m < n; ++m) in[m] = v[m];
    fftw_execute(bwd);
    Eigen::VectorXd y(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int m = 0; m < n; ++m) y(m) = out[m].real() * inv_n;
    return y;
  }
};

KsIntegrator::KsIntegrator(const KsConfig& cfg)
    : cfg_(cfg), impl_(std::make_unique<Impl>(cfg)) {
  impl_->set_state(ks_default_initial(cfg));
}

KsIntegrator::~KsIntegrator() = default;

void KsIntegrator::set_state(const Eigen::VectorXd& y) { impl_->set_state(y); }
Eigen::VectorXd KsIntegrator::state() const { return impl_->state(); }
void KsIntegrator::step() { impl_->step(); }

Trajectory integrate_ks(const KsConfig& cfg, const Eigen::VectorXd& y0,
                        long n_steps, long subsample) {
  require(n_steps > 0 && subsample > 0 && n_steps % subsample == 0,
          "n_steps must be a positive multiple of subsample");
  KsIntegrator ks(cfg);
  ks.set_state(y0);

  Trajectory t;
  t.dt = cfg.dt * static_cast<double>(subsample);
  t.channel_names = numbered_channels("y", cfg.n_points);
  t.values.resize(cfg.n_points, n_steps / subsample + 1);
  t.values.col(0) = y0;
  check_field(y0, "ks", 0);

  for (long k = 0; k < n_steps; ++k) {
    ks.step();
    if ((k + 1) % subsample == 0) {
      const Eigen::VectorXd y = ks.state();
      check_field(y, "ks", k);
      t.values.col((k + 1) / subsample) = y;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Lorenz 96
// ---------------------------------------------------------------------------

Eigen::VectorXd lorenz96_default_initial(const Lorenz96Config& cfg) {
  // the uniform state x_i = F is a fixed point; a small smooth perturbation
  // moves every site off it
  Eigen::VectorXd x = Eigen::VectorXd::Constant(cfg.n, cfg.forcing);
  for (int i = 0; i < cfg.n; ++i)
    x(i) += 0.01 * std::sin(kTwoPi * static_cast<double>(i) /
                            static_cast<double>(cfg.n));
  return x;
}

Eigen::VectorXd lorenz96_rhs(const Lorenz96Config& cfg,
                             const Eigen::VectorXd& x) {
  const int n = cfg.n;
  require(n >= 4, "lorenz 96 needs at least 4 sites");
  require(x.size() == n, "lorenz 96 state has the wrong length");
  Eigen::VectorXd dx(n);
  for (int i = 0; i < n; ++i) {
    const int ip1 = i + 1 == n ? 0 : i + 1;
    const int im1 = i == 0 ? n - 1 : i - 1;
    const int im2 = i <= 1 ? i + n - 2 : i - 2;
    dx(i) = (x(ip1) - x(im2)) * x(im1) - x(i) + cfg.forcing;
  }
  return dx;
}

Eigen::VectorXd lorenz96_rk4_step(const Lorenz96Config& cfg,
                                  const Eigen::VectorXd& x, double dt) {
  const Eigen::VectorXd k1 = lorenz96_rhs(cfg, x);
  const Eigen::VectorXd k2 = lorenz96_rhs(cfg, x + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = lorenz96_rhs(cfg, x + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = lorenz96_rhs(cfg, x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory integrate_lorenz96(const Lorenz96Config& cfg,
                              const Eigen::VectorXd& x0, long n_steps,
                              long subsample) {
  require(n_steps > 0 && subsample > 0 && n_steps % subsample == 0,
          "n_steps must be a positive multiple of subsample");
  require(cfg.dt > 0, "lorenz 96 dt must be positive");

  Trajectory t;
  t.dt = cfg.dt * static_cast<double>(subsample);
  t.channel_names = numbered_channels("x", cfg.n);
  t.values.resize(cfg.n, n_steps / subsample + 1);
  t.values.col(0) = x0;
  check_field(x0, "lorenz 96", 0);

  Eigen::VectorXd x = x0;
  for (long k = 0; k < n_steps; ++k) {
    x = lorenz96_rk4_step(cfg, x, cfg.dt);
    if ((k + 1) % subsample == 0) {
      check_field(x, "lorenz 96", k);
      t.values.col((k + 1) / subsample) = x;
    }
  }
  return t;
}

}  // namespace css
