#include "css/tank.hpp"

#include <cmath>

namespace css {

namespace {
constexpr double kDepthFloor = 1e-6;

double kahan_sum(const double* p, std::size_t n) {
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = p[i] - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}
}  // namespace

// ---------------------------------------------------------------------------
// TankConfig
// ---------------------------------------------------------------------------

double TankConfig::rest_courant_per_substep() const {
  const int n = resolved_substeps();
  const double dts = dt / static_cast<double>(n);
  return std::sqrt(gravity) * dts * std::max(1.0 / dx(), 1.0 / dy());
}

int TankConfig::resolved_substeps() const {
  if (substeps_per_sample > 0) return substeps_per_sample;
  const double rest_courant_per_dt =
      std::sqrt(gravity) * dt * std::max(1.0 / dx(), 1.0 / dy());
  return std::max(1, static_cast<int>(
                         std::ceil(rest_courant_per_dt / cfl_rest_target)));
}

void TankConfig::validate() const {
  require(nx >= 16 && ny >= 16, "tank grid must be at least 16 x 16");
  require(gravity > 0.0, "gravity must be positive");
  require(drag >= 0.0, "drag must be nonnegative");
  require(dt > 0.0, "tank dt must be positive");
  require(n_probes > 0 && n_probes <= nx * ny,
          "n_probes must be in [1, nx * ny]");
  require(substeps_per_sample >= 0, "substeps_per_sample must be >= 0");
  require(cfl_rest_target > 0.0 && cfl_rest_target <= cfl_abort,
          "cfl_rest_target must lie in (0, cfl_abort]");
  require(filter_width_fraction > 0.0 && filter_width_fraction < 0.5,
          "filter_width_fraction must lie in (0, 0.5)");
  require(dissipation_eps4 >= 0.0 && dissipation_eps4 < 1.0 / 16.0,
          "dissipation_eps4 must lie in [0, 1/16)");
  if (rest_courant_per_substep() > cfl_abort)
    throw InvalidInputError(
        "substeps_per_sample = " + std::to_string(substeps_per_sample) +
        " leaves the rest-state Courant number at " +
        std::to_string(rest_courant_per_substep()) + ", above the stability bound " +
        std::to_string(cfl_abort));
}

// ---------------------------------------------------------------------------
// WaveField
// ---------------------------------------------------------------------------

WaveField WaveField::quiescent(int nx, int ny) {
  require(nx > 0 && ny > 0, "field dimensions must be positive");
  WaveField f;
  f.nx = nx;
  f.ny = ny;
  f.h.assign(static_cast<std::size_t>(nx) * ny, 1.0);
  f.u.assign(static_cast<std::size_t>(nx) * ny, 0.0);
  f.v.assign(static_cast<std::size_t>(nx) * ny, 0.0);
  return f;
}

void WaveField::validate() const {
  const auto n = static_cast<std::size_t>(nx) * ny;
  require(nx > 0 && ny > 0, "field dimensions must be positive");
  require(h.size() == n && u.size() == n && v.size() == n,
          "field array sizes do not match the grid");
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(h[k]) || !std::isfinite(u[k]) || !std::isfinite(v[k]))
      throw InvalidInputError("field contains non-finite values");
    if (h[k] <= 0.0) throw InvalidInputError("field has non-positive depth");
  }
}

// ---------------------------------------------------------------------------
// Filters and probes
// ---------------------------------------------------------------------------

double InputFilterSet::cell_sum(int k) const {
  return kahan_sum(filter(k), static_cast<std::size_t>(nx) * ny);
}

namespace {

// separable Gaussian blur with reflected boundaries
void gaussian_blur(std::vector<double>& field, int nx, int ny, double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double ksum = 0.0;
  for (int o = -radius; o <= radius; ++o) {
    kernel[o + radius] = std::exp(-0.5 * (o / sigma) * (o / sigma));
    ksum += kernel[o + radius];
  }
  for (double& w : kernel) w /= ksum;

  auto reflect = [](int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
  };

  std::vector<double> tmp(field.size());
  for (int i = 0; i < nx; ++i)  // along y
    for (int j = 0; j < ny; ++j) {
      double s = 0.0;
      for (int o = -radius; o <= radius; ++o)
        s += kernel[o + radius] * field[i * ny + reflect(j + o, ny)];
      tmp[i * ny + j] = s;
    }
  for (int j = 0; j < ny; ++j)  // along x
    for (int i = 0; i < nx; ++i) {
      double s = 0.0;
      for (int o = -radius; o <= radius; ++o)
        s += kernel[o + radius] * tmp[reflect(i + o, nx) * ny + j];
      field[i * ny + j] = s;
    }
}

}  // namespace

InputFilterSet make_filters(int d, const TankConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  require(d > 0, "need at least one filter");
  const std::size_t cells = static_cast<std::size_t>(cfg.nx) * cfg.ny;

  InputFilterSet fs;
  fs.d = d;
  fs.nx = cfg.nx;
  fs.ny = cfg.ny;
  fs.data.resize(static_cast<std::size_t>(d) * cells);

  Rng rng(seed);
  std::vector<double> work(cells);
  for (int k = 0; k < d; ++k) {
    for (double& w : work) w = rng.normal();
    gaussian_blur(work, cfg.nx, cfg.ny,
                  cfg.filter_width_fraction * static_cast<double>(cfg.nx));

    double peak = 0.0;
    for (double w : work) peak = std::max(peak, std::abs(w));
    if (peak < 1e-12)
      throw DegenerateChannelError("input filter " + std::to_string(k) +
                                   " vanished after smoothing");
    for (double& w : work) w /= peak;

    // exact zero discrete sum: remove the mean, then push the rounding
    // residue into one cell so forcing cannot create or destroy volume
    const double mean = kahan_sum(work.data(), cells) / static_cast<double>(cells);
    for (double& w : work) w -= mean;
    work[0] -= kahan_sum(work.data(), cells);

    std::copy(work.begin(), work.end(),
              fs.data.begin() + static_cast<std::ptrdiff_t>(k) * cells);
  }
  return fs;
}

ProbeSet make_probes(const TankConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const auto picks = rng.sample_without_replacement(
      static_cast<std::uint64_t>(cfg.nx) * cfg.ny, cfg.n_probes);

  ProbeSet ps;
  ps.cells.reserve(picks.size());
  for (auto c : picks) ps.cells.push_back(static_cast<int>(c));

  ByteWriter w;
  w.u64(seed);
  w.u32(static_cast<std::uint32_t>(cfg.nx));
  w.u32(static_cast<std::uint32_t>(cfg.ny));
  for (int c : ps.cells) w.u32(static_cast<std::uint32_t>(c));
  ps.id = fnv1a64_bytes(w.data().data(), w.data().size());
  return ps;
}

// ---------------------------------------------------------------------------
// Tank
// ---------------------------------------------------------------------------

Tank::Tank(const TankConfig& cfg, const InputFilterSet& filters)
    : cfg_(cfg), filters_(&filters) {
  cfg_.validate();
  require(filters.nx == cfg.nx && filters.ny == cfg.ny,
          "filter grid does not match the tank grid");
  require(filters.d > 0, "tank needs at least one input filter");
  ld_ = cfg.ny + 4;
  const std::size_t padded = static_cast<std::size_t>(cfg.nx + 4) * ld_;
  h_.assign(padded, 1.0);
  hu_.assign(padded, 0.0);
  hv_.assign(padded, 0.0);
  p_.assign(padded, 0.0);
  fa_.assign(padded, 0.0);
  fb_.assign(padded, 0.0);
  fc_.assign(padded, 0.0);
  d4_.assign(padded, 0.0);
  const std::size_t xfaces = static_cast<std::size_t>(cfg.nx + 1) * cfg.ny;
  const std::size_t yfaces = static_cast<std::size_t>(cfg.nx) * (cfg.ny + 1);
  xu_.assign(xfaces, 0.0);
  xv_.assign(xfaces, 0.0);
  xfu_.assign(xfaces, 0.0);
  xfv_.assign(xfaces, 0.0);
  yu_.assign(yfaces, 0.0);
  yv_.assign(yfaces, 0.0);
  yfu_.assign(yfaces, 0.0);
  yfv_.assign(yfaces, 0.0);
  reset();
}

void Tank::reset() { reset(WaveField::quiescent(cfg_.nx, cfg_.ny)); }

void Tank::reset(const WaveField& state) {
  state.validate();
  require(state.nx == cfg_.nx && state.ny == cfg_.ny,
          "field grid does not match the tank grid");
  for (int i = 0; i < cfg_.nx; ++i)
    for (int j = 0; j < cfg_.ny; ++j) {
      const std::size_t src = static_cast<std::size_t>(i) * cfg_.ny + j;
      const std::size_t dst = static_cast<std::size_t>(i + 2) * ld_ + (j + 2);
      h_[dst] = state.h[src];
      hu_[dst] = state.h[src] * state.u[src];
      hv_[dst] = state.h[src] * state.v[src];
    }
  step_index_ = 0;
}

WaveField Tank::field() const {
  WaveField f;
  f.nx = cfg_.nx;
  f.ny = cfg_.ny;
  f.t = time();
  const std::size_t cells = static_cast<std::size_t>(cfg_.nx) * cfg_.ny;
  f.h.resize(cells);
  f.u.resize(cells);
  f.v.resize(cells);
  for (int i = 0; i < cfg_.nx; ++i)
    for (int j = 0; j < cfg_.ny; ++j) {
      const std::size_t dst = static_cast<std::size_t>(i) * cfg_.ny + j;
      const std::size_t src = static_cast<std::size_t>(i + 2) * ld_ + (j + 2);
      f.h[dst] = h_[src];
      f.u[dst] = hu_[src] / h_[src];
      f.v[dst] = hv_[src] / h_[src];
    }
  return f;
}

double Tank::probe_height(int cell) const {
  const int i = cell / cfg_.ny, j = cell % cfg_.ny;
  return h_[static_cast<std::size_t>(i + 2) * ld_ + (j + 2)] - 1.0;
}

double Tank::volume() const {
  const double da = cfg_.dx() * cfg_.dy();
  double s = 0.0, c = 0.0;
  for (int i = 2; i <= cfg_.nx + 1; ++i) {
    const double row =
        kahan_sum(&h_[static_cast<std::size_t>(i) * ld_ + 2], cfg_.ny);
    const double y = row - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s * da;
}

double Tank::energy() const {
  const double da = cfg_.dx() * cfg_.dy();
  double e = 0.0;
  for (int i = 2; i <= cfg_.nx + 1; ++i)
    for (int j = 2; j <= cfg_.ny + 1; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * ld_ + j;
      const double h = h_[c];
      const double ke = 0.5 * (hu_[c] * hu_[c] + hv_[c] * hv_[c]) / h;
      const double pe = 0.5 * cfg_.gravity * (h - 1.0) * (h - 1.0);
      e += (ke + pe) * da;
    }
  return e;
}

void Tank::refresh_ghosts() {
  const int nx = cfg_.nx, ny = cfg_.ny;
  const std::size_t ld = ld_;
  // walls: mirror depth and tangential momentum, negate the normal momentum;
  // two layers so the dissipation stencil sees a reflection-symmetric field
  for (int j = 2; j <= ny + 1; ++j) {
    h_[ld + j] = h_[2 * ld + j];
    hu_[ld + j] = -hu_[2 * ld + j];
    hv_[ld + j] = hv_[2 * ld + j];
    h_[j] = h_[3 * ld + j];
    hu_[j] = -hu_[3 * ld + j];
    hv_[j] = hv_[3 * ld + j];
    const std::size_t g1 = static_cast<std::size_t>(nx + 2) * ld + j;
    const std::size_t g2 = static_cast<std::size_t>(nx + 3) * ld + j;
    const std::size_t r1 = static_cast<std::size_t>(nx + 1) * ld + j;
    const std::size_t r2 = static_cast<std::size_t>(nx) * ld + j;
    h_[g1] = h_[r1];
    hu_[g1] = -hu_[r1];
    hv_[g1] = hv_[r1];
    h_[g2] = h_[r2];
    hu_[g2] = -hu_[r2];
    hv_[g2] = hv_[r2];
  }
  for (int i = 2; i <= nx + 1; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) * ld;
    h_[row + 1] = h_[row + 2];
    hu_[row + 1] = hu_[row + 2];
    hv_[row + 1] = -hv_[row + 2];
    h_[row] = h_[row + 3];
    hu_[row] = hu_[row + 3];
    hv_[row] = -hv_[row + 3];
    h_[row + ny + 2] = h_[row + ny + 1];
    hu_[row + ny + 2] = hu_[row + ny + 1];
    hv_[row + ny + 2] = -hv_[row + ny + 1];
    h_[row + ny + 3] = h_[row + ny];
    hu_[row + ny + 3] = hu_[row + ny];
    hv_[row + ny + 3] = -hv_[row + ny];
  }
  // diagonal corners of the first ghost layer, used by the mixed-derivative
  // stencil: double reflection, so both momentum components flip sign
  const std::size_t corner_g[4] = {
      ld + 1, ld + static_cast<std::size_t>(ny) + 2,
      static_cast<std::size_t>(nx + 2) * ld + 1,
      static_cast<std::size_t>(nx + 2) * ld + static_cast<std::size_t>(ny) + 2};
  const std::size_t corner_r[4] = {
      2 * ld + 2, 2 * ld + static_cast<std::size_t>(ny) + 1,
      static_cast<std::size_t>(nx + 1) * ld + 2,
      static_cast<std::size_t>(nx + 1) * ld + static_cast<std::size_t>(ny) + 1};
  for (int k = 0; k < 4; ++k) {
    h_[corner_g[k]] = h_[corner_r[k]];
    hu_[corner_g[k]] = -hu_[corner_r[k]];
    hv_[corner_g[k]] = -hv_[corner_r[k]];
  }
}

void Tank::check_courant() const {
  const int n = cfg_.resolved_substeps();
  const double dts = cfg_.dt / static_cast<double>(n);
  double worst = 0.0;
  for (int i = 2; i <= cfg_.nx + 1; ++i)
    for (int j = 2; j <= cfg_.ny + 1; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * ld_ + j;
      const double h = h_[c];
      const double wave = std::sqrt(cfg_.gravity * h);
      const double ax = std::abs(hu_[c]) / h + wave;
      const double ay = std::abs(hv_[c]) / h + wave;
      worst = std::max(worst, std::max(ax / cfg_.dx(), ay / cfg_.dy()));
    }
  const double courant = worst * dts;
  if (!std::isfinite(courant))
    throw NumericalBlowupError("tank state is not finite", step_index_);
  if (courant > cfg_.cfl_abort)
    throw StabilityError("Courant number exceeded the stability bound",
                         step_index_, courant);
}

void Tank::substep(double dts) {
  const int nx = cfg_.nx, ny = cfg_.ny, ld = ld_;
  const double g = cfg_.gravity, b = cfg_.drag;
  const double cx = dts / cfg_.dx(), cy = dts / cfg_.dy();
  const double half_g = 0.5 * g;
  const double qdtb = 0.25 * dts * b;
  const double qdt = 0.25 * dts;

  refresh_ghosts();

  // per-cell flux pieces over the first ghost layer and the interior
  for (int i = 1; i <= nx + 2; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) * ld;
    const double* __restrict h = &h_[row];
    const double* __restrict hu = &hu_[row];
    const double* __restrict hv = &hv_[row];
    double* __restrict fa = &fa_[row];
    double* __restrict fb = &fb_[row];
    double* __restrict fc = &fc_[row];
    for (int j = 1; j <= ny + 2; ++j) {
      const double invh = 1.0 / h[j];
      fa[j] = hu[j] * hu[j] * invh + half_g * h[j] * h[j];
      fb[j] = hu[j] * hv[j] * invh;
      fc[j] = hv[j] * hv[j] * invh + half_g * h[j] * h[j];
    }
  }

  // half-step states on x faces (between cell rows i-1 and i)
  for (int i = 0; i <= nx; ++i) {
    const std::size_t lrow = static_cast<std::size_t>(i + 1) * ld + 2;
    const std::size_t rrow = lrow + ld;
    const std::size_t frow = static_cast<std::size_t>(i) * ny;
    const double* __restrict hl = &h_[lrow];
    const double* __restrict hr = &h_[rrow];
    const double* __restrict ul = &hu_[lrow];
    const double* __restrict ur = &hu_[rrow];
    const double* __restrict vl = &hv_[lrow];
    const double* __restrict vr = &hv_[rrow];
    const double* __restrict pl = &p_[lrow];
    const double* __restrict pr = &p_[rrow];
    const double* __restrict al = &fa_[lrow];
    const double* __restrict ar = &fa_[rrow];
    const double* __restrict bl = &fb_[lrow];
    const double* __restrict br = &fb_[rrow];
    double* __restrict xu = &xu_[frow];
    double* __restrict xv = &xv_[frow];
    double* __restrict xfu = &xfu_[frow];
    double* __restrict xfv = &xfv_[frow];
    for (int j = 0; j < ny; ++j) {
      const double hm = 0.5 * (hl[j] + hr[j]) - 0.5 * cx * (ur[j] - ul[j]) +
                        qdt * (pl[j] + pr[j]);
      const double um = 0.5 * (ul[j] + ur[j]) - 0.5 * cx * (ar[j] - al[j]) -
                        qdtb * (ul[j] + ur[j]);
      const double vm = 0.5 * (vl[j] + vr[j]) - 0.5 * cx * (br[j] - bl[j]) -
                        qdtb * (vl[j] + vr[j]);
      if (!(hm > kDepthFloor)) {
        if (!std::isfinite(hm))
          throw NumericalBlowupError("tank state is not finite", step_index_);
        throw DryCellError("water depth collapsed at an x face", step_index_);
      }
      const double invhm = 1.0 / hm;
      xu[j] = um;
      xv[j] = vm;
      xfu[j] = um * um * invhm + half_g * hm * hm;
      xfv[j] = um * vm * invhm;
    }
  }

  // half-step states on y faces (between cell columns j-1 and j)
  for (int i = 0; i < nx; ++i) {
    const std::size_t srow = static_cast<std::size_t>(i + 2) * ld + 1;
    const std::size_t frow = static_cast<std::size_t>(i) * (ny + 1);
    const double* __restrict h = &h_[srow];
    const double* __restrict hu = &hu_[srow];
    const double* __restrict hv = &hv_[srow];
    const double* __restrict p = &p_[srow];
    const double* __restrict fb = &fb_[srow];
    const double* __restrict fc = &fc_[srow];
    double* __restrict yu = &yu_[frow];
    double* __restrict yv = &yv_[frow];
    double* __restrict yfu = &yfu_[frow];
    double* __restrict yfv = &yfv_[frow];
    for (int j = 0; j <= ny; ++j) {
      const double hm = 0.5 * (h[j] + h[j + 1]) - 0.5 * cy * (hv[j + 1] - hv[j]) +
                        qdt * (p[j] + p[j + 1]);
      const double vm = 0.5 * (hv[j] + hv[j + 1]) -
                        0.5 * cy * (fc[j + 1] - fc[j]) -
                        qdtb * (hv[j] + hv[j + 1]);
      const double um = 0.5 * (hu[j] + hu[j + 1]) -
                        0.5 * cy * (fb[j + 1] - fb[j]) -
                        qdtb * (hu[j] + hu[j + 1]);
      if (!(hm > kDepthFloor)) {
        if (!std::isfinite(hm))
          throw NumericalBlowupError("tank state is not finite", step_index_);
        throw DryCellError("water depth collapsed at a y face", step_index_);
      }
      const double invhm = 1.0 / hm;
      yu[j] = um;
      yv[j] = vm;
      yfv[j] = vm * vm * invhm + half_g * hm * hm;
      yfu[j] = vm * um * invhm;
    }
  }

  // Mixed-derivative correction. Face half-steps alone reproduce only the
  // dxx and dyy parts of the second-order Lax-Wendroff expansion; without
  // the dt^2/2 (AB+BA) dxy part the scheme amplifies oblique waves at every
  // Courant number (the classic defect of the face-based two-step form).
  // For shallow water that term couples the momentum components through
  // g h d_xy of the opposite momentum, and restoring it makes the symbol
  // neutral for Courant numbers up to about 0.6. The flux pieces are spent
  // once the face passes are done, so reuse them as scratch.
  const double kxy = 0.125 * dts * dts * g / (cfg_.dx() * cfg_.dy());
  for (int i = 2; i <= nx + 1; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) * ld;
    const double* hrow = &h_[row];
    const double* up = &hu_[row + ld];
    const double* um = &hu_[row - ld];
    const double* vp = &hv_[row + ld];
    const double* vm = &hv_[row - ld];
    double* __restrict cu = &fa_[row];
    double* __restrict cv = &fb_[row];
    for (int j = 2; j <= ny + 1; ++j) {
      const double k = kxy * hrow[j];
      cu[j] = k * (vp[j + 1] - vp[j - 1] - vm[j + 1] + vm[j - 1]);
      cv[j] = k * (up[j + 1] - up[j - 1] - um[j + 1] + um[j - 1]);
    }
  }

  // full step on cells
  for (int i = 0; i < nx; ++i) {
    const std::size_t crow = static_cast<std::size_t>(i + 2) * ld + 2;
    const std::size_t xw = static_cast<std::size_t>(i) * ny;
    const std::size_t xe = xw + ny;
    const std::size_t ys = static_cast<std::size_t>(i) * (ny + 1);
    double* __restrict h = &h_[crow];
    double* __restrict hu = &hu_[crow];
    double* __restrict hv = &hv_[crow];
    const double* __restrict p = &p_[crow];
    const double* __restrict cu = &fa_[crow];
    const double* __restrict cv = &fb_[crow];
    const double* __restrict xuw = &xu_[xw];
    const double* __restrict xue = &xu_[xe];
    const double* __restrict xvw = &xv_[xw];
    const double* __restrict xve = &xv_[xe];
    const double* __restrict xfuw = &xfu_[xw];
    const double* __restrict xfue = &xfu_[xe];
    const double* __restrict xfvw = &xfv_[xw];
    const double* __restrict xfve = &xfv_[xe];
    const double* __restrict yus = &yu_[ys];
    const double* __restrict yvs = &yv_[ys];
    const double* __restrict yfus = &yfu_[ys];
    const double* __restrict yfvs = &yfv_[ys];
    for (int j = 0; j < ny; ++j) {
      const double hn = h[j] - cx * (xue[j] - xuw[j]) -
                        cy * (yvs[j + 1] - yvs[j]) + dts * p[j];
      const double ubar = xuw[j] + xue[j] + yus[j] + yus[j + 1];
      const double vbar = xvw[j] + xve[j] + yvs[j] + yvs[j + 1];
      const double un = hu[j] - cx * (xfue[j] - xfuw[j]) -
                        cy * (yfus[j + 1] - yfus[j]) - qdtb * ubar + cu[j];
      const double vn = hv[j] - cx * (xfve[j] - xfvw[j]) -
                        cy * (yfvs[j + 1] - yfvs[j]) - qdtb * vbar + cv[j];
      if (!(hn > kDepthFloor)) {
        if (!std::isfinite(hn))
          throw NumericalBlowupError("tank state is not finite", step_index_);
        throw DryCellError("water depth collapsed in a cell", step_index_);
      }
      h[j] = hn;
      hu[j] = un;
      hv[j] = vn;
    }
  }

  if (cfg_.dissipation_eps4 > 0.0) dissipate();
}

void Tank::dissipate() {
  const int nx = cfg_.nx, ny = cfg_.ny;
  const std::size_t ld = ld_;
  const double eps = cfg_.dissipation_eps4;

  refresh_ghosts();
  double* const fields[3] = {h_.data(), hu_.data(), hv_.data()};
  for (int f = 0; f < 3; ++f) {
    double* const q = fields[f];
    for (int i = 2; i <= nx + 1; ++i) {
      const std::size_t row = static_cast<std::size_t>(i) * ld;
      const double* qm2 = q + (row - 2 * ld);
      const double* qm1 = q + (row - ld);
      const double* q0 = q + row;
      const double* qp1 = q + (row + ld);
      const double* qp2 = q + (row + 2 * ld);
      double* __restrict d = &d4_[row];
      for (int j = 2; j <= ny + 1; ++j)
        d[j] = qm2[j] - 4.0 * qm1[j] + 6.0 * q0[j] - 4.0 * qp1[j] + qp2[j] +
               q0[j - 2] - 4.0 * q0[j - 1] + 6.0 * q0[j] - 4.0 * q0[j + 1] +
               q0[j + 2];
    }
    for (int i = 2; i <= nx + 1; ++i) {
      const std::size_t row = static_cast<std::size_t>(i) * ld;
      double* __restrict qq = q + row;
      const double* __restrict d = &d4_[row];
      for (int j = 2; j <= ny + 1; ++j) {
        const double qn = qq[j] - eps * d[j];
        if (f == 0 && !(qn > kDepthFloor)) {
          if (!std::isfinite(qn))
            throw NumericalBlowupError("tank state is not finite", step_index_);
          throw DryCellError("water depth collapsed in a cell", step_index_);
        }
        qq[j] = qn;
      }
    }
  }
}

void Tank::step(const Eigen::VectorXd& amplitudes) {
  require(amplitudes.size() == filters_->d,
          "amplitude count does not match the filter count");
  if (!amplitudes.allFinite())
    throw InvalidInputError("forcing amplitudes are not finite");

  const int nx = cfg_.nx, ny = cfg_.ny;
  // forcing field for this sampling interval
  for (int i = 0; i < nx; ++i) {
    double* __restrict prow = &p_[static_cast<std::size_t>(i + 2) * ld_ + 2];
    const std::size_t cell0 = static_cast<std::size_t>(i) * ny;
    for (int j = 0; j < ny; ++j) prow[j] = 0.0;
    for (int k = 0; k < filters_->d; ++k) {
      const double a = amplitudes(k);
      const double* __restrict f = filters_->filter(k) + cell0;
      for (int j = 0; j < ny; ++j) prow[j] += a * f[j];
    }
  }
  // mirrored one layer into the ghost frame so face averages at the walls
  // see wall-consistent values
  for (int j = 2; j <= ny + 1; ++j) {
    p_[ld_ + j] = p_[2 * static_cast<std::size_t>(ld_) + j];
    p_[static_cast<std::size_t>(nx + 2) * ld_ + j] =
        p_[static_cast<std::size_t>(nx + 1) * ld_ + j];
  }
  for (int i = 1; i <= nx + 2; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) * ld_;
    p_[row + 1] = p_[row + 2];
    p_[row + ny + 2] = p_[row + ny + 1];
  }

  check_courant();
  const int n = cfg_.resolved_substeps();
  const double dts = cfg_.dt / static_cast<double>(n);
  for (int s = 0; s < n; ++s) substep(dts);
  ++step_index_;
}

WaveField step(const WaveField& state, const Eigen::VectorXd& amplitudes,
               const InputFilterSet& filters, const TankConfig& cfg) {
  Tank tank(cfg, filters);
  tank.reset(state);
  const double t0 = state.t;
  tank.step(amplitudes);
  WaveField out = tank.field();
  out.t = t0 + cfg.dt;
  return out;
}

Eigen::MatrixXd drive_and_record(const WaveField& initial,
                                 const Trajectory& mixed,
                                 const InputFilterSet& filters,
                                 const ProbeSet& probes, const TankConfig& cfg,
                                 double t_dump, WaveField* final_state) {
  mixed.validate();
  require(std::abs(mixed.dt - cfg.dt) <= 1e-9 * cfg.dt,
          "mixed signal sample step does not match the tank dt");
  require(mixed.dims() == filters.d,
          "mixed signal channel count does not match the filter count");
  require(!probes.cells.empty(), "probe set is empty");
  require(t_dump >= 0.0, "t_dump must be nonnegative");
  const auto dump = static_cast<Eigen::Index>(std::llround(t_dump / cfg.dt));
  require(std::abs(t_dump - static_cast<double>(dump) * cfg.dt) <=
              1e-6 * cfg.dt,
          "t_dump must be a multiple of the tank dt");
  require(dump < mixed.n_samples(),
          "t_dump discards the entire mixed signal");

  Tank tank(cfg, filters);
  tank.reset(initial);

  const Eigen::Index n_keep = mixed.n_samples() - dump;
  Eigen::MatrixXd record(static_cast<Eigen::Index>(probes.cells.size()),
                         n_keep);
  for (Eigen::Index s = 0; s < mixed.n_samples(); ++s) {
    tank.step(mixed.values.col(s));
    if (s >= dump) {
      const Eigen::Index col = s - dump;
      for (std::size_t q = 0; q < probes.cells.size(); ++q)
        record(static_cast<Eigen::Index>(q), col) =
            tank.probe_height(probes.cells[q]);
    }
  }
  if (final_state != nullptr) *final_state = tank.field();
  return record;
}

void write_snapshot(const WaveField& f, const std::string& path) {
  f.validate();
  ByteWriter w;
  w.magic("SWE1");
  w.u32(static_cast<std::uint32_t>(f.nx));
  w.u32(static_cast<std::uint32_t>(f.ny));
  const std::size_t cells = static_cast<std::size_t>(f.nx) * f.ny;
  w.bytes(f.h.data(), cells * sizeof(double));
  w.bytes(f.u.data(), cells * sizeof(double));
  w.bytes(f.v.data(), cells * sizeof(double));
  write_file_atomic(path, w.data());
}

WaveField read_snapshot(const std::string& path) {
  const std::string data = read_file(path);
  ByteReader r(data, path);
  r.expect_magic("SWE1");
  WaveField f;
  f.nx = static_cast<int>(r.u32());
  f.ny = static_cast<int>(r.u32());
  require(f.nx > 0 && f.ny > 0 && f.nx <= 65536 && f.ny <= 65536,
          "snapshot grid size out of range in " + path);
  const std::size_t cells = static_cast<std::size_t>(f.nx) * f.ny;
  f.h.resize(cells);
  f.u.resize(cells);
  f.v.resize(cells);
  r.bytes(f.h.data(), cells * sizeof(double));
  r.bytes(f.u.data(), cells * sizeof(double));
  r.bytes(f.v.data(), cells * sizeof(double));
  if (!r.at_end()) throw InvalidInputError("trailing bytes in " + path);
  f.validate();
  return f;
}

}  // namespace css
