#include "css/observability.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "css/common.hpp"

namespace css {

namespace {

void check_combined(const CombinedState& x) {
  require(x.size() == 6, "combined state must have dimension 6 (two 3-D halves)");
  require(x.allFinite(), "combined state must be finite");
}

double ratio_of(double residual, double scale) {
  if (residual == 0.0) return 0.0;
  if (scale == 0.0) return std::numeric_limits<double>::infinity();
  return residual / scale;
}

}  // namespace

CombinedState make_combined(const Eigen::Vector3d& sa,
                            const Eigen::Vector3d& sb) {
  CombinedState x(6);
  x << sa, sb;
  return x;
}

CombinedState swap_halves(const CombinedState& x) {
  check_combined(x);
  CombinedState p(6);
  p << x.tail<3>(), x.head<3>();
  return p;
}

Eigen::VectorXd combined_field(Attractor a, Attractor b,
                               const CombinedState& x) {
  check_combined(x);
  Eigen::VectorXd f(6);
  f.head<3>() = eval_vector_field(a, x.head<3>());
  f.tail<3>() = eval_vector_field(b, x.tail<3>());
  return f;
}

Eigen::VectorXd fd_weights(int m, const Eigen::VectorXd& offsets) {
  const int n = static_cast<int>(offsets.size());
  require(n >= 1, "fd_weights needs at least one offset");
  require(m >= 0 && m < n, "fd_weights needs 0 <= m < offsets.size()");
  require(offsets.allFinite(), "fd_weights offsets must be finite");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      require(offsets(i) != offsets(j), "fd_weights offsets must be distinct");

  // Fornberg's recurrence for the weights of all derivatives up to order m at
  // the point 0, on arbitrary distinct nodes.
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, m + 1);
  double c1 = 1.0;
  double c4 = offsets(0);
  c(0, 0) = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = offsets(i);
    for (int j = 0; j < i; ++j) {
      const double c3 = offsets(i) - offsets(j);
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k)
        c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c.col(m);
}

namespace {

constexpr int kMaxOrderCap = 4;
// A 9-point centered stencil is exact through polynomial degree 8 and gains
// one parity order when the stencil symmetry annihilates degree 9, so the
// truncation order is 8 for k = 1, 2 and 6 for k = 3, 4.
constexpr std::array<int, 4> kRichardsonOrder = {8, 8, 6, 6};

Eigen::Vector3d advance_window(Attractor a, Eigen::Vector3d x, double dt,
                               int n) {
  for (int i = 0; i < n; ++i) x = rk4_step(a, x, dt);
  return x;
}

// Output differences y(j h) - y(0) on the 9 window nodes j = -4..4, where
// y(t) = s_a(t) + s_b(t). Centering at the j = 0 node costs nothing (every
// k >= 1 stencil annihilates constants) and removes the large common value
// before the cancellation-prone weighted sum; at an exact fixed point the
// differences are bitwise zero, so every derivative comes out exactly zero.
std::array<Eigen::Vector3d, 9> window_deltas(Attractor a, Attractor b,
                                             const Eigen::Vector3d& sa,
                                             const Eigen::Vector3d& sb,
                                             double h, int substeps) {
  std::array<Eigen::Vector3d, 9> d;
  const Eigen::Vector3d y0 = sa + sb;
  d[4].setZero();
  const double dt = h / substeps;
  Eigen::Vector3d pa = sa, pb = sb;
  for (int j = 1; j <= 4; ++j) {
    pa = advance_window(a, pa, dt, substeps);
    pb = advance_window(b, pb, dt, substeps);
    d[4 + j] = (pa + pb) - y0;
  }
  pa = sa;
  pb = sb;
  for (int j = 1; j <= 4; ++j) {
    pa = advance_window(a, pa, -dt, substeps);
    pb = advance_window(b, pb, -dt, substeps);
    d[4 - j] = (pa + pb) - y0;
  }
  for (const auto& v : d)
    require(v.allFinite(), "derivative window left the finite range");
  return d;
}

Eigen::Matrix3Xd apply_stencils(const std::array<Eigen::Vector3d, 9>& d,
                                double h, int k_max,
                                const Eigen::MatrixXd& w) {
  Eigen::Matrix3Xd out(3, k_max);
  for (int k = 1; k <= k_max; ++k) {
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (int j = 0; j < 9; ++j) acc += w(j, k - 1) * d[j];
    out.col(k - 1) = acc / std::pow(h, k);
  }
  return out;
}

}  // namespace

ObservabilityStack derivative_stack(Attractor a, Attractor b,
                                    const CombinedState& x, int k_max,
                                    const StackOptions& opt) {
  check_combined(x);
  require(k_max >= 0 && k_max <= kMaxOrderCap,
          "k_max must be in [0, 4]: higher time derivatives drown in roundoff "
          "at 64-bit precision");
  require(std::isfinite(opt.step) && opt.step > 0.0,
          "stack step must be positive and finite");
  require(opt.substeps >= 1 && opt.substeps <= 1000000,
          "stack substeps must be in [1, 1e6]");

  const Eigen::Vector3d sa = x.head<3>();
  const Eigen::Vector3d sb = x.tail<3>();

  ObservabilityStack st;
  st.k_max = k_max;
  st.coarse_step = opt.step;
  st.fine_step = 0.5 * opt.step;
  st.g.resize(3, k_max + 1);
  st.error_estimate = Eigen::VectorXd::Zero(k_max + 1);
  st.g.col(0) = sa + sb;  // the measured output itself, no differencing
  if (k_max == 0) return st;

  Eigen::VectorXd offs(9);
  for (int j = 0; j < 9; ++j) offs(j) = j - 4;
  Eigen::MatrixXd w(9, k_max);
  for (int k = 1; k <= k_max; ++k) w.col(k - 1) = fd_weights(k, offs);

  // Two passes at spacings h and h/2; the substep count per interval is
  // shared, so the fine pass also halves the RK4 step.
  const auto dc = window_deltas(a, b, sa, sb, st.coarse_step, opt.substeps);
  const auto df = window_deltas(a, b, sa, sb, st.fine_step, opt.substeps);
  const Eigen::Matrix3Xd coarse = apply_stencils(dc, st.coarse_step, k_max, w);
  const Eigen::Matrix3Xd fine = apply_stencils(df, st.fine_step, k_max, w);

  // Node-value roundoff amplitude: each window sum rounds at the ulp of the
  // output magnitude, independently per node -- except when a node is
  // bitwise identical to the center (exact fixed point), where the common
  // rounding cancels and the differences carry no error at all.
  const double eps = std::numeric_limits<double>::epsilon();
  double spread = 0.0, magnitude = st.g.col(0).cwiseAbs().maxCoeff();
  for (const auto& v : df) spread = std::max(spread, v.cwiseAbs().maxCoeff());
  for (const auto& v : dc) spread = std::max(spread, v.cwiseAbs().maxCoeff());
  const double ulp_amp = (spread == 0.0) ? 0.0 : eps * (magnitude + spread);

  for (int k = 1; k <= k_max; ++k) {
    const double twop = std::exp2(kRichardsonOrder[k - 1]);
    const Eigen::Vector3d r =
        (twop * fine.col(k - 1) - coarse.col(k - 1)) / (twop - 1.0);
    st.g.col(k) = r;
    st.extrapolation_order[k - 1] = kRichardsonOrder[k - 1];
    // Error estimate = 4x the two-spacing disagreement (covers stencil
    // truncation and the integrator's h^4 drift, which shrinks slower than
    // the stencil's h^p and so must not be divided by 2^p - 1) plus a
    // deterministic bound on stencil-amplified node roundoff, which the
    // disagreement alone under-measures because both passes fluctuate.
    const double wsum = w.col(k - 1).cwiseAbs().sum();
    const double roundoff =
        wsum * ulp_amp *
        (twop / std::pow(st.fine_step, k) + 1.0 / std::pow(st.coarse_step, k)) /
        (twop - 1.0);
    const double est = 4.0 * (fine.col(k - 1) - coarse.col(k - 1)).norm() +
                       roundoff + 1e-15 * (1.0 + r.norm());
    st.error_estimate(k) = est;
    const double gate = 1e-2 * (1.0 + r.norm());
    if (!std::isfinite(est) || est > gate)
      throw PrecisionError(
          "derivative stack is roundoff-dominated at order " +
              std::to_string(k) + "; increase the step",
          est);
  }
  return st;
}

SwapSymmetryReport swap_symmetry_check(Attractor a, Attractor b,
                                       const CombinedState& x, int k_max,
                                       const StackOptions& opt) {
  const ObservabilityStack s1 = derivative_stack(a, b, x, k_max, opt);
  const ObservabilityStack s2 =
      derivative_stack(a, b, swap_halves(x), k_max, opt);

  SwapSymmetryReport rep;
  rep.k_max = k_max;
  rep.stack_norm = s1.g.norm();
  rep.residual_norm = (s1.g - s2.g).norm();
  rep.ratio = ratio_of(rep.residual_norm, rep.stack_norm);
  rep.per_order.reserve(static_cast<std::size_t>(k_max) + 1);
  for (int k = 0; k <= k_max; ++k) {
    SwapOrderResidual r;
    r.k = k;
    r.residual = (s1.g.col(k) - s2.g.col(k)).norm();
    r.scale = s1.g.col(k).norm();
    r.ratio = ratio_of(r.residual, r.scale);
    rep.per_order.push_back(r);
  }
  return rep;
}

SwapSymmetryReport swap_symmetry_check(Attractor s, const CombinedState& x,
                                       int k_max, const StackOptions& opt) {
  return swap_symmetry_check(s, s, x, k_max, opt);
}

std::optional<double> collision_ratio(Attractor a, Attractor b,
                                      const CombinedState& x,
                                      const CombinedState& xp, int k_max,
                                      const StackOptions& opt) {
  check_combined(x);
  check_combined(xp);
  const double dx = (x - xp).norm();
  if (dx == 0.0) return std::nullopt;
  const ObservabilityStack g1 = derivative_stack(a, b, x, k_max, opt);
  const ObservabilityStack g2 = derivative_stack(a, b, xp, k_max, opt);
  return (g1.g - g2.g).norm() / dx;
}

UnivalenceStats univalence_probe(Attractor a, Attractor b, long n_samples,
                                 int k_max, std::uint64_t seed,
                                 double threshold, const StackOptions& opt) {
  require(n_samples >= 1, "univalence_probe needs n_samples >= 1");
  require(std::isfinite(threshold) && threshold > 0.0,
          "univalence_probe threshold must be positive");

  const bool twins = (a == b);
  // An extra lead-in on side b decorrelates the halves when both follow the
  // same equations; without it identical indices would give degenerate pairs.
  const Eigen::Matrix3Xd sa = sample_attractor_states(
      a, 2 * n_samples, derive_seed(seed, "univalence/side-a"));
  const Eigen::Matrix3Xd sb = sample_attractor_states(
      b, 2 * n_samples, derive_seed(seed, "univalence/side-b"),
      twins ? 30.0 : 0.0);

  UnivalenceStats st;
  st.n_requested = twins ? 2 * n_samples : n_samples;
  st.threshold = threshold;
  st.pairs.reserve(static_cast<std::size_t>(st.n_requested));

  const auto stack_of = [&](const CombinedState& x) {
    return derivative_stack(a, b, x, k_max, opt);
  };
  const auto add_pair = [&](const CombinedState& x,
                            const ObservabilityStack& gx,
                            const CombinedState& xp, bool swapped) {
    const double dx = (x - xp).norm();
    if (dx == 0.0) {
      ++st.n_degenerate;
      return;
    }
    UnivalencePair p;
    p.separation = dx;
    p.stack_distance = (gx.g - stack_of(xp).g).norm();
    p.ratio = p.stack_distance / dx;
    p.swapped = swapped;
    st.pairs.push_back(p);
  };

  for (long i = 0; i < n_samples; ++i) {
    const CombinedState x = make_combined(sa.col(2 * i), sb.col(2 * i));
    const ObservabilityStack gx = stack_of(x);
    add_pair(x, gx, make_combined(sa.col(2 * i + 1), sb.col(2 * i + 1)),
             false);
    if (twins) add_pair(x, gx, swap_halves(x), true);
  }

  st.n_evaluated = static_cast<long>(st.pairs.size());
  st.min_ratio = 0.0;
  if (st.n_evaluated > 0) {
    st.min_ratio = std::numeric_limits<double>::infinity();
    for (const UnivalencePair& p : st.pairs) {
      st.min_ratio = std::min(st.min_ratio, p.ratio);
      if (p.ratio < threshold) ++st.n_near_collisions;
    }
    st.near_collision_fraction =
        static_cast<double>(st.n_near_collisions) /
        static_cast<double>(st.n_evaluated);
  }
  return st;
}

Eigen::Matrix3Xd sample_attractor_states(Attractor a, long n,
                                         std::uint64_t seed,
                                         double extra_transient) {
  require(n > 0, "sample_attractor_states needs n > 0");
  require(std::isfinite(extra_transient) && extra_transient >= 0.0,
          "extra_transient must be nonnegative and finite");

  const AttractorSpec spec = attractor_spec(a);
  const double dt = spec.integration_dt;
  const long stride = std::lround(0.25 / dt);  // coarse spacing, time units
  const long pool = std::max<long>(4 * n, 400);
  const long lead =
      std::lround((spec.default_transient + extra_transient) / dt);

  const Eigen::Vector3d x0 = advance(a, spec.default_initial_state, dt, lead);
  const Trajectory traj = integrate_rk4(a, x0, dt, pool * stride, stride);

  Rng rng(seed);
  const auto idx = rng.sample_without_replacement(
      static_cast<std::uint64_t>(traj.n_samples()),
      static_cast<std::uint64_t>(n));

  Eigen::Matrix3Xd out(3, n);
  for (long i = 0; i < n; ++i)
    out.col(i) = traj.values.col(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace css
