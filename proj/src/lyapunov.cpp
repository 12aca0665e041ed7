#include "css/lyapunov.hpp"

#include <algorithm>
#include <cmath>

namespace css {

double kaplan_yorke(const std::vector<double>& exponents) {
  require(!exponents.empty(), "kaplan_yorke needs at least one exponent");
  for (std::size_t i = 1; i < exponents.size(); ++i)
    require(exponents[i] <= exponents[i - 1],
            "kaplan_yorke expects exponents sorted in descending order");
  if (exponents[0] < 0.0) return 0.0;

  double partial = 0.0;
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    const double next = partial + exponents[k];
    if (next < 0.0)
      return static_cast<double>(k) + partial / std::abs(exponents[k]);
    partial = next;
  }
  return static_cast<double>(exponents.size());
}

namespace {

struct Frame {
  Eigen::Vector3d x;
  Eigen::Matrix3d m;  // columns are tangent vectors
};

// One RK4 step of the joint system d/dt (x, M) = (f(x), J(x) M). The tangent
// stages reuse the state stage points so both stay consistent.
Frame joint_rk4_step(Attractor a, const Frame& s, double dt) {
  const Eigen::Vector3d k1 = eval_vector_field(a, s.x);
  const Eigen::Matrix3d g1 = jacobian(a, s.x) * s.m;

  const Eigen::Vector3d x2 = s.x + 0.5 * dt * k1;
  const Eigen::Vector3d k2 = eval_vector_field(a, x2);
  const Eigen::Matrix3d g2 = jacobian(a, x2) * (s.m + 0.5 * dt * g1);

  const Eigen::Vector3d x3 = s.x + 0.5 * dt * k2;
  const Eigen::Vector3d k3 = eval_vector_field(a, x3);
  const Eigen::Matrix3d g3 = jacobian(a, x3) * (s.m + 0.5 * dt * g2);

  const Eigen::Vector3d x4 = s.x + dt * k3;
  const Eigen::Vector3d k4 = eval_vector_field(a, x4);
  const Eigen::Matrix3d g4 = jacobian(a, x4) * (s.m + dt * g3);

  return {s.x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
          s.m + (dt / 6.0) * (g1 + 2.0 * g2 + 2.0 * g3 + g4)};
}

// QR with a positive-diagonal R; returns log |r_ii| and leaves q in m.
Eigen::Vector3d reorthonormalize(Eigen::Matrix3d& m) {
  Eigen::HouseholderQR<Eigen::Matrix3d> qr(m);
  Eigen::Matrix3d q = qr.householderQ();
  const Eigen::Matrix3d r = qr.matrixQR().triangularView<Eigen::Upper>();
  Eigen::Vector3d logs;
  for (int i = 0; i < 3; ++i) {
    const double d = r(i, i);
    if (d == 0.0 || !std::isfinite(d))
      throw NumericalBlowupError("tangent frame collapsed", 0);
    if (d < 0.0) q.col(i) = -q.col(i);
    logs(i) = std::log(std::abs(d));
  }
  m = q;
  return logs;
}

}  // namespace

LyapunovResult lyapunov_spectrum(Attractor a, const LyapunovConfig& cfg) {
  require(cfg.dt > 0 && cfg.qr_interval > 0 && cfg.total_time > 0 &&
              cfg.transient >= 0,
          "lyapunov config values must be positive");
  const long steps_per_qr = std::lround(cfg.qr_interval / cfg.dt);
  require(steps_per_qr > 0, "qr_interval shorter than dt");
  const long n_intervals = std::lround(cfg.total_time / cfg.qr_interval);
  require(n_intervals > 0, "total_time shorter than qr_interval");

  const AttractorSpec spec = attractor_spec(a);
  Frame s;
  s.x = advance(a, spec.default_initial_state, cfg.dt,
                std::lround(cfg.transient / cfg.dt));
  s.m = Eigen::Matrix3d::Identity();

  // Settle the tangent frame onto the local expanding directions before
  // accumulating, so the estimate does not carry the arbitrary initial frame.
  for (long k = 0; k < 100; ++k) {
    for (long i = 0; i < steps_per_qr; ++i) s = joint_rk4_step(a, s, cfg.dt);
    reorthonormalize(s.m);
  }

  Eigen::Vector3d sums = Eigen::Vector3d::Zero();
  for (long k = 0; k < n_intervals; ++k) {
    for (long i = 0; i < steps_per_qr; ++i) s = joint_rk4_step(a, s, cfg.dt);
    if (!s.x.allFinite() || s.x.cwiseAbs().maxCoeff() > 1e6)
      throw NumericalBlowupError(std::string(to_string(a)) +
                                     " diverged during spectrum run",
                                 k * steps_per_qr);
    sums += reorthonormalize(s.m);
  }

  const double span =
      static_cast<double>(n_intervals) * cfg.qr_interval;
  Eigen::Vector3d lam = sums / span;
  std::sort(lam.data(), lam.data() + 3, std::greater<double>());

  LyapunovResult out;
  out.exponents = lam;
  out.kaplan_yorke_dimension = kaplan_yorke({lam(0), lam(1), lam(2)});
  out.config = cfg;
  return out;
}

}  // namespace css
