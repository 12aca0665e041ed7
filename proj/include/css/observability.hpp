#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "css/attractors.hpp"

namespace css {

// ---------------------------------------------------------------------------
// The pair of sources viewed as one autonomous system. The state is the
// direct sum [s_a; s_b] (dimension 6) and the only measured output is the
// channelwise sum y = s_a + s_b, so recovering the sources from y is a
// question about how much of the combined state that output determines.
// ---------------------------------------------------------------------------

using CombinedState = Eigen::VectorXd;  // [s_a; s_b], size 6

CombinedState make_combined(const Eigen::Vector3d& sa,
                            const Eigen::Vector3d& sb);

/// [s_b; s_a] — the permutation that exchanges the two sources.
CombinedState swap_halves(const CombinedState& x);

/// Block-stacked vector field [f_a(s_a); f_b(s_b)] of the pair system.
Eigen::VectorXd combined_field(Attractor a, Attractor b,
                               const CombinedState& x);

// ---------------------------------------------------------------------------
// Finite-difference machinery.
// ---------------------------------------------------------------------------

/// Weights w such that sum_j w_j f(offset_j * h) / h^m approximates the m-th
/// derivative of f at 0 (Fornberg's recurrence). Exact on polynomials of
/// degree < offsets.size(). Offsets are in units of the spacing h and must be
/// distinct; m must satisfy 0 <= m < offsets.size().
Eigen::VectorXd fd_weights(int m, const Eigen::VectorXd& offsets);

struct StackOptions {
  double step = 1e-3;  // node spacing h of the 9-point stencil, time units
  int substeps = 10;   // RK4 steps per node interval (the h/2 pass inherits)
};

/// The summed output y = s_a + s_b and its first k_max time derivatives along
/// the combined flow, evaluated at one state.
struct ObservabilityStack {
  int k_max = 0;
  Eigen::Matrix3Xd g;              // column k holds g_k = d^k y / dt^k
  Eigen::VectorXd error_estimate;  // per column; entry 0 is exactly 0
  double coarse_step = 0.0;        // node spacing of the coarse pass
  double fine_step = 0.0;          // node spacing of the reported pass
  // Richardson order used to combine the two passes, per derivative order
  // k = 1..4 (0 where unused). A 9-point centered stencil is exact through
  // degree 8 plus one parity order, so k = 1, 2 carry order 8 and k = 3, 4
  // carry order 6.
  std::array<int, 4> extrapolation_order{};

  double norm() const { return g.norm(); }  // Frobenius over the whole stack
};

/// Builds the stack by integrating both halves over a short symmetric window
/// (9 nodes at spacing h, RK4 substeps in between, backward and forward) and
/// applying centered differences at spacings h and h/2, Richardson-combined.
/// g_0 is the exact sum s_a + s_b. The error estimate per order is the
/// disagreement of the two spacings — conservative in every regime (stencil
/// truncation, integrator drift, roundoff). Throws PrecisionError when that
/// estimate exceeds 1% of the value's scale, which is the signature of a
/// roundoff-dominated step size; throws InvalidInputError for bad arguments
/// (k_max outside [0, 4], non-positive step, state dimension != 6).
ObservabilityStack derivative_stack(Attractor a, Attractor b,
                                    const CombinedState& x, int k_max,
                                    const StackOptions& opt = {});

// ---------------------------------------------------------------------------
// Diagnostics. When the two sources obey the SAME equations, exchanging them
// leaves y and every derivative of y unchanged, so no readout based on the
// mixture can tell which source is which: the stack map is provably not
// one-to-one. These checks measure that degeneracy numerically.
// ---------------------------------------------------------------------------

struct SwapOrderResidual {
  int k = 0;
  double residual = 0.0;  // || g_k(x) - g_k(Px) ||
  double scale = 0.0;     // || g_k(x) ||
  double ratio = 0.0;     // residual / scale; 0 when residual is 0
};

struct SwapSymmetryReport {
  int k_max = 0;
  double stack_norm = 0.0;     // || G(x) ||_F
  double residual_norm = 0.0;  // || G(x) - G(Px) ||_F
  double ratio = 0.0;          // residual_norm / stack_norm; 0 when both 0
  std::vector<SwapOrderResidual> per_order;  // k = 0 .. k_max
};

/// Compares the stack at x with the stack at the swapped state Px. For
/// identical systems (a == b) the two are equal in exact arithmetic and the
/// ratio only measures numerical residue; for distinct systems the ratio is
/// generically order one, quantifying how strongly the pair breaks the swap
/// degeneracy.
SwapSymmetryReport swap_symmetry_check(Attractor a, Attractor b,
                                       const CombinedState& x, int k_max,
                                       const StackOptions& opt = {});

/// Identical-systems form: swap_symmetry_check(s, s, x, k_max).
SwapSymmetryReport swap_symmetry_check(Attractor s, const CombinedState& x,
                                       int k_max, const StackOptions& opt = {});

/// || G(x) - G(x') ||_F / || x - x' || for one pair of combined states — a
/// distinguishability modulus: near zero means two different internal states
/// produce (locally) the same measured output history. Returns nullopt for
/// the degenerate pair x' == x.
std::optional<double> collision_ratio(Attractor a, Attractor b,
                                      const CombinedState& x,
                                      const CombinedState& xp, int k_max,
                                      const StackOptions& opt = {});

struct UnivalencePair {
  double separation = 0.0;      // || x - x' ||
  double stack_distance = 0.0;  // || G(x) - G(x') ||_F
  double ratio = 0.0;           // stack_distance / separation
  bool swapped = false;         // x' is Px rather than an independent draw
};

struct UnivalenceStats {
  long n_requested = 0;
  long n_evaluated = 0;   // degenerate pairs excluded
  long n_degenerate = 0;  // pairs with x' == x, filtered out
  double threshold = 0.0;
  long n_near_collisions = 0;          // ratio below threshold
  double near_collision_fraction = 0.0;  // over evaluated pairs
  double min_ratio = 0.0;
  std::vector<UnivalencePair> pairs;  // one record per evaluated pair
};

/// Samples n_samples pairs (x, x') of combined states from on-attractor
/// trajectories and reports the distribution of collision ratios. When
/// a == b, every sampled x also contributes the pair (x, Px), which the swap
/// symmetry forces to collide — so identical systems always show a nonzero
/// near-collision fraction, while distinct pairs generically show none.
UnivalenceStats univalence_probe(Attractor a, Attractor b, long n_samples,
                                 int k_max, std::uint64_t seed,
                                 double threshold = 1e-4,
                                 const StackOptions& opt = {});

/// n states drawn without replacement from a long post-transient trajectory
/// (coarse stride, randomized order). extra_transient extends the discarded
/// lead-in, used to decorrelate two copies of the same system.
Eigen::Matrix3Xd sample_attractor_states(Attractor a, long n,
                                         std::uint64_t seed,
                                         double extra_transient = 0.0);

}  // namespace css
