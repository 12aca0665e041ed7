#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "css/common.hpp"

namespace css {

/// Feature lift applied to one vector of probe heights q = h - 1: the three
/// stacked blocks [q; tanh(q^2); tanh(q^3)], each of length n_probes, with
/// the powers taken elementwise. The odd cubic term preserves sign
/// information, the even quadratic one supplies rectification; both stay
/// bounded when a probe rides a wave crest. No bias column: a zero surface
/// lifts to the zero feature vector.
int feature_dim(int n_probes);
Eigen::VectorXd lift_features(const Eigen::VectorXd& q);
/// Column-wise batch: probes x samples in, features x samples out.
Eigen::MatrixXd lift_features(const Eigen::MatrixXd& probe_rows);

/// Linear map from lifted features to target channels.
struct ReadoutModel {
  Eigen::MatrixXd weights;  // n_targets x n_features
  double alpha = 0.0;       // ridge strength the weights were solved with
  int n_probes = 0;
  std::vector<std::string> target_names;

  int n_targets() const { return static_cast<int>(weights.rows()); }
  void validate() const;
  Eigen::VectorXd predict(const Eigen::VectorXd& q) const;
  Eigen::MatrixXd predict(const Eigen::MatrixXd& probe_rows) const;
};

/// Accumulates the ridge normal equations one sample (or block) at a time,
/// so a training run never has to hold the full feature record in memory.
class TrainAccumulator {
 public:
  TrainAccumulator(int n_probes, int n_targets);

  void add(const Eigen::VectorXd& q, const Eigen::VectorXd& y);
  /// probe_rows: probes x samples; targets: n_targets x samples.
  void add_block(const Eigen::MatrixXd& probe_rows,
                 const Eigen::MatrixXd& targets);

  long n_samples() const { return n_samples_; }
  int n_probes() const { return n_probes_; }

  /// Solve (Phi Phi^T + alpha I) W^T = Phi Y^T by Cholesky. alpha is added
  /// unscaled to the raw (unnormalized) Gram diagonal -- the pinned
  /// convention, so quoting alpha alone reproduces a result. Throws
  /// RankDeficiencyError when the regularized system still fails to factor
  /// (possible only for alpha = 0).
  ReadoutModel solve(double alpha,
                     std::vector<std::string> target_names = {}) const;

 private:
  int n_probes_;
  int n_targets_;
  long n_samples_ = 0;
  Eigen::MatrixXd gram_;   // features x features, lower triangle maintained
  Eigen::MatrixXd cross_;  // n_targets x features
};

/// Mean of squared entry differences, the separation error metric.
double mse(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& truth);
/// Same, per row (channel).
Eigen::VectorXd mse_per_channel(const Eigen::MatrixXd& prediction,
                                const Eigen::MatrixXd& truth);

/// Model file, magic "RDT1": u32 n_probes, u32 n_targets, u32 reserved
/// (must be 0), f64 alpha, target names, weights row-major f64,
/// little-endian throughout.
void write_readout(const ReadoutModel& model, const std::string& path);
ReadoutModel read_readout(const std::string& path);

}  // namespace css
