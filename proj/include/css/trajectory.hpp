#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "css/common.hpp"

namespace css {

/// Per-channel affine frame recorded by normalize().
struct Normalization {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // population standard deviation (divide by N)
};

/// Uniformly sampled multichannel time series. Column j holds all channels at
/// sample j; row i is channel i over time.
struct Trajectory {
  double dt = 0.0;
  std::vector<std::string> channel_names;
  Eigen::MatrixXd values;  // channels x samples
  std::optional<Normalization> normalization;

  Eigen::Index dims() const { return values.rows(); }
  Eigen::Index n_samples() const { return values.cols(); }
  double duration() const { return dt * static_cast<double>(n_samples()); }

  /// Throws InvalidInputError on non-finite samples, dt <= 0, or a channel
  /// name count that does not match the row count.
  void validate() const;
};

/// Zero-mean unit-variance copy, per channel. DegenerateChannelError if any
/// channel is constant.
Trajectory normalize(const Trajectory& raw);

/// Samples [first, first + count), same channels and dt.
Trajectory slice(const Trajectory& t, Eigen::Index first, Eigen::Index count);

/// CSV with a leading time column and channel-name header; values are printed
/// with enough digits to round-trip exactly.
void write_csv(const Trajectory& t, const std::string& path);

/// Raw binary form (magic "TRJ1", little-endian), exact round trip.
void write_binary(const Trajectory& t, const std::string& path);
Trajectory read_binary_trajectory(const std::string& path);

}  // namespace css
