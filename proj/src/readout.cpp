#include "css/readout.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace css {

namespace {

// Writes the lifted features of one probe vector into out[0 .. 3p), laid out
// as three contiguous blocks: linear, tanh-square, tanh-cube.
void lift_into(const double* q, int n_probes, double* out) {
  for (int i = 0; i < n_probes; ++i) {
    const double v = q[i];
    const double v2 = v * v;
    out[i] = v;
    out[n_probes + i] = std::tanh(v2);
    out[2 * n_probes + i] = std::tanh(v2 * v);
  }
}

}  // namespace

int feature_dim(int n_probes) {
  require(n_probes >= 0, "feature_dim: n_probes must be non-negative");
  return 3 * n_probes;
}

Eigen::VectorXd lift_features(const Eigen::VectorXd& q) {
  const int p = static_cast<int>(q.size());
  Eigen::VectorXd out(feature_dim(p));
  lift_into(q.data(), p, out.data());
  return out;
}

Eigen::MatrixXd lift_features(const Eigen::MatrixXd& probe_rows) {
  const int p = static_cast<int>(probe_rows.rows());
  const int n = static_cast<int>(probe_rows.cols());
  Eigen::MatrixXd out(feature_dim(p), n);
  for (int j = 0; j < n; ++j) {
    lift_into(probe_rows.col(j).data(), p, out.col(j).data());
  }
  return out;
}

void ReadoutModel::validate() const {
  require(n_probes >= 0, "readout model: negative probe count");
  require(weights.cols() == feature_dim(n_probes),
          "readout model: weight width does not match probe count");
  require(weights.allFinite(), "readout model: non-finite weights");
  require(std::isfinite(alpha) && alpha >= 0.0,
          "readout model: alpha must be finite and non-negative");
  if (!target_names.empty()) {
    require(static_cast<int>(target_names.size()) == n_targets(),
            "readout model: target name count does not match weight rows");
  }
}

Eigen::VectorXd ReadoutModel::predict(const Eigen::VectorXd& q) const {
  require(static_cast<int>(q.size()) == n_probes,
          "predict: probe vector length does not match model");
  return weights * lift_features(q);
}

Eigen::MatrixXd ReadoutModel::predict(const Eigen::MatrixXd& probe_rows) const {
  require(static_cast<int>(probe_rows.rows()) == n_probes,
          "predict: probe row count does not match model");
  return weights * lift_features(probe_rows);
}

TrainAccumulator::TrainAccumulator(int n_probes, int n_targets)
    : n_probes_(n_probes), n_targets_(n_targets) {
  require(n_probes >= 0, "train accumulator: negative probe count");
  require(n_targets >= 1, "train accumulator: need at least one target");
  const int d = feature_dim(n_probes);
  gram_ = Eigen::MatrixXd::Zero(d, d);
  cross_ = Eigen::MatrixXd::Zero(n_targets, d);
}

void TrainAccumulator::add(const Eigen::VectorXd& q, const Eigen::VectorXd& y) {
  require(static_cast<int>(q.size()) == n_probes_,
          "train accumulator: probe vector length mismatch");
  require(static_cast<int>(y.size()) == n_targets_,
          "train accumulator: target vector length mismatch");
  require(q.allFinite() && y.allFinite(),
          "train accumulator: non-finite sample");
  const Eigen::VectorXd phi = lift_features(q);
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(phi);
  cross_ += y * phi.transpose();
  ++n_samples_;
}

void TrainAccumulator::add_block(const Eigen::MatrixXd& probe_rows,
                                 const Eigen::MatrixXd& targets) {
  require(static_cast<int>(probe_rows.rows()) == n_probes_,
          "train accumulator: probe row count mismatch");
  require(static_cast<int>(targets.rows()) == n_targets_,
          "train accumulator: target row count mismatch");
  require(probe_rows.cols() == targets.cols(),
          "train accumulator: sample count mismatch between probes and targets");
  require(probe_rows.allFinite() && targets.allFinite(),
          "train accumulator: non-finite block");
  const Eigen::MatrixXd phi = lift_features(probe_rows);
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(phi);
  cross_ += targets * phi.transpose();
  n_samples_ += probe_rows.cols();
}

ReadoutModel TrainAccumulator::solve(double alpha,
                                     std::vector<std::string> names) const {
  require(std::isfinite(alpha) && alpha >= 0.0,
          "solve: alpha must be finite and non-negative");
  require(n_samples_ > 0, "solve: no samples accumulated");
  if (!names.empty()) {
    require(static_cast<int>(names.size()) == n_targets_,
            "solve: target name count mismatch");
  }

  const int d = feature_dim(n_probes_);
  ReadoutModel model;
  model.alpha = alpha;
  model.n_probes = n_probes_;
  model.target_names = std::move(names);

  if (d == 0) {
    model.weights = Eigen::MatrixXd::Zero(n_targets_, 0);
    return model;
  }

  Eigen::MatrixXd sys(d, d);
  sys.triangularView<Eigen::Lower>() = gram_;
  sys.diagonal().array() += alpha;
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>, Eigen::Lower> llt(sys);
  if (llt.info() != Eigen::Success) {
    throw RankDeficiencyError(
        "solve: regularized Gram matrix is not positive definite; "
        "increase alpha or add training samples");
  }
  model.weights = llt.solve(cross_.transpose()).transpose();
  require(model.weights.allFinite(), "solve: non-finite weights");
  return model;
}

double mse(const Eigen::MatrixXd& prediction, const Eigen::MatrixXd& truth) {
  require(prediction.rows() == truth.rows() &&
              prediction.cols() == truth.cols(),
          "mse: shape mismatch");
  require(prediction.size() > 0, "mse: empty input");
  return (prediction - truth).squaredNorm() /
         static_cast<double>(prediction.size());
}

Eigen::VectorXd mse_per_channel(const Eigen::MatrixXd& prediction,
                                const Eigen::MatrixXd& truth) {
  require(prediction.rows() == truth.rows() &&
              prediction.cols() == truth.cols(),
          "mse_per_channel: shape mismatch");
  require(prediction.cols() > 0, "mse_per_channel: no samples");
  return (prediction - truth).rowwise().squaredNorm() /
         static_cast<double>(prediction.cols());
}

void write_readout(const ReadoutModel& model, const std::string& path) {
  model.validate();
  ByteWriter w;
  w.magic("RDT1");
  w.u32(static_cast<std::uint32_t>(model.n_probes));
  w.u32(static_cast<std::uint32_t>(model.n_targets()));
  w.u32(0);  // reserved
  w.f64(model.alpha);
  w.u32(static_cast<std::uint32_t>(model.target_names.size()));
  for (const auto& name : model.target_names) w.str(name);
  for (int r = 0; r < model.weights.rows(); ++r) {
    for (int c = 0; c < model.weights.cols(); ++c) {
      w.f64(model.weights(r, c));
    }
  }
  write_file_atomic(path, w.data());
}

ReadoutModel read_readout(const std::string& path) {
  const std::string blob = read_file(path);
  ByteReader r(blob, path);
  r.expect_magic("RDT1");
  ReadoutModel model;
  model.n_probes = static_cast<int>(r.u32());
  const int n_targets = static_cast<int>(r.u32());
  const std::uint32_t reserved = r.u32();
  require(reserved == 0, "readout file: reserved field must be zero");
  model.alpha = r.f64();
  const std::uint32_t n_names = r.u32();
  require(n_names == 0 || static_cast<int>(n_names) == n_targets,
          "readout file: target name count mismatch");
  for (std::uint32_t i = 0; i < n_names; ++i) {
    model.target_names.push_back(r.str());
  }
  model.weights.resize(n_targets, feature_dim(model.n_probes));
  for (int rr = 0; rr < model.weights.rows(); ++rr) {
    for (int c = 0; c < model.weights.cols(); ++c) {
      model.weights(rr, c) = r.f64();
    }
  }
  require(r.at_end(), "readout file: trailing bytes");
  model.validate();
  return model;
}

}  // namespace css
