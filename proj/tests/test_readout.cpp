#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "css/readout.hpp"

using namespace css;
using doctest::Approx;

namespace {

// dense normal-equation solve by plain Gaussian elimination with partial
// pivoting, independent of any library solver; raw sums, alpha unscaled
Eigen::MatrixXd brute_force_ridge(const Eigen::MatrixXd& phi,
                                  const Eigen::MatrixXd& y, double alpha) {
  const int f = static_cast<int>(phi.rows());
  Eigen::MatrixXd a = phi * phi.transpose();
  for (int i = 0; i < f; ++i) a(i, i) += alpha;
  Eigen::MatrixXd rhs = phi * y.transpose();  // f x targets

  for (int col = 0; col < f; ++col) {
    int pivot = col;
    for (int r = col + 1; r < f; ++r)
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    a.row(col).swap(a.row(pivot));
    rhs.row(col).swap(rhs.row(pivot));
    REQUIRE(std::abs(a(col, col)) > 1e-14);
    for (int r = col + 1; r < f; ++r) {
      const double m = a(r, col) / a(col, col);
      a.row(r) -= m * a.row(col);
      rhs.row(r) -= m * rhs.row(col);
    }
  }
  for (int col = f - 1; col >= 0; --col) {
    rhs.row(col) /= a(col, col);
    for (int r = 0; r < col; ++r) rhs.row(r) -= a(r, col) * rhs.row(col);
  }
  return rhs.transpose();  // targets x f
}

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = 0.2 * rng.normal();
  return m;
}

// ridge loss with raw sums: ||Y - W Phi||_F^2 + alpha ||W||_F^2
double ridge_loss(const Eigen::MatrixXd& w, const Eigen::MatrixXd& phi,
                  const Eigen::MatrixXd& y, double alpha) {
  return (y - w * phi).squaredNorm() + alpha * w.squaredNorm();
}

}  // namespace

TEST_CASE("feature lift layout and spot values") {
  Eigen::VectorXd q(2);
  q << 0.5, -0.25;

  // three stacked blocks of length n_probes: [q; tanh(q^2); tanh(q^3)]
  const Eigen::VectorXd f = lift_features(q);
  REQUIRE(f.size() == 6);
  CHECK(f(0) == 0.5);
  CHECK(f(1) == -0.25);
  CHECK(f(2) == Approx(std::tanh(0.25)).epsilon(1e-15));
  CHECK(f(3) == Approx(std::tanh(0.0625)).epsilon(1e-15));
  CHECK(f(4) == Approx(std::tanh(0.125)).epsilon(1e-15));
  CHECK(f(5) == Approx(std::tanh(-0.015625)).epsilon(1e-15));
  CHECK(f(5) < 0.0);  // cubic block keeps the sign
  CHECK(feature_dim(2) == 6);
  CHECK(feature_dim(0) == 0);
  CHECK_THROWS_AS(feature_dim(-1), InvalidInputError);

  // zero surface lifts to exactly zero (no bias column)
  CHECK(lift_features(Eigen::VectorXd(Eigen::VectorXd::Zero(5))).norm() == 0.0);

  // large excursions saturate the nonlinear blocks but not the linear one
  Eigen::VectorXd big(1);
  big << 10.0;
  const Eigen::VectorXd fb = lift_features(big);
  CHECK(fb(0) == 10.0);
  CHECK(fb(1) == Approx(1.0).epsilon(1e-12));
  CHECK(fb(2) == Approx(1.0).epsilon(1e-12));
  CHECK(fb(1) <= 1.0);

  // batch form matches the vector form column by column
  Eigen::MatrixXd batch(2, 3);
  batch << 0.5, 0.0, -0.1, -0.25, 0.3, 0.7;
  const Eigen::MatrixXd fm = lift_features(batch);
  REQUIRE(fm.rows() == 6);
  REQUIRE(fm.cols() == 3);
  for (int s = 0; s < 3; ++s)
    CHECK((fm.col(s) - lift_features(batch.col(s).eval())).norm() == 0.0);
}

TEST_CASE("ridge solve matches a hand-rolled normal equation solver") {
  const int probes = 4, targets = 2, samples = 60;
  const Eigen::MatrixXd q = random_matrix(probes, samples, 11);
  const Eigen::MatrixXd y = random_matrix(targets, samples, 12);

  TrainAccumulator acc(probes, targets);
  acc.add_block(q, y);
  CHECK(acc.n_samples() == samples);

  for (double alpha : {1e-4, 1e-2, 1.0}) {
    const ReadoutModel model = acc.solve(alpha);
    const Eigen::MatrixXd expected =
        brute_force_ridge(lift_features(q), y, alpha);
    const double scale = 1.0 + expected.cwiseAbs().maxCoeff();
    CHECK((model.weights - expected).cwiseAbs().maxCoeff() < 1e-9 * scale);
  }
}

TEST_CASE("solution is a local minimum of the ridge loss") {
  const int probes = 3, targets = 2, samples = 50;
  const Eigen::MatrixXd q = random_matrix(probes, samples, 13);
  const Eigen::MatrixXd y = random_matrix(targets, samples, 14);
  const Eigen::MatrixXd phi = lift_features(q);

  TrainAccumulator acc(probes, targets);
  acc.add_block(q, y);
  const double alpha = 1e-3;
  const ReadoutModel model = acc.solve(alpha);

  const double base = ridge_loss(model.weights, phi, y, alpha);
  for (int r = 0; r < model.weights.rows(); ++r) {
    for (int c = 0; c < model.weights.cols(); ++c) {
      for (double delta : {1e-4, -1e-4}) {
        Eigen::MatrixXd w = model.weights;
        w(r, c) += delta;
        CHECK(ridge_loss(w, phi, y, alpha) + 1e-12 * (1.0 + base) >= base);
      }
    }
  }
}

TEST_CASE("noiseless linear targets are recovered exactly") {
  const int probes = 3, samples = 200;
  const Eigen::MatrixXd q = random_matrix(probes, samples, 21);
  const Eigen::MatrixXd w_true = random_matrix(2, feature_dim(probes), 22);
  const Eigen::MatrixXd y = w_true * lift_features(q);

  TrainAccumulator acc(probes, 2);
  acc.add_block(q, y);
  const ReadoutModel model = acc.solve(1e-10, {"a", "b"});

  CHECK((model.predict(q) - y).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(model.target_names == std::vector<std::string>{"a", "b"});

  // single-sample prediction agrees with the batch
  const Eigen::VectorXd one = model.predict(Eigen::VectorXd(q.col(7)));
  CHECK((one - model.predict(q).col(7)).norm() < 1e-12);
}

TEST_CASE("streaming one sample at a time equals one block") {
  const int probes = 5, targets = 3, samples = 40;
  const Eigen::MatrixXd q = random_matrix(probes, samples, 31);
  const Eigen::MatrixXd y = random_matrix(targets, samples, 32);

  TrainAccumulator one(probes, targets);
  TrainAccumulator block(probes, targets);
  for (int s = 0; s < samples; ++s)
    one.add(q.col(s), y.col(s));
  block.add_block(q, y);

  const Eigen::MatrixXd wa = one.solve(1e-4).weights;
  const Eigen::MatrixXd wb = block.solve(1e-4).weights;
  CHECK((wa - wb).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("prediction is linear in the weights and zero on a flat surface") {
  const int probes = 4;
  TrainAccumulator acc(probes, 2);
  acc.add_block(random_matrix(probes, 30, 71), random_matrix(2, 30, 72));
  ReadoutModel model = acc.solve(1e-3);

  const Eigen::VectorXd q = random_matrix(probes, 1, 73).col(0);
  ReadoutModel doubled = model;
  doubled.weights *= 2.0;
  CHECK((doubled.predict(q) - 2.0 * model.predict(q)).norm() < 1e-12);

  ReadoutModel sum = model;
  sum.weights += doubled.weights;
  CHECK((sum.predict(q) - model.predict(q) - doubled.predict(q)).norm() <
        1e-12);

  // a flat surface lifts to the zero feature vector, so ANY weights map it
  // to the zero estimate, exactly
  CHECK(model.predict(Eigen::VectorXd(Eigen::VectorXd::Zero(probes))).norm() == 0.0);
  ReadoutModel arbitrary = model;
  arbitrary.weights.setConstant(3.7);
  CHECK(arbitrary.predict(Eigen::VectorXd(Eigen::VectorXd::Zero(probes))).norm() == 0.0);
}

TEST_CASE("training commutes with a relabeling of the probes") {
  const int probes = 5, targets = 2, samples = 80;
  const Eigen::MatrixXd q = random_matrix(probes, samples, 81);
  const Eigen::MatrixXd y = random_matrix(targets, samples, 82);

  const std::vector<int> perm = {3, 0, 4, 1, 2};
  Eigen::MatrixXd qp(probes, samples);
  for (int i = 0; i < probes; ++i) qp.row(i) = q.row(perm[i]);

  // the lift permutes within each block, bitwise
  const Eigen::VectorXd f = lift_features(Eigen::VectorXd(q.col(0)));
  const Eigen::VectorXd fp = lift_features(Eigen::VectorXd(qp.col(0)));
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < probes; ++i)
      CHECK(fp(b * probes + i) == f(b * probes + perm[i]));

  TrainAccumulator acc(probes, targets), accp(probes, targets);
  acc.add_block(q, y);
  accp.add_block(qp, y);
  const ReadoutModel model = acc.solve(1e-3);
  const ReadoutModel modelp = accp.solve(1e-3);

  // predictions agree when the test probes are relabeled the same way
  const Eigen::MatrixXd t = random_matrix(probes, 20, 83);
  Eigen::MatrixXd tp(probes, 20);
  for (int i = 0; i < probes; ++i) tp.row(i) = t.row(perm[i]);
  const Eigen::MatrixXd pa = model.predict(t);
  const Eigen::MatrixXd pb = modelp.predict(tp);
  CHECK((pa - pb).cwiseAbs().maxCoeff() < 1e-8 * (1.0 + pa.cwiseAbs().maxCoeff()));
}

TEST_CASE("ridge shrinks weights and obeys the alpha bound") {
  const int probes = 4, targets = 2, samples = 80;
  const Eigen::MatrixXd q = random_matrix(probes, samples, 41);
  const Eigen::MatrixXd y = random_matrix(targets, samples, 42);
  TrainAccumulator acc(probes, targets);
  acc.add_block(q, y);

  const Eigen::MatrixXd cross = y * lift_features(q).transpose();  // raw sums
  double prev = 1e100;
  for (double alpha : {1e-2, 1.0, 100.0, 1e12}) {
    const ReadoutModel model = acc.solve(alpha);
    const double norm = model.weights.norm();
    CHECK(norm < prev);
    prev = norm;
    // || W || = || C (G + a I)^-1 || <= || C || / a since G is PSD
    CHECK(norm <= cross.norm() / alpha * (1.0 + 1e-12));
  }

  // at overwhelming ridge the solution collapses to C / alpha
  const ReadoutModel crushed = acc.solve(1e12);
  CHECK((crushed.weights - cross / 1e12).norm() < 1e-9 * cross.norm() / 1e12);
}

TEST_CASE("degenerate features without ridge raise RankDeficiencyError") {
  const int probes = 3, samples = 30;
  // constant zero probes lift to all-zero features, so the Gram matrix is
  // exactly zero and only the ridge can make the system definite
  const Eigen::MatrixXd q = Eigen::MatrixXd::Zero(probes, samples);
  const Eigen::MatrixXd y = random_matrix(1, samples, 51);
  TrainAccumulator acc(probes, 1);
  acc.add_block(q, y);
  CHECK_THROWS_AS(acc.solve(0.0), RankDeficiencyError);
  const ReadoutModel model = acc.solve(1e-8);  // positive ridge regularizes
  CHECK(model.weights.norm() == 0.0);  // cross terms vanish with the features
}

TEST_CASE("accumulator and model validate their inputs") {
  TrainAccumulator acc(3, 2);
  CHECK_THROWS_AS(acc.add(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(2)),
                  InvalidInputError);
  CHECK_THROWS_AS(acc.add(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(1)),
                  InvalidInputError);
  CHECK_THROWS_AS(acc.add_block(Eigen::MatrixXd::Zero(3, 5),
                                Eigen::MatrixXd::Zero(2, 6)),
                  InvalidInputError);
  CHECK_THROWS_AS(acc.solve(1e-3), InvalidInputError);  // no samples yet
  CHECK_THROWS_AS(acc.solve(-1.0), InvalidInputError);

  acc.add(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(2));
  const ReadoutModel model = acc.solve(1e-3);
  const Eigen::VectorXd wrong_width = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(model.predict(wrong_width), InvalidInputError);
}

TEST_CASE("mse means over entries and per channel") {
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 1, 2, 4, 6;
  CHECK(mse(a, b) == Approx((1.0 + 4.0) / 4.0).epsilon(1e-15));
  const Eigen::VectorXd per = mse_per_channel(a, b);
  CHECK(per(0) == 0.0);
  CHECK(per(1) == Approx(2.5).epsilon(1e-15));
  CHECK_THROWS_AS(mse(a, Eigen::MatrixXd::Zero(2, 3)), InvalidInputError);

  // a constant offset c costs exactly c^2 per channel
  const Eigen::MatrixXd t = random_matrix(3, 100, 52);
  Eigen::MatrixXd shifted = t;
  shifted.row(1).array() += 0.5;
  const Eigen::VectorXd po = mse_per_channel(shifted, t);
  CHECK(po(0) == 0.0);
  CHECK(po(1) == Approx(0.25).epsilon(1e-12));
  CHECK(po(2) == 0.0);

  // guessing zero against a channel normalized to unit population variance
  // costs exactly its variance, i.e. one
  Eigen::MatrixXd truth = random_matrix(1, 20000, 53);
  truth.array() -= truth.mean();
  truth /= std::sqrt(truth.squaredNorm() / truth.size());
  CHECK(mse(Eigen::MatrixXd::Zero(1, 20000), truth) ==
        Approx(1.0).epsilon(1e-12));
}

TEST_CASE("readout model file round trip") {
  const int probes = 3, samples = 50;
  const Eigen::MatrixXd q = random_matrix(probes, samples, 61);
  const Eigen::MatrixXd y = random_matrix(2, samples, 62);
  TrainAccumulator acc(probes, 2);
  acc.add_block(q, y);
  const ReadoutModel model = acc.solve(1e-5, {"lorenz:x", "thomas:x"});

  const std::string path = "/tmp/css_test_readout.rdt";
  write_readout(model, path);
  const ReadoutModel back = read_readout(path);
  CHECK(back.weights == model.weights);  // exact binary round trip
  CHECK(back.alpha == model.alpha);
  CHECK(back.n_probes == model.n_probes);
  CHECK(back.target_names == model.target_names);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(read_readout("/tmp/css_no_such_file.rdt"), Error);
}
