#include <cmath>
#include <limits>

#include "dlds/continuous.hpp"
#include "dlds/errors.hpp"
#include "dlds/linalg.hpp"
#include "dlds/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using dlds::ContinuousModel;
using dlds::CtTrainConfig;
using dlds::Matrix;
using dlds::Rng;
using dlds::Trajectory;
using dlds::Vector;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.gaussian();
  return m;
}

Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = scale * rng.gaussian();
  return v;
}

ContinuousModel random_ct_model(Eigen::Index p, Eigen::Index L, Rng& rng, double scale = 0.3) {
  ContinuousModel model;
  for (Eigen::Index l = 0; l < L; ++l) model.G.push_back(random_matrix(p, p, rng, scale));
  return model;
}

Matrix planar_rotation_generator() {
  Matrix g(2, 2);
  g << 0.0, -1.0, 1.0, 0.0;
  return g;
}

double pair_objective(const ContinuousModel& model, const Vector& x_t, const Vector& x_next,
                      const Vector& c, double lambda_c) {
  Matrix a = Matrix::Zero(model.dim(), model.dim());
  for (Eigen::Index l = 0; l < c.size(); ++l) a += c[l] * model.G[static_cast<size_t>(l)];
  return (x_next - dlds::expm(a) * x_t).squaredNorm() + lambda_c * c.lpNorm<1>();
}

}  // namespace

TEST_CASE("propagate: zero coefficients transport nothing") {
  Rng rng(71);
  auto model = random_ct_model(3, 2, rng);
  const Vector x = random_vector(3, rng);
  const Vector moved = dlds::propagate(model, x, Vector::Zero(2), 1.0);
  CHECK((moved - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("propagate: planar rotation matches the closed form and a Taylor oracle") {
  ContinuousModel model;
  model.G.push_back(planar_rotation_generator());
  Vector x(2);
  x << 1.0, 0.0;
  Vector c(1);
  c << 0.7;

  const Vector got = dlds::propagate(model, x, c, 1.0);
  CHECK(std::abs(got[0] - std::cos(0.7)) < 1e-12);
  CHECK(std::abs(got[1] - std::sin(0.7)) < 1e-12);

  const Matrix taylor = oracle::expm_taylor(0.7 * model.G[0], 40);
  CHECK((got - taylor * x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("propagate: semigroup in the horizon and coefficient/horizon rescaling") {
  Rng rng(72);
  auto model = random_ct_model(3, 2, rng);
  const Vector x = random_vector(3, rng);
  const Vector c = random_vector(2, rng, 0.5);

  const Vector whole = dlds::propagate(model, x, c, 0.9);
  const Vector split = dlds::propagate(model, dlds::propagate(model, x, c, 0.4), c, 0.5);
  CHECK((whole - split).cwiseAbs().maxCoeff() < 1e-8);

  const Vector scaled_c = dlds::propagate(model, x, 2.0 * c, 0.45);
  CHECK((whole - scaled_c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("propagate rejects mismatched shapes and non-finite inputs") {
  Rng rng(73);
  auto model = random_ct_model(3, 2, rng);
  CHECK_THROWS_AS(dlds::propagate(model, Vector::Zero(2), Vector::Zero(2), 1.0),
                  dlds::dimension_error);
  CHECK_THROWS_AS(dlds::propagate(model, Vector::Zero(3), Vector::Zero(1), 1.0),
                  dlds::dimension_error);
  Vector bad = Vector::Zero(3);
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(dlds::propagate(model, bad, Vector::Zero(2), 1.0), dlds::domain_error);
}

TEST_CASE("ct_loss: exact paths, identity transport, and a Taylor recomputation") {
  Rng rng(74);
  auto model = random_ct_model(3, 2, rng);

  // path generated through the same transport arithmetic -> zero loss
  Trajectory traj;
  traj.samples.resize(5, 3);
  Matrix cpath = random_matrix(4, 2, rng, 0.4);
  traj.samples.row(0) = random_vector(3, rng).transpose();
  for (int t = 0; t < 4; ++t) {
    const Vector next =
        dlds::propagate(model, traj.samples.row(t).transpose(), cpath.row(t).transpose(), 1.0);
    traj.samples.row(t + 1) = next.transpose();
  }
  CHECK(dlds::ct_loss(model, traj, cpath, 0.0, 0.0) <= 1e-24);

  // zero coefficients: the loss is the sum of squared increments
  const Matrix zero_c = Matrix::Zero(4, 2);
  double want = 0.0;
  for (int t = 0; t < 4; ++t)
    want += (traj.samples.row(t + 1) - traj.samples.row(t)).squaredNorm();
  CHECK(std::abs(dlds::ct_loss(model, traj, zero_c, 0.0, 0.0) - want) < 1e-12);

  // random everything: recompute with an independent exponential
  double oracle_loss = 0.0;
  const Matrix rnd_c = random_matrix(4, 2, rng, 0.3);
  for (int t = 0; t < 4; ++t) {
    Matrix a = Matrix::Zero(3, 3);
    for (int l = 0; l < 2; ++l) a += rnd_c(t, l) * model.G[static_cast<size_t>(l)];
    const Vector r = traj.samples.row(t + 1).transpose() -
                     oracle::expm_taylor(a, 60) * traj.samples.row(t).transpose();
    oracle_loss += r.squaredNorm();
  }
  oracle_loss += 0.05 * rnd_c.cwiseAbs().sum();
  for (const auto& g : model.G) oracle_loss += 0.2 * g.squaredNorm();
  CHECK(std::abs(dlds::ct_loss(model, traj, rnd_c, 0.05, 0.2) - oracle_loss) < 1e-10);

  CHECK_THROWS_AS(dlds::ct_loss(model, traj, rnd_c, -0.1, 0.0), dlds::domain_error);
  CHECK_THROWS_AS(dlds::ct_loss(model, traj, Matrix::Zero(3, 2), 0.0, 0.0),
                  dlds::dimension_error);
}

TEST_CASE("infer_c_step: one unthresholded iteration exposes the analytic gradient") {
  Rng rng(75);
  auto model = random_ct_model(3, 2, rng);
  const Vector x = random_vector(3, rng);
  const Vector xn = random_vector(3, rng);
  const Vector c0 = random_vector(2, rng, 0.3);

  CtTrainConfig cfg;
  cfg.lambda_c = 0.0;
  cfg.eta_c = 1e-4;
  cfg.inner_c_iters = 1;
  const Vector c1 = dlds::infer_c_step(model, x, xn, c0, cfg);
  const Vector analytic = (c0 - c1) / cfg.eta_c;

  const auto loss = [&](const Vector& c) {
    Matrix a = Matrix::Zero(3, 3);
    for (Eigen::Index l = 0; l < 2; ++l) a += c[l] * model.G[static_cast<size_t>(l)];
    return (xn - dlds::expm(a) * x).squaredNorm();
  };
  const Vector fd = oracle::numeric_gradient(loss, c0, 1e-6);
  CHECK((analytic - fd).cwiseAbs().maxCoeff() < 1e-5 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
}

TEST_CASE("update_G_step exposes the analytic generator gradient") {
  Rng rng(76);
  auto model = random_ct_model(3, 2, rng);
  const Matrix g0 = model.G[0];
  const Vector x = random_vector(3, rng);
  const Vector xn = random_vector(3, rng);
  Vector c(2);
  c << 0.6, -0.3;

  const auto loss = [&](const Matrix& g) {
    Matrix a = c[0] * g + c[1] * model.G[1];
    return (xn - dlds::expm(a) * x).squaredNorm();
  };
  const Matrix fd = oracle::numeric_gradient(loss, g0, 1e-6);

  const double eta = 1e-4;
  dlds::update_G_step(model, x, xn, c, eta, 0.0);
  const Matrix analytic = (g0 - model.G[0]) / eta;
  CHECK(oracle::max_abs_diff(analytic, fd) < 1e-5 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
}

TEST_CASE("update_G_step: gated coefficients leave only Frobenius shrinkage") {
  Rng rng(77);
  auto model = random_ct_model(3, 2, rng);
  const Matrix g0 = model.G[0];
  const Matrix g1 = model.G[1];
  const Vector x = random_vector(3, rng);
  const Vector xn = random_vector(3, rng);

  const double eta = 0.05, lambda = 2.0;
  dlds::update_G_step(model, x, xn, Vector::Zero(2), eta, lambda);
  CHECK(oracle::max_abs_diff(model.G[0], (1.0 - 2.0 * eta * lambda) * g0) < 1e-14);
  CHECK(oracle::max_abs_diff(model.G[1], (1.0 - 2.0 * eta * lambda) * g1) < 1e-14);
}

TEST_CASE("update_G_step: zero residual and zero weight change nothing") {
  Rng rng(78);
  auto model = random_ct_model(3, 2, rng);
  const Vector x = random_vector(3, rng);
  const Vector c = random_vector(2, rng, 0.4);
  const Vector xn = dlds::propagate(model, x, c, 1.0);

  const Matrix g0 = model.G[0];
  const Matrix g1 = model.G[1];
  dlds::update_G_step(model, x, xn, c, 0.1, 0.0);
  CHECK(oracle::max_abs_diff(model.G[0], g0) == 0.0);
  CHECK(oracle::max_abs_diff(model.G[1], g1) == 0.0);
}

TEST_CASE("infer_c_step recovers a planted sparse coefficient") {
  Rng rng(79);
  ContinuousModel model;
  model.G.push_back(planar_rotation_generator());
  Matrix shear(2, 2);
  shear << 0.0, 1.0, 0.0, 0.0;
  model.G.push_back(shear);

  Vector x(2);
  x << 1.0, 0.3;
  Vector c_star(2);
  c_star << 0.4, 0.0;
  const Vector xn = dlds::propagate(model, x, c_star, 1.0);

  CtTrainConfig cfg;
  cfg.lambda_c = 1e-4;
  cfg.eta_c = 0.05;
  cfg.inner_c_iters = 2000;
  const Vector c = dlds::infer_c_step(model, x, xn, Vector::Zero(2), cfg);
  CHECK((c - c_star).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("infer_c_step: stationary pairs drive coefficients to zero") {
  Rng rng(80);
  auto model = random_ct_model(3, 2, rng);
  const Vector x = random_vector(3, rng);

  CtTrainConfig cfg;
  cfg.lambda_c = 0.5;
  cfg.eta_c = 0.1;
  cfg.inner_c_iters = 200;
  const Vector c = dlds::infer_c_step(model, x, x, random_vector(2, rng, 0.05), cfg);
  CHECK(c.cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("infer_c_step objective is non-increasing under a safe step") {
  Rng rng(81);
  auto model = random_ct_model(3, 2, rng, 0.4);
  const Vector x = random_vector(3, rng);
  const Vector xn = random_vector(3, rng);
  const Vector c0 = random_vector(2, rng, 0.3);

  CtTrainConfig cfg;
  cfg.lambda_c = 0.05;
  cfg.eta_c = 1e-3;
  double prev = pair_objective(model, x, xn, c0, cfg.lambda_c);
  for (int k = 1; k <= 15; ++k) {
    cfg.inner_c_iters = k;
    const Vector ck = dlds::infer_c_step(model, x, xn, c0, cfg);
    const double obj = pair_objective(model, x, xn, ck, cfg.lambda_c);
    CHECK(obj <= prev + 1e-8);
    prev = obj;
  }
}

TEST_CASE("one_step_predict transports every sample by its coefficient row") {
  Rng rng(82);
  auto model = random_ct_model(2, 2, rng);
  Trajectory traj;
  traj.samples = random_matrix(5, 2, rng);
  const Matrix cpath = random_matrix(4, 2, rng, 0.3);

  const Matrix pred = dlds::one_step_predict(model, traj, cpath);
  REQUIRE(pred.rows() == 4);
  for (int t = 0; t < 4; ++t) {
    const Vector want =
        dlds::propagate(model, traj.samples.row(t).transpose(), cpath.row(t).transpose(), 1.0);
    CHECK((pred.row(t).transpose() - want).cwiseAbs().maxCoeff() < 1e-12);
  }

  const Matrix idle = dlds::one_step_predict(model, traj, Matrix::Zero(4, 2));
  CHECK(oracle::max_abs_diff(idle, traj.samples.topRows(4)) == 0.0);
}

TEST_CASE("train_continuous reduces the one-step error on a planted rotation") {
  ContinuousModel truth;
  truth.G.push_back(0.15 * planar_rotation_generator());
  Trajectory traj;
  traj.samples.resize(80, 2);
  Vector x(2);
  x << 1.0, 0.0;
  Vector one(1);
  one << 1.0;
  for (int t = 0; t < 80; ++t) {
    traj.samples.row(t) = x.transpose();
    x = dlds::propagate(truth, x, one, 1.0);
  }

  // the generator penalty must stay well below 1/(pairs * eta_G) per epoch
  // or weight decay collapses the generators faster than c can compensate
  CtTrainConfig cfg;
  cfg.lambda_c = 0.001;
  cfg.lambda_G = 1e-4;
  cfg.eta_c = 0.2;
  cfg.eta_G = 0.1;
  cfg.inner_c_iters = 100;
  cfg.warm_start = true;
  cfg.max_epochs = 100;
  cfg.seed = 41;
  const auto res = dlds::train_continuous(traj, 2, cfg);
  REQUIRE(res.trace.rmse.size() == 100);
  CHECK(res.trace.rmse.back() < res.trace.rmse.front());
  CHECK(res.trace.rmse.back() < 0.05);
  CHECK(res.c.rows() == 79);
  CHECK(res.c.cols() == 2);
}

TEST_CASE("train_continuous: zero epochs return the unit-norm initialization") {
  Rng rng(83);
  Trajectory traj;
  traj.samples = random_matrix(10, 3, rng);
  CtTrainConfig cfg;
  cfg.max_epochs = 0;
  cfg.seed = 42;
  const auto res = dlds::train_continuous(traj, 3, cfg);
  CHECK(res.trace.epochs == 0);
  CHECK(res.trace.rmse.empty());
  REQUIRE(res.model.G.size() == 3);
  for (const auto& g : res.model.G) CHECK(std::abs(dlds::operator_norm(g) - 1.0) < 1e-7);
  CHECK(res.c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("train_continuous is deterministic per seed") {
  Rng rng(84);
  Trajectory traj;
  traj.samples = random_matrix(20, 2, rng);
  CtTrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.seed = 43;
  const auto a = dlds::train_continuous(traj, 2, cfg);
  const auto b = dlds::train_continuous(traj, 2, cfg);
  REQUIRE(a.trace.rmse.size() == b.trace.rmse.size());
  for (size_t i = 0; i < a.trace.rmse.size(); ++i) CHECK(a.trace.rmse[i] == b.trace.rmse[i]);
  CHECK(oracle::max_abs_diff(a.model.G[0], b.model.G[0]) == 0.0);
  CHECK(oracle::max_abs_diff(a.c, b.c) == 0.0);

  CtTrainConfig other = cfg;
  other.seed = 44;
  const auto c = dlds::train_continuous(traj, 2, other);
  CHECK(a.trace.rmse[0] != c.trace.rmse[0]);
}

TEST_CASE("train_continuous rejects degenerate setups") {
  Trajectory traj;
  traj.samples = Matrix::Zero(1, 2);
  CtTrainConfig cfg;
  CHECK_THROWS_AS(dlds::train_continuous(traj, 1, cfg), dlds::dimension_error);
  traj.samples = Matrix::Zero(5, 2);
  CHECK_THROWS_AS(dlds::train_continuous(traj, 0, cfg), dlds::dimension_error);
}
