#include <cmath>

#include "dlds/rng.hpp"
#include "dlds/solvers.hpp"
#include "doctest.h"
#include "oracles.hpp"

using dlds::Matrix;
using dlds::Rng;
using dlds::Vector;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.gaussian();
  return m;
}

Vector random_vector(Eigen::Index n, Rng& rng) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.gaussian();
  return v;
}

double penalized_objective(const Matrix& a, const Vector& b, const Vector& c, double w) {
  return 0.5 * (a * c - b).squaredNorm() + w * c.lpNorm<1>();
}

}  // namespace

TEST_CASE("soft threshold shrinks toward zero") {
  Vector v(4);
  v << 3.0, -0.2, 0.0, -1.5;
  const Vector s = dlds::soft_threshold(v, 0.5);
  CHECK(s[0] == doctest::Approx(2.5));
  CHECK(s[1] == 0.0);
  CHECK(s[2] == 0.0);
  CHECK(s[3] == doctest::Approx(-1.0));
}

TEST_CASE("l1 projection matches the bisection oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector v = 3.0 * random_vector(6, rng);
    const double tau = 0.1 + 2.0 * rng.uniform();
    const Vector got = dlds::project_l1_ball(v, tau);
    const Vector want = oracle::project_l1_bisect(v, tau);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(got.lpNorm<1>() <= tau + 1e-9);
  }
}

TEST_CASE("l1 projection leaves interior points unchanged") {
  Vector v(3);
  v << 0.1, -0.2, 0.05;
  const Vector got = dlds::project_l1_ball(v, 1.0);
  CHECK((got - v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("penalized solver: scalar closed form") {
  // argmin 0.5 (c-2)^2 + 0.5 |c| = sign(b) max(|b| - w, 0) = 1.5
  Matrix a(1, 1);
  a << 1.0;
  Vector b(1);
  b << 2.0;
  const auto res = dlds::solve_lasso_penalized(a, b, 0.5, 200, 1e-12);
  CHECK(res.c[0] == doctest::Approx(1.5).epsilon(1e-8));
  CHECK(res.report.converged);
}

TEST_CASE("penalized solver: weight above the zero threshold forces zero") {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(5, 3, rng);
    const Vector b = random_vector(5, rng);
    const double w = (a.transpose() * b).cwiseAbs().maxCoeff() * (1.0 + 1e-6);
    const auto res = dlds::solve_lasso_penalized(a, b, w, 500, 1e-14);
    CHECK(res.c.cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("penalized solver satisfies the subgradient optimality conditions") {
  Rng rng(23);
  const double tol = 1e-6;
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.integer(4));
    const Eigen::Index m = n + static_cast<Eigen::Index>(rng.integer(3));
    const Matrix a = random_matrix(m, n, rng);
    const Vector b = random_vector(m, rng);
    const double w = 0.05 + 0.3 * rng.uniform();
    const auto res = dlds::solve_lasso_penalized(a, b, w, 5000, 1e-12);
    const Vector g = a.transpose() * (a * res.c - b);
    for (Eigen::Index i = 0; i < n; ++i) {
      CHECK(std::abs(g[i]) <= w + tol);
      if (std::abs(res.c[i]) > 1e-9)
        CHECK(g[i] == doctest::Approx(-w * (res.c[i] > 0 ? 1.0 : -1.0)).epsilon(1e-4));
    }
  }
}

TEST_CASE("penalized solver objective is monotone in the iteration budget") {
  Rng rng(24);
  const Matrix a = random_matrix(8, 5, rng);
  const Vector b = random_vector(8, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (int iters = 1; iters <= 40; ++iters) {
    const auto res = dlds::solve_lasso_penalized(a, b, 0.1, iters, 0.0);
    CHECK(res.report.objective <= prev + 1e-12);
    CHECK(res.report.objective ==
          doctest::Approx(penalized_objective(a, b, res.c, 0.1)).epsilon(1e-12));
    prev = res.report.objective;
  }
}

TEST_CASE("penalized solver reports non-convergence but keeps the best iterate") {
  Rng rng(25);
  const Matrix a = random_matrix(10, 6, rng);
  const Vector b = random_vector(10, rng);
  const auto res = dlds::solve_lasso_penalized(a, b, 0.05, 1, 1e-14);
  CHECK_FALSE(res.report.converged);
  CHECK(res.report.objective <= penalized_objective(a, b, Vector::Zero(6), 0.05) + 1e-12);
}

TEST_CASE("constrained solver: tau = 0 gives the zero solution") {
  Rng rng(26);
  const Matrix a = random_matrix(4, 3, rng);
  const Vector b = random_vector(4, rng);
  const auto res = dlds::solve_lasso_constrained(a, b, 0.0, 50, 1e-12);
  CHECK(res.c.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constrained solver: inactive budget reproduces least squares") {
  Rng rng(27);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_matrix(6, 3, rng);
    const Vector b = random_vector(6, rng);
    const Vector ls = dlds::solve_pseudo_inverse(a, b);
    const auto res = dlds::solve_lasso_constrained(a, b, ls.lpNorm<1>() * 1.5, 5000, 1e-14);
    CHECK((res.c - ls).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("constrained solver matches the grid oracle on 20 small instances") {
  Rng rng(28);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(4, 3, rng);
    const Vector b = random_vector(4, rng);
    const double tau = 0.5;
    const auto res = dlds::solve_lasso_constrained(a, b, tau, 5000, 1e-14);
    CHECK(res.c.lpNorm<1>() <= tau + 1e-9);
    const double grid = oracle::constrained_grid_best(a, b, tau, 1e-2);
    CHECK(res.report.objective <= grid + 1e-2);
    CHECK(res.report.objective >= grid - 1e-2);
  }
}

TEST_CASE("constrained solver objective is monotone in the iteration budget") {
  Rng rng(29);
  const Matrix a = random_matrix(6, 4, rng);
  const Vector b = random_vector(6, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (int iters = 1; iters <= 30; ++iters) {
    const auto res = dlds::solve_lasso_constrained(a, b, 0.7, iters, 0.0);
    CHECK(res.report.objective <= prev + 1e-12);
    prev = res.report.objective;
  }
}

TEST_CASE("pseudo inverse: identity, averaging, and minimum-norm properties") {
  Matrix eye = Matrix::Identity(3, 3);
  Vector b(3);
  b << 1, -2, 4;
  CHECK((dlds::solve_pseudo_inverse(eye, b) - b).cwiseAbs().maxCoeff() < 1e-12);

  Matrix col(2, 1);
  col << 1, 1;
  Vector b2(2);
  b2 << 1, 3;
  CHECK(dlds::solve_pseudo_inverse(col, b2)[0] == doctest::Approx(2.0).epsilon(1e-12));

  // rank-deficient: residual orthogonal to the column space and minimum
  // norm among least-squares solutions
  Rng rng(30);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a = random_matrix(3, 2, rng);
    Matrix def(3, 3);
    def << a.col(0), a.col(1), a.col(0) + a.col(1);
    const Vector b3 = random_vector(3, rng);
    const Vector c = dlds::solve_pseudo_inverse(def, b3);
    CHECK((def.transpose() * (def * c - b3)).cwiseAbs().maxCoeff() < 1e-8);
    // any least-squares solution differs by a null-space vector; the
    // minimum-norm one is orthogonal to the null space (1,1,-1)/sqrt(3)
    Vector null(3);
    null << 1, 1, -1;
    CHECK(std::abs(c.dot(null)) < 1e-8);
  }
}

TEST_CASE("pseudo_inverse matrix satisfies the Moore-Penrose identities") {
  Rng rng(31);
  const Matrix a = random_matrix(4, 3, rng);
  const Matrix pinv = dlds::pseudo_inverse(a);
  CHECK(oracle::max_abs_diff(a * pinv * a, a) < 1e-10);
  CHECK(oracle::max_abs_diff(pinv * a * pinv, pinv) < 1e-10);
}
