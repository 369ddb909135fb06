#include <cmath>

#include "dlds/errors.hpp"
#include "dlds/linalg.hpp"
#include "dlds/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using dlds::Matrix;
using dlds::Rng;
using dlds::Vector;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.gaussian();
  return m;
}

}  // namespace

TEST_CASE("expm matches the Taylor oracle on random matrices") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(4, 4, rng, 0.5);
    CHECK(oracle::max_abs_diff(dlds::expm(a), oracle::expm_taylor(a)) < 1e-10);
  }
}

TEST_CASE("expm of zero is the identity") {
  const Matrix z = Matrix::Zero(3, 3);
  CHECK(oracle::max_abs_diff(dlds::expm(z), Matrix::Identity(3, 3)) == 0.0);
}

TEST_CASE("expm rotation generator gives sine and cosine") {
  Matrix g(2, 2);
  const double theta = 0.7;
  g << 0, -theta, theta, 0;
  const Matrix r = dlds::expm(g);
  CHECK(r(0, 0) == doctest::Approx(std::cos(theta)).epsilon(1e-12));
  CHECK(r(1, 0) == doctest::Approx(std::sin(theta)).epsilon(1e-12));
  CHECK(r(0, 1) == doctest::Approx(-std::sin(theta)).epsilon(1e-12));
}

TEST_CASE("expm semigroup and inverse identities") {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_matrix(3, 3, rng, 0.6);
    const Matrix whole = dlds::expm(2.0 * a);
    const Matrix halves = dlds::expm(a) * dlds::expm(a);
    CHECK(oracle::max_abs_diff(whole, halves) < 1e-8);
    const Matrix prod = dlds::expm(a) * dlds::expm(-a);
    CHECK(oracle::max_abs_diff(prod, Matrix::Identity(3, 3)) < 1e-8);
  }
}

TEST_CASE("expm rejects non-square and non-finite input") {
  CHECK_THROWS_AS(dlds::expm(Matrix::Zero(2, 3)), dlds::dimension_error);
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(dlds::expm(bad), dlds::domain_error);
}

TEST_CASE("expm_frechet matches finite differences of expm") {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_matrix(3, 3, rng, 0.5);
    const Matrix e = random_matrix(3, 3, rng, 1.0);
    const double eps = 1e-6;
    const Matrix fd = (dlds::expm(a + eps * e) - dlds::expm(a - eps * e)) / (2.0 * eps);
    CHECK(oracle::max_abs_diff(dlds::expm_frechet(a, e), fd) < 1e-6);
  }
}

TEST_CASE("expm_frechet is linear in the direction") {
  Rng rng(14);
  const Matrix a = random_matrix(3, 3, rng, 0.5);
  const Matrix e1 = random_matrix(3, 3, rng);
  const Matrix e2 = random_matrix(3, 3, rng);
  const Matrix lhs = dlds::expm_frechet(a, 2.0 * e1 - 0.5 * e2);
  const Matrix rhs = 2.0 * dlds::expm_frechet(a, e1) - 0.5 * dlds::expm_frechet(a, e2);
  CHECK(oracle::max_abs_diff(lhs, rhs) < 1e-10);
}

TEST_CASE("operator_norm matches singular values") {
  Matrix a(2, 2);
  a << 3, 0, 0, 1;
  CHECK(dlds::operator_norm(a) == doctest::Approx(3.0).epsilon(1e-9));

  // symmetric rank-1 case where the all-ones start vector would be
  // exactly orthogonal to the top singular vector
  Matrix tricky(2, 2);
  tricky << 1, -1, -1, 1;
  CHECK(dlds::operator_norm(tricky) == doctest::Approx(2.0).epsilon(1e-9));

  CHECK(dlds::operator_norm(Matrix::Zero(3, 3)) == 0.0);

  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = random_matrix(5, 3, rng);
    const double svd = Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
    CHECK(dlds::operator_norm(m) == doctest::Approx(svd).epsilon(1e-8));
  }
}

TEST_CASE("frobenius_norm agrees with Eigen and rejects empty input") {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  CHECK(dlds::frobenius_norm(a) == doctest::Approx(std::sqrt(30.0)).epsilon(1e-14));
  CHECK_THROWS_AS(dlds::frobenius_norm(Matrix()), dlds::dimension_error);
}

TEST_CASE("rng is deterministic and box-muller moments are sane") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.gaussian() == b.gaussian());

  Rng rng(7);
  double sum = 0.0, sumsq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    sum += g;
    sumsq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sumsq / n - 1.0) < 0.05);
}

TEST_CASE("rng uniform stays in range and integer is unbiased over small n") {
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 3000; ++i) ++counts[rng.integer(3)];
  for (int c : counts) CHECK(std::abs(c - 1000) < 150);
}
