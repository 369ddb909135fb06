#include "dlds/linalg.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <cstdint>

namespace dlds {

bool is_finite(const Matrix& a) { return a.allFinite(); }

namespace {

void require_finite(const Matrix& a, const char* who) {
  if (!a.allFinite()) throw domain_error(std::string(who) + ": non-finite entries");
}

void require_nonempty(const Matrix& a, const char* who) {
  if (a.rows() == 0 || a.cols() == 0) throw dimension_error(std::string(who) + ": empty matrix");
}

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

Matrix expm(const Matrix& a) {
  require_nonempty(a, "expm");
  if (a.rows() != a.cols())
    throw dimension_error("expm: matrix must be square, got " + std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()));
  require_finite(a, "expm");
  return a.exp();
}

Matrix expm_frechet(const Matrix& a, const Matrix& e) {
  require_nonempty(a, "expm_frechet");
  if (a.rows() != a.cols()) throw dimension_error("expm_frechet: A must be square");
  if (e.rows() != a.rows() || e.cols() != a.cols())
    throw dimension_error("expm_frechet: direction shape must match A");
  require_finite(a, "expm_frechet");
  require_finite(e, "expm_frechet");
  const auto n = a.rows();
  Matrix block = Matrix::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = a;
  block.topRightCorner(n, n) = e;
  block.bottomRightCorner(n, n) = a;
  return block.exp().topRightCorner(n, n).eval();
}

double operator_norm(const Matrix& a) {
  require_nonempty(a, "operator_norm");
  require_finite(a, "operator_norm");
  if (a.isZero(0.0)) return 0.0;

  // fixed pseudo-random start: an all-ones vector can be exactly orthogonal
  // to the top singular vector (e.g. [[1,-1],[-1,1]]) and converge wrong
  Vector v(a.cols());
  std::uint64_t state = 0x6a09e667f3bcc908ull;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 - 0.5;
  v.normalize();

  double prev = -1.0;
  for (int it = 0; it < 1000; ++it) {
    const Vector w = a * v;
    const double est = w.norm();
    if (est == 0.0) break;
    if (prev >= 0.0 && std::abs(est - prev) <= 1e-10 * est) return est;
    prev = est;
    Vector u = a.transpose() * w;
    const double un = u.norm();
    if (un == 0.0) break;
    v = u / un;
  }
  return Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
}

double frobenius_norm(const Matrix& a) {
  require_nonempty(a, "frobenius_norm");
  require_finite(a, "frobenius_norm");
  return a.norm();
}

}  // namespace dlds
