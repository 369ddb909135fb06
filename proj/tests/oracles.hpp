#pragma once

// Independent reference computations the tests compare against. These
// deliberately use different algorithms than the library (plain Taylor
// series instead of scaling-and-squaring, bisection instead of sorting,
// grid search instead of projected gradient) so agreement is evidence,
// not tautology.

#include <cmath>
#include <functional>
#include <stdexcept>

#include "dlds/linalg.hpp"

namespace oracle {

using dlds::Matrix;
using dlds::Vector;

// Plain truncated Taylor series. Accurate for ||A|| up to ~5 with the
// default term count; tests keep norms well inside that.
inline Matrix expm_taylor(const Matrix& a, int terms = 40) {
  Matrix acc = Matrix::Identity(a.rows(), a.cols());
  Matrix term = Matrix::Identity(a.rows(), a.cols());
  for (int k = 1; k <= terms; ++k) {
    term = (term * a / static_cast<double>(k)).eval();
    acc += term;
  }
  return acc;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

// Central finite differences of a scalar function of a vector.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                               double eps = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector hi = x, lo = x;
    hi[i] += eps;
    lo[i] -= eps;
    g[i] = (f(hi) - f(lo)) / (2.0 * eps);
  }
  return g;
}

// Central finite differences of a scalar function of a matrix.
inline Matrix numeric_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                               double eps = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Matrix hi = x, lo = x;
      hi(i, j) += eps;
      lo(i, j) -= eps;
      g(i, j) = (f(hi) - f(lo)) / (2.0 * eps);
    }
  return g;
}

// Euclidean projection onto the l1 ball by bisection on the shrinkage
// threshold: h(theta) = sum_i max(|v_i| - theta, 0) is continuous and
// nonincreasing, so the feasibility equation h(theta) = tau has a root
// whenever v lies outside the ball.
inline Vector project_l1_bisect(const Vector& v, double tau) {
  if (v.lpNorm<1>() <= tau) return v;
  double lo = 0.0, hi = v.cwiseAbs().maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += std::max(std::abs(v[i]) - mid, 0.0);
    (s > tau ? lo : hi) = mid;
  }
  const double theta = 0.5 * (lo + hi);
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::max(std::abs(v[i]) - theta, 0.0);
    out[i] = v[i] < 0 ? -mag : mag;
  }
  return out;
}

// Best l2 residual over a dense grid of the l1 ball, for 3-dimensional
// coefficient vectors. Returns ||A c* - b||_2 at the best grid point.
inline double constrained_grid_best(const Matrix& a, const Vector& b, double tau, double step) {
  if (a.cols() != 3) throw std::invalid_argument("grid oracle is 3-dimensional");
  double best = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(std::round(tau / step));
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k) {
        Vector c(3);
        c << i * step, j * step, k * step;
        if (c.lpNorm<1>() > tau + 1e-12) continue;
        best = std::min(best, (a * c - b).norm());
      }
  return best;
}

// Frozen hand-derived constants (computed before the implementation,
// with the derivations noted here).

// pearson([1,2,3,4],[1,2,3,5]) by the direct formula:
//   cov = 6.5, sd product = sqrt(5 * 8.75)
inline constexpr double kPearsonExample = 0.9827076298239908;

// Rest point of v' = v - v^3/3 - w, w' = (v + a - b w)/tau at
// I_ext = 0, a = 0.8, b = 0.7: substitute w = (v+a)/b and bisect
// v - v^3/3 - (v+a)/b = 0 (strictly decreasing, single root).
inline constexpr double kFhnRestV = -1.2276401612149157;
inline constexpr double kFhnRestW = -0.6109145160213081;

}  // namespace oracle
