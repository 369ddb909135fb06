#pragma once

#include "dlds/linalg.hpp"

namespace dlds {

// How per-step coefficients are resolved during inference.
enum class LassoMode { penalized, constrained, pseudo_inverse };

struct SolverReport {
  bool converged = false;
  int iterations = 0;
  // penalized: 0.5*||Ac-b||^2 + weight*||c||_1 at the returned point;
  // constrained: ||Ac-b||_2 at the returned point
  double objective = 0.0;
};

struct LassoResult {
  Vector c;
  SolverReport report;
};

// Elementwise sign(v) * max(|v| - t, 0). Requires t >= 0.
Vector soft_threshold(const Vector& v, double t);

// Euclidean projection onto {u : ||u||_1 <= tau}. Points already inside
// are returned unchanged. Sort-based, O(n log n).
Vector project_l1_ball(const Vector& v, double tau);

// min_c 0.5*||Ac - b||^2 + weight*||c||_1.
// Accelerated proximal gradient with step 1/L, L = operator_norm(A)^2,
// and a keep-best safeguard, so the objective is non-increasing per
// iteration. Stops when the objective change drops below tol. Failure to
// converge is reported, not thrown.
LassoResult solve_lasso_penalized(const Matrix& a, const Vector& b, double weight, int max_iter,
                                  double tol);

// min_c ||Ac - b||_2  subject to  ||c||_1 <= tau.
// Projected gradient with step 1/L; stops when the fixed-point residual
// ||c - P(c - grad/L)||_inf drops below tol.
LassoResult solve_lasso_constrained(const Matrix& a, const Vector& b, double tau, int max_iter,
                                    double tol);

// Minimum-norm least squares via SVD; singular values below
// 1e-12 * sigma_max are treated as zero.
Vector solve_pseudo_inverse(const Matrix& a, const Vector& b);
Matrix pseudo_inverse(const Matrix& a);

}  // namespace dlds
