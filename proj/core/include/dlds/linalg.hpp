#pragma once

#include <Eigen/Dense>

#include "dlds/errors.hpp"

namespace dlds {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

bool is_finite(const Matrix& a);

// Matrix exponential by scaling-and-squaring with Pade approximants.
// Requires a square, finite matrix.
Matrix expm(const Matrix& a);

// Frechet derivative of expm at a in direction e, computed through the
// block identity  expm([[A, E], [0, A]]) = [[expm(A), L(A,E)], [0, expm(A)]].
Matrix expm_frechet(const Matrix& a, const Matrix& e);

// Largest singular value. Power iteration on A^T A with a deterministic
// start vector; falls back to a dense SVD if 1000 sweeps do not settle.
double operator_norm(const Matrix& a);

double frobenius_norm(const Matrix& a);

}  // namespace dlds
