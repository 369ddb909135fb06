#pragma once

#include <vector>

#include "dlds/linalg.hpp"

namespace dlds {

// Sample Pearson correlation. Requires matching lengths (>= 2) and
// nonzero variance on both sides.
double pearson_r(const Vector& a, const Vector& b);

// Coefficient of determination 1 - SS_res/SS_tot against the mean of
// truth. Requires nonconstant truth. Unbounded below.
double r2_score(const Vector& truth, const Vector& pred);

// ||truth - pred||_F / ||truth||_F. Requires nonzero truth.
double rmse_relative(const Matrix& truth, const Matrix& pred);

// Forecast quality of pred against truth (rows = time, cols = channels).
// Scalar metrics are computed on the channel-concatenated flattened
// series; per-channel values accompany them.
struct EvalReport {
  double pearson = 0.0;
  double r2 = 0.0;
  double rmse = 0.0;
  std::vector<double> pearson_per_channel;
  std::vector<double> r2_per_channel;
  std::vector<double> rmse_per_channel;
};

EvalReport evaluate_forecast(const Matrix& truth, const Matrix& pred);

// Greedy max-|cosine| matching between two operator sets under the
// Frobenius inner product. Scores are |<f, g>| / (||f|| ||g||), so sign
// flips do not count against a match. assignment[i] is the reference
// index matched to learned[i] (-1 if the reference set ran out).
struct AlignResult {
  std::vector<int> assignment;
  std::vector<double> scores;
  double mean_score = 0.0;
};

AlignResult align_dictionaries(const std::vector<Matrix>& learned,
                               const std::vector<Matrix>& reference);

}  // namespace dlds
