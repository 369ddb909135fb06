#pragma once

#include <vector>

#include "dlds/linalg.hpp"

namespace dlds {

// A sampled multichannel time series. Row t of samples is the state at
// time t0 + t*dt; column j is channel j. labels, when nonempty, carries
// one regime tag per sample (segment index, rotation angle, ...).
struct Trajectory {
  Matrix samples;
  double dt = 1.0;
  std::vector<double> labels;

  Eigen::Index length() const { return samples.rows(); }
  Eigen::Index dim() const { return samples.cols(); }
  Vector state(Eigen::Index t) const { return samples.row(t).transpose(); }
};

// Per-channel standardization to mean 0, population sd 1. Channels with
// zero variance are rejected.
Trajectory zscore_per_channel(const Trajectory& traj);

}  // namespace dlds
