#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dlds/trajectory.hpp"

namespace dlds {

// Parameters for the bundled benchmark systems. T counts samples
// (including the initial state); dt is the sampling interval. Fields
// outside the selected kind are ignored. An empty x0 selects the
// per-kind default.
struct SystemSpec {
  enum class Kind { fhn, lorenz, spiral_speed, rotating_center, scaled_permutation };

  Kind kind = Kind::fhn;
  int T = 0;  // 0 -> per-kind default
  double dt = 0.0;
  std::uint64_t seed = 0;
  Vector x0;

  // FitzHugh-Nagumo: v' = v - v^3/3 - w + I,  w' = (v + a - b w) / tau
  double fhn_a = 0.8, fhn_b = 0.7, fhn_tau = 20.0, fhn_I = 0.5;

  // Lorenz: x' = sigma(y-x), y' = x(rho-z) - y, z' = xy - beta z
  double lorenz_sigma = 10.0, lorenz_rho = 28.0, lorenz_beta = 8.0 / 3.0;

  // decaying 2D spiral x' = s(t) A x, with the speed multiplier s(t)
  // stepping through spiral_speeds at segment-length boundaries
  double spiral_decay = -0.05, spiral_omega = 1.0, spiral_segment = 5.0;
  std::vector<double> spiral_speeds{1.0, 2.0, 3.0, 4.0};

  // 3D center (rotation about the z axis, z frozen), conjugated by a
  // fresh random rotation about the x axis every segment
  double rotation_omega = 1.0, rotation_segment = 5.0;
  int rotation_segments = 40;

  // sparse positive mixtures of scaled permutation operators. A single
  // autonomous orbit does not pin the operators down (the normalized orbit
  // is periodic, leaving an exact-fit family), so perm_restarts > 1 pools
  // that many runs of T samples each from fresh sparse starts: samples are
  // unit-normalized (the dropped scale folds into the returned mixture
  // weights) and runs are joined by single zero rows whose flanking
  // transitions carry exactly zero weight either way.
  int perm_dim = 16, perm_ops = 1, perm_sparsity = 1;
  int perm_restarts = 1;
  double perm_scale_lo = 0.5, perm_scale_hi = 1.5;
};

// Classic fourth-order Runge-Kutta on dx/dt = f(t, x). Returns T samples
// (x0 first). Throws divergence_error if the state leaves the finite
// range, naming the failing step.
Trajectory integrate_rk4(const std::function<Vector(double, const Vector&)>& f, const Vector& x0,
                         int T, double dt, double t0 = 0.0);

Trajectory gen_fhn(const SystemSpec& spec);
Trajectory gen_lorenz(const SystemSpec& spec);
Trajectory gen_spiral_speed(const SystemSpec& spec);    // labels = segment index
Trajectory gen_rotating_center(const SystemSpec& spec); // labels = segment angle

// Ground truth for the permutation benchmark: the trajectory, the planted
// operators, and the planted mixture weights (row t drives x_t -> x_{t+1}).
// With restarts the labels carry the run index (-1 on separator rows).
struct PermutationData {
  Trajectory traj;
  std::vector<Matrix> operators;
  Matrix coefficients;
};

PermutationData gen_scaled_permutation(const SystemSpec& spec);

// Dispatch on spec.kind (scaled_permutation yields just the trajectory).
Trajectory generate(const SystemSpec& spec);

}  // namespace dlds
