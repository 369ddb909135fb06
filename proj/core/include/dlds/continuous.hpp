#pragma once

#include <vector>

#include "dlds/discrete.hpp"  // TrainTrace
#include "dlds/trajectory.hpp"

namespace dlds {

// Continuous-time decomposed dynamics: between consecutive samples the
// state is transported by the exponential of a coefficient-weighted sum
// of generators,  x_{t+1} = expm(sum_l c_{l,t} G_l) x_t. Sampling time is
// absorbed into the coefficients; propagate exposes an explicit horizon
// for rollouts at other durations.
struct ContinuousModel {
  std::vector<Matrix> G;  // L generators, each p x p

  Eigen::Index dim() const { return G.empty() ? 0 : G[0].rows(); }
  Eigen::Index count() const { return static_cast<Eigen::Index>(G.size()); }
};

struct CtTrainConfig {
  double lambda_c = 0.1;   // l1 weight on per-step coefficients
  double lambda_G = 1.0;   // Frobenius weight on generators
  double eta_c = 0.01;     // proximal step for the coefficient solve
  double eta_G = 0.1;      // gradient step for the generator update
  double decay = 0.985;    // per-epoch multiplier on both steps
  int inner_c_iters = 20;
  int inner_G_iters = 1;
  double c_init_sigma = 0.1;  // fresh Gaussian coefficient draw per pair
  bool warm_start = false;    // reuse last epoch's coefficients instead
  int max_epochs = 150;
  std::uint64_t seed = 0;
};

// expm(sum_l c_l G_l * tau) x
Vector propagate(const ContinuousModel& model, const Vector& x, const Vector& c, double tau);

// sum_t ||x_{t+1} - expm(sum_l c_{l,t} G_l) x_t||^2
//   + lambda_c sum_t ||c_t||_1 + lambda_G sum_l ||G_l||_F^2
double ct_loss(const ContinuousModel& model, const Trajectory& traj, const Matrix& cpath,
               double lambda_c, double lambda_G);

// Proximal gradient on the single-pair transport residual in c: the
// smooth gradient flows through the matrix exponential (Frechet
// derivative), followed by soft thresholding at lambda_c * eta_c.
Vector infer_c_step(const ContinuousModel& model, const Vector& x_t, const Vector& x_next,
                    Vector c, const CtTrainConfig& cfg);

// One gradient step per generator on the same pair residual, plus the
// Frobenius shrinkage term 2 * lambda_G * G_l.
void update_G_step(ContinuousModel& model, const Vector& x_t, const Vector& x_next,
                   const Vector& c, double eta_G, double lambda_G);

// Rows t = 0..T-2: transport of sample t by coefficients row t.
Matrix one_step_predict(const ContinuousModel& model, const Trajectory& traj,
                        const Matrix& cpath);

struct CtTrainResult {
  ContinuousModel model;
  Matrix c;  // (T-1) x L
  TrainTrace trace;
};

// Per-pair stochastic loop: for every consecutive sample pair, draw (or
// warm-start) coefficients, run the proximal coefficient solve, then step
// the generators. Steps decay per epoch. The traced error is the relative
// one-step prediction error.
CtTrainResult train_continuous(const Trajectory& traj, Eigen::Index L, const CtTrainConfig& cfg);

}  // namespace dlds
