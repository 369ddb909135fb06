#pragma once

#include <utility>
#include <vector>

#include "dlds/rng.hpp"
#include "dlds/solvers.hpp"
#include "dlds/trajectory.hpp"

namespace dlds {

// Discrete-time decomposed linear dynamics.
//
//   observation   y_t ~ D x_t
//   transition    x_t ~ (sum_m c_{m,t-1} f_m) x_{t-1}
//
// D has unit-norm columns; each f_m has unit operator norm, so per-step
// amplitude lives entirely in the coefficients. Coefficient rows are
// indexed by the transition they drive: c row t maps x_t to x_{t+1},
// giving T-1 rows for T samples.
struct DiscreteModel {
  Matrix D;                // k x p
  std::vector<Matrix> f;   // M operators, each p x p

  Eigen::Index obs_dim() const { return D.rows(); }
  Eigen::Index latent_dim() const { return D.cols(); }
  Eigen::Index dictionary_size() const { return static_cast<Eigen::Index>(f.size()); }
};

struct CoefficientPath {
  Matrix x;  // T x p
  Matrix c;  // (T-1) x M
};

// Dictionary update rule: a single gradient step per epoch, or the exact
// minimizer of the stacked operator least-squares subproblem.
enum class FUpdate { gradient, exact };

struct TrainConfig {
  // composite objective weights:
  //   ||y - D x||^2 + lambda0 ||x - F~ c||^2 + lambda1 ||x||_1 + lambda2 ||c||_1
  double lambda0 = 1.0;
  double lambda1 = 0.0;
  double lambda2 = 0.01;

  LassoMode mode = LassoMode::constrained;
  double tau = 0.3;          // l1 budget in constrained mode
  int solver_max_iter = 10;
  double solver_tol = 1e-10;
  // constrained mode only: after the budgeted solve, refit the solution's
  // amplitude by scalar least squares along its ray. The budget then
  // selects support and direction while the refit carries scale, which
  // unit-norm operators cannot.
  bool scale_refit = true;
  int infer_rounds = 2;      // c-step/x-step alternations per sample

  double eta_D = 30.0;
  double eta_f = 30.0;
  double decay = 0.99;       // per-epoch multiplier on both learning rates
  double perturb_sigma = 0.1;
  double conv_tol = 1e-8;
  int max_epochs = 6000;
  // Epochs at the start that infer coefficients without sparsity
  // (pseudo-inverse mode). A dictionary started at random must first span
  // the reachable operator subspace before a sparse solve can rotate its
  // atoms apart; skipping the warmup leaves large dictionaries stuck on
  // dense exact fits. Best-model tracking and convergence checks engage
  // only after the warmup.
  int warmup_epochs = 0;
  FUpdate f_update = FUpdate::gradient;
  std::uint64_t seed = 0;
};

struct TrainTrace {
  std::vector<double> rmse;              // one entry per executed epoch
  std::vector<int> perturbation_events;  // epochs (1-based) where noise fired
  int epochs = 0;
};

struct TrainResult {
  DiscreteModel model;
  CoefficientPath path;
  TrainTrace trace;
};

// sum_m c_m f_m
Matrix build_effective_dynamics(const DiscreteModel& model, const Vector& c);

// p x M matrix whose column m is f_m x_prev, so that F~ c equals the
// effective dynamics applied to x_prev (bilinear in c and x_prev).
Matrix build_F_tilde(const DiscreteModel& model, const Vector& x_prev);

// One step of sequential inference: resolve (x_t, c_t) given y_t and the
// previous latent state by alternating a coefficient solve against the
// current latent estimate with a stacked least-squares latent update.
std::pair<Vector, Vector> infer_step(const Vector& y, const Vector& x_prev,
                                     const DiscreteModel& model, const TrainConfig& cfg);

// Forward pass over a trajectory. x row 0 comes from the observation-only
// problem; subsequent rows from infer_step.
CoefficientPath infer_sequence(const Trajectory& traj, const DiscreteModel& model,
                               const TrainConfig& cfg);

// Identity-observation shortcut (D = I, x = y): only the coefficient
// solve remains per step.
CoefficientPath infer_sequence_identity(const Trajectory& traj, const DiscreteModel& model,
                                        const TrainConfig& cfg);

// D <- D + eta * <(y_t - D x_t) x_t^T>, then renormalize columns.
// Zero columns are redrawn from the unit sphere.
void update_D(DiscreteModel& model, const Matrix& Y, const Matrix& X, double eta, Rng& rng);

// Gradient descent on 0.5 ||x_{t+1} - sum_m c_m f_m x_t||^2 averaged over
// transitions, then renormalize each operator to unit operator norm.
void update_f(DiscreteModel& model, const CoefficientPath& path, double eta, Rng& rng);

// Closed-form minimizer of the same transition objective over all touched
// operators jointly (stacked normal equations with a tiny relative ridge),
// then the same renormalization. Operators no coefficient touches stay
// put. rng only redraws degenerate zero-norm solutions.
void exact_update_f(DiscreteModel& model, const CoefficientPath& path, Rng& rng);

// Entrywise Gaussian noise on each f_m followed by renormalization.
// sigma = 0 leaves the model bitwise untouched.
void perturb_dictionary(DiscreteModel& model, double sigma, Rng& rng);

// Rows t = 0..T-2: prediction of sample t+1, D (sum_m c_{m,t} f_m) x_t.
Matrix one_step_predict(const DiscreteModel& model, const CoefficientPath& path);

// The composite objective evaluated over a full trajectory and path.
double full_objective(const Trajectory& traj, const DiscreteModel& model,
                      const CoefficientPath& path, const TrainConfig& cfg);

DiscreteModel init_discrete(Eigen::Index k, Eigen::Index p, Eigen::Index M, Rng& rng);

// Alternate inference with dictionary updates until the reconstruction
// error ||Y - X D^T||_F / ||Y||_F falls below conv_tol or max_epochs is
// reached. A stalled error (2 consecutive epochs changing less than
// conv_tol while still above it) triggers a perturbation.
TrainResult train_discrete(const Trajectory& traj, Eigen::Index p, Eigen::Index M,
                           const TrainConfig& cfg);

// Same loop with D pinned to the identity and x = y; the traced error is
// the relative one-step prediction error.
TrainResult train_identity_observation(const Trajectory& traj, Eigen::Index M,
                                       const TrainConfig& cfg);

}  // namespace dlds
