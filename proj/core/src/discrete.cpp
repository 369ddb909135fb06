#include "dlds/discrete.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace dlds {

namespace {

void check_model(const DiscreteModel& model, const char* who) {
  if (model.D.size() == 0 || model.f.empty())
    throw dimension_error(std::string(who) + ": empty model");
  const auto p = model.D.cols();
  for (const auto& f : model.f)
    if (f.rows() != p || f.cols() != p)
      throw dimension_error(std::string(who) + ": operator shape does not match latent dim");
}

void check_config(const TrainConfig& cfg, const char* who) {
  if (!(cfg.lambda0 >= 0.0) || !(cfg.lambda1 >= 0.0) || !(cfg.lambda2 >= 0.0) ||
      !(cfg.tau >= 0.0))
    throw domain_error(std::string(who) + ": weights must be >= 0");
  if (cfg.infer_rounds < 1) throw domain_error(std::string(who) + ": infer_rounds must be >= 1");
  if (cfg.solver_max_iter < 1)
    throw domain_error(std::string(who) + ": solver_max_iter must be >= 1");
  if (cfg.max_epochs < 0) throw domain_error(std::string(who) + ": max_epochs must be >= 0");
  if (cfg.warmup_epochs < 0)
    throw domain_error(std::string(who) + ": warmup_epochs must be >= 0");
  if (!(cfg.decay > 0.0)) throw domain_error(std::string(who) + ": decay must be positive");
}

// observation-only fit of a latent state (the dynamics term dropped)
Vector observation_solve(const Vector& y, const DiscreteModel& model, const TrainConfig& cfg) {
  if (cfg.mode == LassoMode::pseudo_inverse || cfg.lambda1 == 0.0)
    return solve_pseudo_inverse(model.D, y);
  return solve_lasso_penalized(model.D, y, cfg.lambda1, cfg.solver_max_iter, cfg.solver_tol).c;
}

// coefficient solve against a latent target
Vector coefficient_solve(const Matrix& f_tilde, const Vector& target, const TrainConfig& cfg) {
  if (cfg.mode == LassoMode::pseudo_inverse) return solve_pseudo_inverse(f_tilde, target);
  if (cfg.lambda0 == 0.0) return Vector::Zero(f_tilde.cols());  // dynamics term absent
  if (cfg.mode == LassoMode::penalized)
    return solve_lasso_penalized(f_tilde, target, cfg.lambda2 / cfg.lambda0, cfg.solver_max_iter,
                                 cfg.solver_tol)
        .c;
  Vector c =
      solve_lasso_constrained(f_tilde, target, cfg.tau, cfg.solver_max_iter, cfg.solver_tol).c;
  if (cfg.scale_refit) {
    const Vector fit = f_tilde * c;
    const double denom = fit.squaredNorm();
    if (denom > 1e-24 * std::max(1.0, target.squaredNorm())) c *= fit.dot(target) / denom;
  }
  return c;
}

// latent solve with the coefficients fixed: stack the observation rows on
// the dynamics anchor and fit jointly
Vector latent_solve(const Vector& y, const Vector& anchor, const DiscreteModel& model,
                    const TrainConfig& cfg) {
  if (cfg.lambda0 == 0.0) return observation_solve(y, model, cfg);
  const auto k = model.obs_dim(), p = model.latent_dim();
  const double root = std::sqrt(cfg.lambda0);
  Matrix design(k + p, p);
  design.topRows(k) = model.D;
  design.bottomRows(p) = root * Matrix::Identity(p, p);
  Vector target(k + p);
  target.head(k) = y;
  target.tail(p) = root * anchor;
  if (cfg.mode == LassoMode::pseudo_inverse || cfg.lambda1 == 0.0)
    return solve_pseudo_inverse(design, target);
  return solve_lasso_penalized(design, target, cfg.lambda1, cfg.solver_max_iter, cfg.solver_tol).c;
}

double relative_reconstruction_error(const Trajectory& traj, const DiscreteModel& model,
                                     const CoefficientPath& path) {
  const double denom = traj.samples.norm();
  return (traj.samples - path.x * model.D.transpose()).norm() / denom;
}

double relative_prediction_error(const Trajectory& traj, const DiscreteModel& model,
                                 const CoefficientPath& path) {
  const Matrix pred = one_step_predict(model, path);
  const Matrix truth = traj.samples.bottomRows(traj.length() - 1);
  return (truth - pred).norm() / truth.norm();
}

Matrix random_unit_operator(Eigen::Index p, Rng& rng) {
  for (;;) {
    Matrix f(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index j = 0; j < p; ++j) f(i, j) = rng.gaussian();
    const double n = operator_norm(f);
    if (n > 0.0) return f / n;
  }
}

}  // namespace

Matrix build_effective_dynamics(const DiscreteModel& model, const Vector& c) {
  check_model(model, "build_effective_dynamics");
  if (c.size() != model.dictionary_size())
    throw dimension_error("build_effective_dynamics: coefficient count " +
                          std::to_string(c.size()) + " != dictionary size " +
                          std::to_string(model.dictionary_size()));
  const auto p = model.latent_dim();
  Matrix F = Matrix::Zero(p, p);
  for (Eigen::Index m = 0; m < c.size(); ++m)
    if (c[m] != 0.0) F += c[m] * model.f[static_cast<size_t>(m)];
  return F;
}

Matrix build_F_tilde(const DiscreteModel& model, const Vector& x_prev) {
  check_model(model, "build_F_tilde");
  if (x_prev.size() != model.latent_dim())
    throw dimension_error("build_F_tilde: state dim mismatch");
  Matrix ft(model.latent_dim(), model.dictionary_size());
  for (Eigen::Index m = 0; m < model.dictionary_size(); ++m)
    ft.col(m) = model.f[static_cast<size_t>(m)] * x_prev;
  return ft;
}

std::pair<Vector, Vector> infer_step(const Vector& y, const Vector& x_prev,
                                     const DiscreteModel& model, const TrainConfig& cfg) {
  check_model(model, "infer_step");
  check_config(cfg, "infer_step");
  if (y.size() != model.obs_dim()) throw dimension_error("infer_step: observation dim mismatch");
  if (!y.allFinite() || !x_prev.allFinite())
    throw domain_error("infer_step: non-finite inputs");

  const Matrix f_tilde = build_F_tilde(model, x_prev);
  Vector x = observation_solve(y, model, cfg);
  Vector c = Vector::Zero(model.dictionary_size());
  for (int round = 0; round < cfg.infer_rounds; ++round) {
    c = coefficient_solve(f_tilde, x, cfg);
    x = latent_solve(y, f_tilde * c, model, cfg);
  }
  return {x, c};
}

CoefficientPath infer_sequence(const Trajectory& traj, const DiscreteModel& model,
                               const TrainConfig& cfg) {
  check_model(model, "infer_sequence");
  if (traj.length() < 2) throw domain_error("infer_sequence: need at least 2 samples");
  if (traj.dim() != model.obs_dim())
    throw dimension_error("infer_sequence: trajectory dim does not match observation dim");

  const auto T = traj.length();
  CoefficientPath path;
  path.x.resize(T, model.latent_dim());
  path.c.resize(T - 1, model.dictionary_size());
  path.x.row(0) = observation_solve(traj.state(0), model, cfg).transpose();
  for (Eigen::Index t = 1; t < T; ++t) {
    auto [x, c] = infer_step(traj.state(t), path.x.row(t - 1).transpose(), model, cfg);
    path.x.row(t) = x.transpose();
    path.c.row(t - 1) = c.transpose();
  }
  return path;
}

CoefficientPath infer_sequence_identity(const Trajectory& traj, const DiscreteModel& model,
                                        const TrainConfig& cfg) {
  check_model(model, "infer_sequence_identity");
  check_config(cfg, "infer_sequence_identity");
  if (traj.length() < 2)
    throw domain_error("infer_sequence_identity: need at least 2 samples");
  if (traj.dim() != model.latent_dim())
    throw dimension_error("infer_sequence_identity: trajectory dim does not match latent dim");

  const auto T = traj.length();
  CoefficientPath path;
  path.x = traj.samples;
  path.c.resize(T - 1, model.dictionary_size());
  for (Eigen::Index t = 1; t < T; ++t) {
    const Matrix f_tilde = build_F_tilde(model, traj.state(t - 1));
    path.c.row(t - 1) = coefficient_solve(f_tilde, traj.state(t), cfg).transpose();
  }
  return path;
}

void update_D(DiscreteModel& model, const Matrix& Y, const Matrix& X, double eta, Rng& rng) {
  check_model(model, "update_D");
  if (Y.rows() != X.rows() || Y.rows() == 0)
    throw dimension_error("update_D: batch shapes do not agree");
  if (Y.cols() != model.obs_dim() || X.cols() != model.latent_dim())
    throw dimension_error("update_D: batch dims do not match model");
  if (!Y.allFinite() || !X.allFinite()) throw domain_error("update_D: non-finite batch");

  const double n = static_cast<double>(Y.rows());
  const Matrix step = (eta / n) * (Y.transpose() * X - model.D * (X.transpose() * X));
  // an exactly-zero gradient must not re-scale already-unit columns
  if (step.cwiseAbs().maxCoeff() == 0.0) return;
  model.D += step;
  for (Eigen::Index j = 0; j < model.D.cols(); ++j) {
    double norm = model.D.col(j).norm();
    while (norm == 0.0) {
      for (Eigen::Index i = 0; i < model.D.rows(); ++i) model.D(i, j) = rng.gaussian();
      norm = model.D.col(j).norm();
    }
    model.D.col(j) /= norm;
  }
}

void update_f(DiscreteModel& model, const CoefficientPath& path, double eta, Rng& rng) {
  check_model(model, "update_f");
  const auto T = path.x.rows();
  if (T < 2 || path.c.rows() != T - 1)
    throw dimension_error("update_f: path must carry T samples and T-1 coefficient rows");
  if (path.x.cols() != model.latent_dim() || path.c.cols() != model.dictionary_size())
    throw dimension_error("update_f: path dims do not match model");
  if (!path.x.allFinite() || !path.c.allFinite())
    throw domain_error("update_f: non-finite path");

  const auto p = model.latent_dim();
  const auto M = model.dictionary_size();
  std::vector<Matrix> grad(static_cast<size_t>(M), Matrix::Zero(p, p));
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    const Vector x_prev = path.x.row(t).transpose();
    const Vector c = path.c.row(t).transpose();
    const Vector r = path.x.row(t + 1).transpose() - build_effective_dynamics(model, c) * x_prev;
    for (Eigen::Index m = 0; m < M; ++m)
      if (c[m] != 0.0) grad[static_cast<size_t>(m)] -= c[m] * (r * x_prev.transpose());
  }
  const double n = static_cast<double>(T - 1);
  for (Eigen::Index m = 0; m < M; ++m) {
    Matrix& f = model.f[static_cast<size_t>(m)];
    // coefficient-gated operators stay untouched, including their scale
    if (grad[static_cast<size_t>(m)].cwiseAbs().maxCoeff() == 0.0) continue;
    f -= (eta / n) * grad[static_cast<size_t>(m)];
    double norm = operator_norm(f);
    if (norm == 0.0) {
      f = random_unit_operator(p, rng);
    } else {
      f /= norm;
    }
  }
}

void exact_update_f(DiscreteModel& model, const CoefficientPath& path, Rng& rng) {
  check_model(model, "exact_update_f");
  const auto T = path.x.rows();
  if (T < 2 || path.c.rows() != T - 1)
    throw dimension_error("exact_update_f: path must carry T samples and T-1 coefficient rows");
  if (path.x.cols() != model.latent_dim() || path.c.cols() != model.dictionary_size())
    throw dimension_error("exact_update_f: path dims do not match model");
  if (!path.x.allFinite() || !path.c.allFinite())
    throw domain_error("exact_update_f: non-finite path");

  const auto p = model.latent_dim();
  const auto M = model.dictionary_size();
  // solve only for operators some coefficient touches; the rest stay put,
  // matching the gradient update's gate
  std::vector<Eigen::Index> active;
  for (Eigen::Index m = 0; m < M; ++m)
    if ((path.c.col(m).array() != 0.0).any()) active.push_back(m);
  if (active.empty()) return;

  const auto A = static_cast<Eigen::Index>(active.size());
  // row t of Z carries the active blocks of c_t (x) x_t, so the stacked
  // transition objective is ||X_next - Z W^T||_F^2 in the stacked atoms W
  Matrix Z = Matrix::Zero(T - 1, A * p);
  for (Eigen::Index t = 0; t + 1 < T; ++t)
    for (Eigen::Index a = 0; a < A; ++a) {
      const double c = path.c(t, active[static_cast<size_t>(a)]);
      if (c != 0.0) Z.row(t).segment(a * p, p) = c * path.x.row(t);
    }
  Matrix ZZ = Z.transpose() * Z;
  const double lead = ZZ.diagonal().maxCoeff();
  if (lead <= 0.0) return;  // active coefficients met only zero states
  std::vector<bool> constrained(static_cast<size_t>(A));
  for (Eigen::Index a = 0; a < A; ++a)
    constrained[static_cast<size_t>(a)] = ZZ.diagonal().segment(a * p, p).sum() > 0.0;
  ZZ.diagonal().array() += 1e-10 * lead;  // rank safety under collinear coefficients
  const Matrix W = ZZ.ldlt().solve(Z.transpose() * path.x.middleRows(1, T - 1)).transpose();
  for (Eigen::Index a = 0; a < A; ++a) {
    if (!constrained[static_cast<size_t>(a)]) continue;
    Matrix& f = model.f[static_cast<size_t>(active[static_cast<size_t>(a)])];
    f = W.middleCols(a * p, p);
    double norm = operator_norm(f);
    if (norm == 0.0) {
      f = random_unit_operator(p, rng);
    } else {
      f /= norm;
    }
  }
}

void perturb_dictionary(DiscreteModel& model, double sigma, Rng& rng) {
  check_model(model, "perturb_dictionary");
  if (!(sigma >= 0.0)) throw domain_error("perturb_dictionary: sigma must be >= 0");
  if (sigma == 0.0) return;
  for (auto& f : model.f) {
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) += sigma * rng.gaussian();
    double norm = operator_norm(f);
    if (norm == 0.0) {
      f = random_unit_operator(f.rows(), rng);
    } else {
      f /= norm;
    }
  }
}

Matrix one_step_predict(const DiscreteModel& model, const CoefficientPath& path) {
  check_model(model, "one_step_predict");
  const auto T = path.x.rows();
  if (T < 2 || path.c.rows() != T - 1)
    throw dimension_error("one_step_predict: path must carry T samples and T-1 coefficient rows");
  Matrix pred(T - 1, model.obs_dim());
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    const Vector x_next = build_effective_dynamics(model, path.c.row(t).transpose()) *
                          path.x.row(t).transpose();
    pred.row(t) = (model.D * x_next).transpose();
  }
  return pred;
}

double full_objective(const Trajectory& traj, const DiscreteModel& model,
                      const CoefficientPath& path, const TrainConfig& cfg) {
  check_model(model, "full_objective");
  const auto T = traj.length();
  if (path.x.rows() != T || path.c.rows() != T - 1)
    throw dimension_error("full_objective: path does not match trajectory");
  double obj = (traj.samples - path.x * model.D.transpose()).squaredNorm();
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    const Vector r = path.x.row(t + 1).transpose() -
                     build_effective_dynamics(model, path.c.row(t).transpose()) *
                         path.x.row(t).transpose();
    obj += cfg.lambda0 * r.squaredNorm();
  }
  obj += cfg.lambda1 * path.x.lpNorm<1>();
  obj += cfg.lambda2 * path.c.lpNorm<1>();
  return obj;
}

DiscreteModel init_discrete(Eigen::Index k, Eigen::Index p, Eigen::Index M, Rng& rng) {
  if (k < 1 || p < 1 || M < 1) throw dimension_error("init_discrete: dims must be >= 1");
  DiscreteModel model;
  model.D.resize(k, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double norm = 0.0;
    while (norm == 0.0) {
      for (Eigen::Index i = 0; i < k; ++i) model.D(i, j) = rng.gaussian();
      norm = model.D.col(j).norm();
    }
    model.D.col(j) /= norm;
  }
  model.f.reserve(static_cast<size_t>(M));
  for (Eigen::Index m = 0; m < M; ++m) model.f.push_back(random_unit_operator(p, rng));
  return model;
}

namespace {

// shared epoch loop; the two training entry points differ only in how a
// path is inferred, which error is traced, and whether D is learned
template <class InferFn, class ErrorFn>
TrainResult train_loop(const Trajectory& traj, DiscreteModel model, const TrainConfig& cfg,
                       Rng& rng, bool learn_D, InferFn&& infer, ErrorFn&& error) {
  TrainResult out;
  out.model = std::move(model);
  if (cfg.max_epochs == 0) {
    out.path = infer(out.model, cfg);
    return out;
  }

  // warmup epochs infer without sparsity; their errors are not comparable
  // with the configured objective, so best tracking, convergence and stall
  // checks all wait for the real phase
  TrainConfig warm = cfg;
  warm.mode = LassoMode::pseudo_inverse;

  double eta_D = cfg.eta_D, eta_f = cfg.eta_f;
  int stall = 0;
  // late perturbations under a fully decayed learning rate would otherwise
  // erase progress, so the lowest-error epoch is what training returns
  double best_err = std::numeric_limits<double>::infinity();
  DiscreteModel best_model;
  CoefficientPath best_path;
  bool tracked = false;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const bool warming = epoch <= cfg.warmup_epochs;
    out.path = infer(out.model, warming ? warm : cfg);
    const double err = error(out.model, out.path);
    if (!std::isfinite(err))
      throw divergence_error("train: non-finite error at epoch " + std::to_string(epoch));
    const bool fresh = out.trace.rmse.empty() || epoch == cfg.warmup_epochs + 1;
    const double prev = fresh ? -1.0 : out.trace.rmse.back();
    out.trace.rmse.push_back(err);
    out.trace.epochs = epoch;
    if (!warming) {
      if (err < best_err) {
        best_err = err;
        best_model = out.model;
        best_path = out.path;
        tracked = true;
      }
      if (err < cfg.conv_tol) return out;  // model and path agree with the traced error

      if (prev >= 0.0 && std::abs(err - prev) < cfg.conv_tol)
        ++stall;
      else
        stall = 0;
    }

    if (learn_D) update_D(out.model, traj.samples, out.path.x, eta_D, rng);
    if (cfg.f_update == FUpdate::exact)
      exact_update_f(out.model, out.path, rng);
    else
      update_f(out.model, out.path, eta_f, rng);
    eta_D *= cfg.decay;
    eta_f *= cfg.decay;

    if (stall >= 2) {
      perturb_dictionary(out.model, cfg.perturb_sigma, rng);
      out.trace.perturbation_events.push_back(epoch);
      stall = 0;
    }
  }
  if (tracked) {
    out.model = std::move(best_model);
    out.path = std::move(best_path);
  }
  return out;
}

}  // namespace

TrainResult train_discrete(const Trajectory& traj, Eigen::Index p, Eigen::Index M,
                           const TrainConfig& cfg) {
  check_config(cfg, "train_discrete");
  if (traj.length() < 2) throw dimension_error("train_discrete: need at least 2 samples");
  if (!traj.samples.allFinite()) throw domain_error("train_discrete: non-finite trajectory");
  Rng rng(cfg.seed);
  DiscreteModel model = init_discrete(traj.dim(), p, M, rng);
  return train_loop(
      traj, std::move(model), cfg, rng, true,
      [&](const DiscreteModel& m, const TrainConfig& c) { return infer_sequence(traj, m, c); },
      [&](const DiscreteModel& m, const CoefficientPath& path) {
        return relative_reconstruction_error(traj, m, path);
      });
}

TrainResult train_identity_observation(const Trajectory& traj, Eigen::Index M,
                                       const TrainConfig& cfg) {
  check_config(cfg, "train_identity_observation");
  if (traj.length() < 2)
    throw dimension_error("train_identity_observation: need at least 2 samples");
  if (!traj.samples.allFinite())
    throw domain_error("train_identity_observation: non-finite trajectory");
  Rng rng(cfg.seed);
  DiscreteModel model;
  model.D = Matrix::Identity(traj.dim(), traj.dim());
  model.f.reserve(static_cast<size_t>(M));
  for (Eigen::Index m = 0; m < M; ++m) model.f.push_back(random_unit_operator(traj.dim(), rng));
  return train_loop(
      traj, std::move(model), cfg, rng, false,
      [&](const DiscreteModel& m, const TrainConfig& c) {
        return infer_sequence_identity(traj, m, c);
      },
      [&](const DiscreteModel& m, const CoefficientPath& path) {
        return relative_prediction_error(traj, m, path);
      });
}

}  // namespace dlds
