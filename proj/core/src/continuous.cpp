#include "dlds/continuous.hpp"

#include <cmath>
#include <string>

#include "dlds/rng.hpp"

namespace dlds {

namespace {

void check_model(const ContinuousModel& model, const char* who) {
  if (model.G.empty()) throw dimension_error(std::string(who) + ": no generators");
  const auto p = model.G[0].rows();
  for (const auto& g : model.G)
    if (g.rows() != p || g.cols() != p || p == 0)
      throw dimension_error(std::string(who) + ": generators must share a square shape");
}

Matrix weighted_sum(const ContinuousModel& model, const Vector& c) {
  const auto p = model.dim();
  Matrix a = Matrix::Zero(p, p);
  for (Eigen::Index l = 0; l < c.size(); ++l)
    if (c[l] != 0.0) a += c[l] * model.G[static_cast<size_t>(l)];
  return a;
}

// gradient of ||x_next - expm(A) x||^2 with respect to A: the Frechet
// derivative of expm is self-adjoint up to transposition, so a single
// evaluation at A^T against the residual outer product yields the full
// matrix gradient; coefficient and generator gradients are projections
// of it
Matrix transport_gradient(const Matrix& a, const Vector& x, const Vector& x_next) {
  const Vector r = x_next - expm(a) * x;
  return -2.0 * expm_frechet(a.transpose(), r * x.transpose());
}

}  // namespace

Vector propagate(const ContinuousModel& model, const Vector& x, const Vector& c, double tau) {
  check_model(model, "propagate");
  if (x.size() != model.dim()) throw dimension_error("propagate: state dim mismatch");
  if (c.size() != model.count()) throw dimension_error("propagate: coefficient count mismatch");
  if (!x.allFinite() || !c.allFinite() || !std::isfinite(tau))
    throw domain_error("propagate: non-finite inputs");
  return expm(tau * weighted_sum(model, c)) * x;
}

double ct_loss(const ContinuousModel& model, const Trajectory& traj, const Matrix& cpath,
               double lambda_c, double lambda_G) {
  check_model(model, "ct_loss");
  const auto T = traj.length();
  if (T < 2) throw dimension_error("ct_loss: need at least 2 samples");
  if (cpath.rows() != T - 1 || cpath.cols() != model.count())
    throw dimension_error("ct_loss: coefficient path must be (T-1) x L");
  if (traj.dim() != model.dim()) throw dimension_error("ct_loss: trajectory dim mismatch");
  if (!(lambda_c >= 0.0) || !(lambda_G >= 0.0)) throw domain_error("ct_loss: weights must be >= 0");

  double loss = 0.0;
  for (Eigen::Index t = 0; t + 1 < T; ++t) {
    const Vector r = traj.state(t + 1) -
                     expm(weighted_sum(model, cpath.row(t).transpose())) * traj.state(t);
    loss += r.squaredNorm();
  }
  loss += lambda_c * cpath.lpNorm<1>();
  for (const auto& g : model.G) loss += lambda_G * g.squaredNorm();
  return loss;
}

Vector infer_c_step(const ContinuousModel& model, const Vector& x_t, const Vector& x_next,
                    Vector c, const CtTrainConfig& cfg) {
  check_model(model, "infer_c_step");
  if (x_t.size() != model.dim() || x_next.size() != model.dim())
    throw dimension_error("infer_c_step: state dim mismatch");
  if (c.size() != model.count()) throw dimension_error("infer_c_step: coefficient count mismatch");
  if (cfg.inner_c_iters < 1) throw domain_error("infer_c_step: inner_c_iters must be >= 1");
  if (!(cfg.eta_c > 0.0)) throw domain_error("infer_c_step: eta_c must be positive");

  const auto L = model.count();
  for (int it = 0; it < cfg.inner_c_iters; ++it) {
    const Matrix w = transport_gradient(weighted_sum(model, c), x_t, x_next);
    Vector grad(L);
    for (Eigen::Index l = 0; l < L; ++l)
      grad[l] = (model.G[static_cast<size_t>(l)].array() * w.array()).sum();
    c = soft_threshold(c - cfg.eta_c * grad, cfg.lambda_c * cfg.eta_c);
    if (!c.allFinite())
      throw divergence_error("infer_c_step: non-finite coefficients at inner step " +
                             std::to_string(it + 1));
  }
  return c;
}

void update_G_step(ContinuousModel& model, const Vector& x_t, const Vector& x_next,
                   const Vector& c, double eta_G, double lambda_G) {
  check_model(model, "update_G_step");
  if (x_t.size() != model.dim() || x_next.size() != model.dim())
    throw dimension_error("update_G_step: state dim mismatch");
  if (c.size() != model.count())
    throw dimension_error("update_G_step: coefficient count mismatch");
  if (!(lambda_G >= 0.0)) throw domain_error("update_G_step: lambda_G must be >= 0");

  const Matrix w = transport_gradient(weighted_sum(model, c), x_t, x_next);
  for (Eigen::Index l = 0; l < model.count(); ++l) {
    Matrix& g = model.G[static_cast<size_t>(l)];
    g -= eta_G * (c[l] * w + 2.0 * lambda_G * g);
    if (!g.allFinite())
      throw divergence_error("update_G_step: non-finite generator " + std::to_string(l));
  }
}

Matrix one_step_predict(const ContinuousModel& model, const Trajectory& traj,
                        const Matrix& cpath) {
  check_model(model, "one_step_predict");
  const auto T = traj.length();
  if (T < 2) throw dimension_error("one_step_predict: need at least 2 samples");
  if (cpath.rows() != T - 1 || cpath.cols() != model.count())
    throw dimension_error("one_step_predict: coefficient path must be (T-1) x L");
  Matrix pred(T - 1, traj.dim());
  for (Eigen::Index t = 0; t + 1 < T; ++t)
    pred.row(t) =
        (expm(weighted_sum(model, cpath.row(t).transpose())) * traj.state(t)).transpose();
  return pred;
}

CtTrainResult train_continuous(const Trajectory& traj, Eigen::Index L, const CtTrainConfig& cfg) {
  if (L < 1) throw dimension_error("train_continuous: need at least 1 generator");
  if (traj.length() < 2) throw dimension_error("train_continuous: need at least 2 samples");
  if (!traj.samples.allFinite()) throw domain_error("train_continuous: non-finite trajectory");
  if (cfg.max_epochs < 0) throw domain_error("train_continuous: max_epochs must be >= 0");
  if (!(cfg.decay > 0.0)) throw domain_error("train_continuous: decay must be positive");

  Rng rng(cfg.seed);
  const auto p = traj.dim();
  CtTrainResult out;
  out.model.G.reserve(static_cast<size_t>(L));
  for (Eigen::Index l = 0; l < L; ++l) {
    for (;;) {
      Matrix g(p, p);
      for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) g(i, j) = rng.gaussian();
      const double n = operator_norm(g);
      if (n > 0.0) {
        out.model.G.push_back(g / n);
        break;
      }
    }
  }
  const auto T = traj.length();
  out.c = Matrix::Zero(T - 1, L);

  CtTrainConfig step = cfg;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (Eigen::Index t = 0; t + 1 < T; ++t) {
      Vector c0(L);
      if (cfg.warm_start && epoch > 1) {
        c0 = out.c.row(t).transpose();
      } else {
        for (Eigen::Index l = 0; l < L; ++l) c0[l] = rng.gaussian(cfg.c_init_sigma);
      }
      const Vector c = infer_c_step(out.model, traj.state(t), traj.state(t + 1), c0, step);
      for (int i = 0; i < cfg.inner_G_iters; ++i)
        update_G_step(out.model, traj.state(t), traj.state(t + 1), c, step.eta_G, cfg.lambda_G);
      out.c.row(t) = c.transpose();
    }
    step.eta_c *= cfg.decay;
    step.eta_G *= cfg.decay;

    const Matrix pred = one_step_predict(out.model, traj, out.c);
    const Matrix truth = traj.samples.bottomRows(T - 1);
    const double err = (truth - pred).norm() / truth.norm();
    if (!std::isfinite(err))
      throw divergence_error("train_continuous: non-finite error at epoch " +
                             std::to_string(epoch));
    out.trace.rmse.push_back(err);
    out.trace.epochs = epoch;
  }
  return out;
}

}  // namespace dlds
