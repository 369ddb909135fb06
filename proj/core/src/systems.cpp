#include "dlds/systems.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "dlds/errors.hpp"
#include "dlds/rng.hpp"

namespace dlds {

Trajectory zscore_per_channel(const Trajectory& traj) {
  if (traj.length() < 2) throw dimension_error("zscore_per_channel: need at least 2 samples");
  Trajectory out = traj;
  const double n = static_cast<double>(traj.length());
  for (Eigen::Index j = 0; j < traj.dim(); ++j) {
    const double mean = traj.samples.col(j).mean();
    const double var = (traj.samples.col(j).array() - mean).square().sum() / n;
    if (var == 0.0)
      throw domain_error("zscore_per_channel: channel " + std::to_string(j) + " is constant");
    out.samples.col(j) = (traj.samples.col(j).array() - mean) / std::sqrt(var);
  }
  return out;
}

Trajectory integrate_rk4(const std::function<Vector(double, const Vector&)>& f, const Vector& x0,
                         int T, double dt, double t0) {
  if (T < 2) throw dimension_error("integrate_rk4: need T >= 2 samples");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw domain_error("integrate_rk4: dt must be positive");
  if (x0.size() == 0) throw dimension_error("integrate_rk4: empty initial state");
  if (!x0.allFinite()) throw domain_error("integrate_rk4: non-finite initial state");

  Trajectory traj;
  traj.dt = dt;
  traj.samples.resize(T, x0.size());
  traj.samples.row(0) = x0.transpose();
  Vector x = x0;
  for (int i = 1; i < T; ++i) {
    const double t = t0 + (i - 1) * dt;
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
    const Vector k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
    const Vector k4 = f(t + dt, x + dt * k3);
    x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite())
      throw divergence_error("integrate_rk4: non-finite state at step " + std::to_string(i));
    traj.samples.row(i) = x.transpose();
  }
  return traj;
}

namespace {

int default_T(const SystemSpec& spec, int fallback) { return spec.T > 0 ? spec.T : fallback; }
double default_dt(const SystemSpec& spec, double fallback) {
  return spec.dt > 0.0 ? spec.dt : fallback;
}

Vector default_x0(const SystemSpec& spec, std::initializer_list<double> fallback) {
  if (spec.x0.size() > 0) return spec.x0;
  Vector v(static_cast<Eigen::Index>(fallback.size()));
  Eigen::Index i = 0;
  for (double d : fallback) v[i++] = d;
  return v;
}

// cross-product matrix of the unit axis (0, -sin t, cos t): the z-axis
// rotation generator conjugated by an x-axis rotation of angle t
Matrix axis_generator(double theta, double omega) {
  const double ny = -std::sin(theta), nz = std::cos(theta);
  Matrix g = Matrix::Zero(3, 3);
  g(0, 1) = -nz;
  g(1, 0) = nz;
  g(0, 2) = ny;
  g(2, 0) = -ny;
  // nx = 0 term: g(1,2) = -nx, g(2,1) = nx
  return omega * g;
}

}  // namespace

Trajectory gen_fhn(const SystemSpec& spec) {
  if (!(spec.fhn_tau > 0.0)) throw domain_error("gen_fhn: tau must be positive");
  const int T = default_T(spec, 1000);
  const double dt = default_dt(spec, 0.2);
  const Vector x0 = default_x0(spec, {-0.5, 0.0});
  if (x0.size() != 2) throw dimension_error("gen_fhn: x0 must be 2D");
  const double a = spec.fhn_a, b = spec.fhn_b, tau = spec.fhn_tau, I = spec.fhn_I;
  return integrate_rk4(
      [a, b, tau, I](double, const Vector& x) {
        Vector d(2);
        d[0] = x[0] - x[0] * x[0] * x[0] / 3.0 - x[1] + I;
        d[1] = (x[0] + a - b * x[1]) / tau;
        return d;
      },
      x0, T, dt);
}

Trajectory gen_lorenz(const SystemSpec& spec) {
  const int T = default_T(spec, 1000);
  const double dt = default_dt(spec, 0.01);
  const Vector x0 = default_x0(spec, {1.0, 1.0, 1.0});
  if (x0.size() != 3) throw dimension_error("gen_lorenz: x0 must be 3D");
  const double s = spec.lorenz_sigma, r = spec.lorenz_rho, b = spec.lorenz_beta;
  return integrate_rk4(
      [s, r, b](double, const Vector& x) {
        Vector d(3);
        d[0] = s * (x[1] - x[0]);
        d[1] = x[0] * (r - x[2]) - x[1];
        d[2] = x[0] * x[1] - b * x[2];
        return d;
      },
      x0, T, dt);
}

Trajectory gen_spiral_speed(const SystemSpec& spec) {
  if (spec.spiral_speeds.empty()) throw domain_error("gen_spiral_speed: no speeds given");
  if (!(spec.spiral_segment > 0.0)) throw domain_error("gen_spiral_speed: segment must be positive");
  const double dt = default_dt(spec, 0.01);
  const double total = spec.spiral_segment * static_cast<double>(spec.spiral_speeds.size());
  const int T = default_T(spec, static_cast<int>(std::lround(total / dt)) + 1);
  const Vector x0 = default_x0(spec, {3.0, 0.0});
  if (x0.size() != 2) throw dimension_error("gen_spiral_speed: x0 must be 2D");

  Matrix A(2, 2);
  A << spec.spiral_decay, -spec.spiral_omega, spec.spiral_omega, spec.spiral_decay;
  const double seg = spec.spiral_segment;
  const auto speeds = spec.spiral_speeds;
  const auto speed_at = [&](double t) {
    auto idx = static_cast<long>(std::floor(t / seg + 1e-12));
    if (idx < 0) idx = 0;
    if (idx >= static_cast<long>(speeds.size())) idx = static_cast<long>(speeds.size()) - 1;
    return std::pair<long, double>{idx, speeds[static_cast<size_t>(idx)]};
  };

  Trajectory traj = integrate_rk4(
      [&](double t, const Vector& x) { return Vector(speed_at(t).second * (A * x)); }, x0, T, dt);
  traj.labels.resize(static_cast<size_t>(T));
  for (int i = 0; i < T; ++i) traj.labels[static_cast<size_t>(i)] = double(speed_at(i * dt).first);
  return traj;
}

Trajectory gen_rotating_center(const SystemSpec& spec) {
  if (spec.rotation_segments < 1) throw domain_error("gen_rotating_center: need >= 1 segment");
  if (!(spec.rotation_segment > 0.0))
    throw domain_error("gen_rotating_center: segment must be positive");
  const double dt = default_dt(spec, 0.05);
  const double total = spec.rotation_segment * spec.rotation_segments;
  const int T = default_T(spec, static_cast<int>(std::lround(total / dt)) + 1);
  const Vector x0 = default_x0(spec, {1.2, 0.7, -0.4});
  if (x0.size() != 3) throw dimension_error("gen_rotating_center: x0 must be 3D");

  Rng rng(spec.seed);
  std::vector<double> thetas(static_cast<size_t>(spec.rotation_segments));
  for (auto& th : thetas) th = rng.uniform(0.0, 2.0 * M_PI);

  const double seg = spec.rotation_segment;
  const auto theta_at = [&](double t) {
    auto idx = static_cast<long>(std::floor(t / seg + 1e-12));
    if (idx < 0) idx = 0;
    if (idx >= static_cast<long>(thetas.size())) idx = static_cast<long>(thetas.size()) - 1;
    return thetas[static_cast<size_t>(idx)];
  };

  // step with the generator frozen over each sample interval, so no rk4
  // stage ever mixes two segments; with segment a multiple of dt this
  // integrates the piecewise system exactly
  Trajectory traj;
  traj.dt = dt;
  traj.samples.resize(T, 3);
  traj.labels.resize(static_cast<size_t>(T));
  Vector x = x0;
  for (int i = 0; i < T; ++i) {
    traj.samples.row(i) = x.transpose();
    traj.labels[static_cast<size_t>(i)] = theta_at(i * dt);
    if (i + 1 == T) break;
    const Matrix gen = axis_generator(theta_at(i * dt), spec.rotation_omega);
    const Trajectory step = integrate_rk4([&](double, const Vector& v) { return Vector(gen * v); },
                                          x, 2, dt, i * dt);
    x = step.state(1);
  }
  return traj;
}

PermutationData gen_scaled_permutation(const SystemSpec& spec) {
  const int k = spec.perm_dim, M = spec.perm_ops, s = spec.perm_sparsity;
  const int R = spec.perm_restarts;
  if (k < 1 || M < 1) throw dimension_error("gen_scaled_permutation: dim and ops must be >= 1");
  if (s < 1 || s > M)
    throw domain_error("gen_scaled_permutation: sparsity must lie in [1, ops]");
  if (!(spec.perm_scale_lo > 0.0) || spec.perm_scale_hi < spec.perm_scale_lo)
    throw domain_error("gen_scaled_permutation: bad scale range");
  if (R < 1) throw domain_error("gen_scaled_permutation: restarts must be >= 1");
  if (R > 1 && spec.x0.size() > 0)
    throw domain_error("gen_scaled_permutation: x0 and restarts are exclusive");
  const int T = default_T(spec, 300);
  if (T < 2) throw dimension_error("gen_scaled_permutation: need T >= 2");

  Rng rng(spec.seed);
  PermutationData out;
  out.operators.reserve(static_cast<size_t>(M));
  std::vector<int> perm(static_cast<size_t>(k));
  for (int m = 0; m < M; ++m) {
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    Matrix P = Matrix::Zero(k, k);
    for (int j = 0; j < k; ++j)
      P(perm[static_cast<size_t>(j)], j) = rng.uniform(spec.perm_scale_lo, spec.perm_scale_hi);
    out.operators.push_back(P);
  }

  const auto sparse_start = [&]() {
    Vector x = Vector::Zero(k);
    const int nnz = std::max(1, (k + 4) / 5);
    std::vector<int> pos(static_cast<size_t>(k));
    std::iota(pos.begin(), pos.end(), 0);
    rng.shuffle(pos.begin(), pos.end());
    for (int i = 0; i < nnz; ++i)
      x[pos[static_cast<size_t>(i)]] = rng.uniform(spec.perm_scale_lo, spec.perm_scale_hi);
    return x;
  };

  // one run of T samples plus its T-1 mixture rows
  const auto simulate = [&](Vector x, Matrix& samples, Matrix& coeff) {
    samples.resize(T, k);
    samples.row(0) = x.transpose();
    coeff = Matrix::Zero(T - 1, M);
    std::vector<int> which(static_cast<size_t>(M));
    for (int t = 0; t + 1 < T; ++t) {
      std::iota(which.begin(), which.end(), 0);
      rng.shuffle(which.begin(), which.end());
      double sum = 0.0;
      Vector c = Vector::Zero(M);
      for (int i = 0; i < s; ++i) {
        const double w = rng.uniform(0.5, 1.5);
        c[which[static_cast<size_t>(i)]] = w;
        sum += w;
      }
      c /= sum;  // convex mixture; s = 1 with unit scales stays a pure orbit
      Matrix F = Matrix::Zero(k, k);
      for (int m = 0; m < M; ++m)
        if (c[m] != 0.0) F += c[m] * out.operators[static_cast<size_t>(m)];
      x = F * x;
      if (!x.allFinite())
        throw divergence_error("gen_scaled_permutation: non-finite state at step " +
                               std::to_string(t + 1));
      coeff.row(t) = c.transpose();
      samples.row(t + 1) = x.transpose();
    }
  };

  out.traj.dt = spec.dt > 0.0 ? spec.dt : 1.0;

  if (R == 1) {
    Vector x;
    if (spec.x0.size() > 0) {
      if (spec.x0.size() != k) throw dimension_error("gen_scaled_permutation: x0 dim mismatch");
      x = spec.x0;
    } else {
      x = sparse_start();
    }
    simulate(std::move(x), out.traj.samples, out.coefficients);
    return out;
  }

  // pooled restarts: unit-normalize every sample and fold the dropped scale
  // into the mixture row (x_{t+1} = sum_m c_m f_m x_t survives rescaling both
  // sides), then join runs with single zero rows; both transitions at a zero
  // row are exactly fit by c = 0, so the seams never bias the operators
  const int total = R * T + (R - 1);
  out.traj.samples = Matrix::Zero(total, k);
  out.coefficients = Matrix::Zero(total - 1, M);
  out.traj.labels.assign(static_cast<size_t>(total), -1.0);
  int at = 0;
  for (int r = 0; r < R; ++r) {
    Matrix samples, coeff;
    simulate(sparse_start(), samples, coeff);
    Vector norm(T);
    for (int t = 0; t < T; ++t) {
      norm[t] = samples.row(t).norm();
      if (norm[t] > 0.0) samples.row(t) /= norm[t];
    }
    for (int t = 0; t + 1 < T; ++t)
      if (norm[t + 1] > 0.0) coeff.row(t) *= norm[t] / norm[t + 1];
    out.traj.samples.block(at, 0, T, k) = samples;
    out.coefficients.block(at, 0, T - 1, M) = coeff;
    for (int t = 0; t < T; ++t)
      out.traj.labels[static_cast<size_t>(at + t)] = static_cast<double>(r);
    at += T + 1;  // skip the zero separator row
  }
  return out;
}

Trajectory generate(const SystemSpec& spec) {
  switch (spec.kind) {
    case SystemSpec::Kind::fhn:
      return gen_fhn(spec);
    case SystemSpec::Kind::lorenz:
      return gen_lorenz(spec);
    case SystemSpec::Kind::spiral_speed:
      return gen_spiral_speed(spec);
    case SystemSpec::Kind::rotating_center:
      return gen_rotating_center(spec);
    case SystemSpec::Kind::scaled_permutation:
      return gen_scaled_permutation(spec).traj;
  }
  throw domain_error("generate: unknown system kind");
}

}  // namespace dlds
