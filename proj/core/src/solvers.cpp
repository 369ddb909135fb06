#include "dlds/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace dlds {

namespace {

void check_system(const Matrix& a, const Vector& b, const char* who) {
  if (a.rows() == 0 || a.cols() == 0) throw dimension_error(std::string(who) + ": empty design");
  if (a.rows() != b.size())
    throw dimension_error(std::string(who) + ": design has " + std::to_string(a.rows()) +
                          " rows but target has " + std::to_string(b.size()));
  if (!a.allFinite() || !b.allFinite())
    throw domain_error(std::string(who) + ": non-finite entries");
}

double l1_norm(const Vector& v) { return v.lpNorm<1>(); }

// power iteration approaches sigma_max from below; the relative pad keeps
// the 1/L step inside the regime where descent is guaranteed
double lipschitz(const Matrix& a) {
  const double s = operator_norm(a) * (1.0 + 1e-8);
  return s * s;
}

}  // namespace

Vector soft_threshold(const Vector& v, double t) {
  if (!(t >= 0.0)) throw domain_error("soft_threshold: threshold must be >= 0");
  if (!v.allFinite()) throw domain_error("soft_threshold: non-finite entries");
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double m = std::abs(v[i]) - t;
    out[i] = m > 0.0 ? (v[i] > 0.0 ? m : -m) : 0.0;
  }
  return out;
}

Vector project_l1_ball(const Vector& v, double tau) {
  if (!(tau >= 0.0)) throw domain_error("project_l1_ball: radius must be >= 0");
  if (!v.allFinite()) throw domain_error("project_l1_ball: non-finite entries");
  if (tau == 0.0) return Vector::Zero(v.size());
  if (l1_norm(v) <= tau) return v;

  // threshold from the sorted magnitudes, then shrink
  std::vector<double> u(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) u[static_cast<size_t>(i)] = std::abs(v[i]);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, theta = 0.0;
  for (size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const double cand = (cum - tau) / static_cast<double>(j + 1);
    if (u[j] - cand > 0.0)
      theta = cand;
    else
      break;
  }
  return soft_threshold(v, theta);
}

LassoResult solve_lasso_penalized(const Matrix& a, const Vector& b, double weight, int max_iter,
                                  double tol) {
  check_system(a, b, "solve_lasso_penalized");
  if (!(weight >= 0.0)) throw domain_error("solve_lasso_penalized: weight must be >= 0");
  if (max_iter < 1) throw domain_error("solve_lasso_penalized: max_iter must be >= 1");

  const Eigen::Index n = a.cols();
  LassoResult res;
  const double lip = lipschitz(a);
  if (lip == 0.0) {
    // zero design: the l1 term makes 0 the minimizer
    res.c = Vector::Zero(n);
    res.report = {true, 0, 0.5 * b.squaredNorm()};
    return res;
  }

  // stationarity excess of the l1 subdifferential inclusion; zero exactly
  // at a minimizer, so it doubles as the stopping rule the report promises
  const auto kkt_excess = [&](const Vector& c, const Vector& grad_c) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      const double v = c[i] == 0.0 ? std::abs(grad_c[i]) - weight
                                   : std::abs(grad_c[i] + weight * (c[i] > 0.0 ? 1.0 : -1.0));
      worst = std::max(worst, v);
    }
    return worst;
  };

  Vector x = Vector::Zero(n), y = x;
  double fx = 0.5 * b.squaredNorm();
  double t = 1.0;
  bool converged = false;
  int it = 0;
  while (it < max_iter) {
    ++it;
    const Vector grad = a.transpose() * (a * y - b);
    const Vector z = soft_threshold(y - grad / lip, weight / lip);
    const Vector rz = a * z - b;
    const double fz = 0.5 * rz.squaredNorm() + weight * l1_norm(z);
    if (fz <= fx) {
      const Vector x_prev = x;
      x = z;
      fx = fz;
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = x + ((t - 1.0) / t_next) * (x - x_prev);
      t = t_next;
      if (kkt_excess(x, a.transpose() * rz) <= tol) {
        converged = true;
        break;
      }
    } else {
      // momentum overshot; restart so the next sweep is a plain
      // descent step from the best iterate
      t = 1.0;
      y = x;
    }
  }
  res.c = x;
  res.report = {converged, it, fx};
  return res;
}

LassoResult solve_lasso_constrained(const Matrix& a, const Vector& b, double tau, int max_iter,
                                    double tol) {
  check_system(a, b, "solve_lasso_constrained");
  if (!(tau >= 0.0)) throw domain_error("solve_lasso_constrained: budget must be >= 0");
  if (max_iter < 1) throw domain_error("solve_lasso_constrained: max_iter must be >= 1");

  const Eigen::Index n = a.cols();
  LassoResult res;
  if (tau == 0.0) {
    res.c = Vector::Zero(n);
    res.report = {true, 0, b.norm()};
    return res;
  }
  const double lip = lipschitz(a);
  if (lip == 0.0) {
    res.c = Vector::Zero(n);
    res.report = {true, 0, b.norm()};
    return res;
  }

  Vector c = Vector::Zero(n);
  bool converged = false;
  int it = 0;
  while (it < max_iter) {
    ++it;
    const Vector grad = a.transpose() * (a * c - b);
    const Vector next = project_l1_ball(c - grad / lip, tau);
    const double residual = (next - c).lpNorm<Eigen::Infinity>();
    c = next;
    if (residual <= tol) {
      converged = true;
      break;
    }
  }
  res.c = c;
  res.report = {converged, it, (a * c - b).norm()};
  return res;
}

Matrix pseudo_inverse(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) throw dimension_error("pseudo_inverse: empty matrix");
  if (!a.allFinite()) throw domain_error("pseudo_inverse: non-finite entries");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? 1e-12 * sv(0) : 0.0;
  Vector inv = Vector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Vector solve_pseudo_inverse(const Matrix& a, const Vector& b) {
  check_system(a, b, "solve_pseudo_inverse");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? 1e-12 * sv(0) : 0.0;
  Vector proj = svd.matrixU().transpose() * b;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    proj(i) = (sv(i) > cutoff && sv(i) > 0.0) ? proj(i) / sv(i) : 0.0;
  return svd.matrixV() * proj;
}

}  // namespace dlds
