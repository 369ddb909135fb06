#include "dlds/metrics.hpp"

#include <cmath>

#include "dlds/errors.hpp"

namespace dlds {

namespace {

void check_pair(Eigen::Index na, Eigen::Index nb, const char* who) {
  if (na != nb)
    throw dimension_error(std::string(who) + ": length mismatch " + std::to_string(na) + " vs " +
                          std::to_string(nb));
  if (na < 2) throw dimension_error(std::string(who) + ": need at least 2 samples");
}

// column-major flatten of a T x k matrix is exactly the channel-concatenated series
Vector flatten(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

}  // namespace

double pearson_r(const Vector& a, const Vector& b) {
  check_pair(a.size(), b.size(), "pearson_r");
  if (!a.allFinite() || !b.allFinite()) throw domain_error("pearson_r: non-finite entries");
  const double ma = a.mean(), mb = b.mean();
  const Vector da = a.array() - ma, db = b.array() - mb;
  const double va = da.squaredNorm(), vb = db.squaredNorm();
  if (va == 0.0 || vb == 0.0)
    throw domain_error("pearson_r: zero variance, correlation undefined");
  return da.dot(db) / std::sqrt(va * vb);
}

double r2_score(const Vector& truth, const Vector& pred) {
  check_pair(truth.size(), pred.size(), "r2_score");
  if (!truth.allFinite() || !pred.allFinite()) throw domain_error("r2_score: non-finite entries");
  const double mt = truth.mean();
  const double ss_tot = (truth.array() - mt).matrix().squaredNorm();
  if (ss_tot == 0.0) throw domain_error("r2_score: constant truth, score undefined");
  const double ss_res = (truth - pred).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

double rmse_relative(const Matrix& truth, const Matrix& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
    throw dimension_error("rmse_relative: shape mismatch");
  if (truth.size() == 0) throw dimension_error("rmse_relative: empty input");
  if (!truth.allFinite() || !pred.allFinite())
    throw domain_error("rmse_relative: non-finite entries");
  const double denom = truth.norm();
  if (denom == 0.0) throw domain_error("rmse_relative: zero reference, error undefined");
  return (truth - pred).norm() / denom;
}

EvalReport evaluate_forecast(const Matrix& truth, const Matrix& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
    throw dimension_error("evaluate_forecast: shape mismatch");
  EvalReport rep;
  const Vector ft = flatten(truth), fp = flatten(pred);
  rep.pearson = pearson_r(ft, fp);
  rep.r2 = r2_score(ft, fp);
  rep.rmse = rmse_relative(truth, pred);
  for (Eigen::Index j = 0; j < truth.cols(); ++j) {
    const Vector tj = truth.col(j), pj = pred.col(j);
    rep.pearson_per_channel.push_back(pearson_r(tj, pj));
    rep.r2_per_channel.push_back(r2_score(tj, pj));
    rep.rmse_per_channel.push_back(rmse_relative(tj, pj));
  }
  return rep;
}

AlignResult align_dictionaries(const std::vector<Matrix>& learned,
                               const std::vector<Matrix>& reference) {
  if (learned.empty() || reference.empty())
    throw dimension_error("align_dictionaries: empty operator set");
  const Eigen::Index r = learned[0].rows(), c = learned[0].cols();
  for (const auto& m : learned)
    if (m.rows() != r || m.cols() != c)
      throw dimension_error("align_dictionaries: ragged learned set");
  for (const auto& m : reference)
    if (m.rows() != r || m.cols() != c)
      throw dimension_error("align_dictionaries: reference shape mismatch");

  const size_t nl = learned.size(), nr = reference.size();
  Matrix sim(nl, nr);
  for (size_t i = 0; i < nl; ++i) {
    const double ni = learned[i].norm();
    for (size_t j = 0; j < nr; ++j) {
      const double nj = reference[j].norm();
      sim(i, j) = (ni == 0.0 || nj == 0.0)
                      ? 0.0
                      : std::abs((learned[i].array() * reference[j].array()).sum()) / (ni * nj);
    }
  }

  AlignResult out;
  out.assignment.assign(nl, -1);
  out.scores.assign(nl, 0.0);
  std::vector<bool> used_l(nl, false), used_r(nr, false);
  const size_t pairs = std::min(nl, nr);
  for (size_t k = 0; k < pairs; ++k) {
    double best = -1.0;
    size_t bi = 0, bj = 0;
    for (size_t i = 0; i < nl; ++i) {
      if (used_l[i]) continue;
      for (size_t j = 0; j < nr; ++j) {
        if (used_r[j]) continue;
        if (sim(i, j) > best) {
          best = sim(i, j);
          bi = i;
          bj = j;
        }
      }
    }
    used_l[bi] = true;
    used_r[bj] = true;
    out.assignment[bi] = static_cast<int>(bj);
    out.scores[bi] = best;
  }
  double total = 0.0;
  int counted = 0;
  for (size_t i = 0; i < nl; ++i)
    if (out.assignment[i] >= 0) {
      total += out.scores[i];
      ++counted;
    }
  out.mean_score = counted > 0 ? total / counted : 0.0;
  return out;
}

}  // namespace dlds
