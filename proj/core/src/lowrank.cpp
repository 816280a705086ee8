#include "cmc/lowrank.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <random>

#include "cmc/errors.hpp"
#include "cmc/expfam.hpp"

namespace cmc {

ThinFactors ThinFactors::zero(Eigen::Index rows, Eigen::Index cols) {
  return {Eigen::MatrixXd(rows, 0), Eigen::VectorXd(0), Eigen::MatrixXd(cols, 0)};
}

Eigen::MatrixXd ThinFactors::dense() const {
  if (sigma.size() == 0) return Eigen::MatrixXd::Zero(u.rows(), v.rows());
  return u * sigma.asDiagonal() * v.transpose();
}

QrResult qr_orthonormalize(const MatrixRef& m, double drop_tol) {
  QrResult out;
  const Eigen::Index n = m.rows();
  double scale = 0.0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) scale = std::max(scale, m.col(c).norm());
  Eigen::MatrixXd q(n, std::min(n, m.cols()));
  Eigen::Index kept = 0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    Eigen::VectorXd w = m.col(c);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < kept; ++k) w -= q.col(k).dot(w) * q.col(k);
    }
    const double r = w.norm();
    if (kept == n || scale == 0.0 || r <= drop_tol * scale) {
      out.dropped.push_back(static_cast<int>(c));
      continue;
    }
    q.col(kept++) = w / r;
  }
  out.q = q.leftCols(kept);
  return out;
}

ThinFactors svt_exact(const MatrixRef& z, double tau) {
  if (tau < 0.0) throw ConfigError("threshold must be non-negative");
  if (!z.allFinite()) throw NumericalError("non-finite entries in SVT input");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD did not converge");
  const Eigen::VectorXd& s = svd.singularValues();
  Eigen::Index k = 0;
  while (k < s.size() && s(k) > tau) ++k;
  return {svd.matrixU().leftCols(k), (s.head(k).array() - tau).matrix(),
          svd.matrixV().leftCols(k)};
}

Eigen::MatrixXd random_orthonormal_completion(const MatrixRef& basis, Eigen::Index rows,
                                              int extra, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x72616e64ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::Index have = basis.cols();
  const Eigen::Index want = std::min<Eigen::Index>(rows, have + extra);
  Eigen::MatrixXd q(rows, want);
  if (have > 0) q.leftCols(have) = basis;
  Eigen::Index kept = have;
  for (int attempt = 0; kept < want && attempt < 4 * (extra + 1); ++attempt) {
    Eigen::VectorXd w(rows);
    for (Eigen::Index r = 0; r < rows; ++r) w(r) = gauss(rng);
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < kept; ++k) w -= q.col(k).dot(w) * q.col(k);
    }
    const double norm = w.norm();
    if (norm < 1e-8) continue;
    q.col(kept++) = w / norm;
  }
  return q.leftCols(kept);
}

namespace {

// ||Q1 Q1^T - Q0 Q0^T||_F for orthonormal Q0, Q1.
double projector_distance(const Eigen::MatrixXd& q1, const Eigen::MatrixXd& q0) {
  if (q0.cols() == 0) return std::sqrt(static_cast<double>(q1.cols()));
  const double cross = (q1.transpose() * q0).squaredNorm();
  const double sq = static_cast<double>(q1.cols() + q0.cols()) - 2.0 * cross;
  return std::sqrt(std::max(sq, 0.0));
}

}  // namespace

PowerMethodResult power_method(const MatrixRef& z, const MatrixRef& r0, double delta,
                               int max_iters, std::uint64_t seed) {
  if (r0.cols() < 1) throw ConfigError("power method needs at least one warm-start column");
  if (r0.rows() != z.cols()) throw ConfigError("warm-start block has the wrong row count");
  if (max_iters < 1) throw ConfigError("power method needs at least one iteration");
  const Eigen::Index width = std::min<Eigen::Index>(r0.cols(), std::min(z.rows(), z.cols()));

  PowerMethodResult out;
  Eigen::MatrixXd w = z * r0;
  Eigen::MatrixXd q_prev(z.rows(), 0);
  for (int t = 1; t <= max_iters; ++t) {
    QrResult qr = qr_orthonormalize(w);
    Eigen::MatrixXd q = std::move(qr.q);
    if (q.cols() < width) {
      q = random_orthonormal_completion(q, z.rows(), static_cast<int>(width - q.cols()),
                                        seed + static_cast<std::uint64_t>(t));
      out.refilled = true;
    }
    out.iterations = t;
    if (projector_distance(q, q_prev) <= delta) {
      out.q = std::move(q);
      out.converged = true;
      return out;
    }
    w = z * (z.transpose() * q);
    q_prev = std::move(q);
  }
  out.q = std::move(q_prev);
  return out;
}

ApproxSvtResult approx_svt(const MatrixRef& z, const MatrixRef& r0, double lambda, double delta,
                           int max_iters, std::uint64_t seed) {
  if (lambda < 0.0) throw ConfigError("threshold must be non-negative");
  ApproxSvtResult out;
  out.power = power_method(z, r0, delta, max_iters, seed);
  const Eigen::MatrixXd& q = out.power.q;
  out.width = static_cast<int>(q.cols());
  const Eigen::MatrixXd small = q.transpose() * z;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(small, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD did not converge");
  const Eigen::VectorXd& s = svd.singularValues();
  Eigen::Index k = 0;
  while (k < s.size() && s(k) > lambda) ++k;
  out.factors.u = q * svd.matrixU().leftCols(k);
  out.factors.sigma = (s.head(k).array() - lambda).matrix();
  out.factors.v = svd.matrixV().leftCols(k);
  return out;
}

Rank1 rank1_svd(const MatrixRef& y, double tol, int max_iters) {
  if (y.size() == 0 || y.cwiseAbs().maxCoeff() == 0.0) {
    throw NumericalError("rank-1 SVD of a zero matrix");
  }
  Eigen::Index best = 0;
  y.rowwise().squaredNorm().maxCoeff(&best);
  Eigen::VectorXd v = y.row(best).transpose();
  v.normalize();
  Eigen::VectorXd u = y * v;
  double sigma = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    u = y * v;
    u.normalize();
    Eigen::VectorXd next = y.transpose() * u;
    const double estimate = next.norm();
    v = next / estimate;
    if (std::abs(estimate - sigma) <= tol * estimate) {
      sigma = estimate;
      break;
    }
    sigma = estimate;
  }
  return {u, sigma, v};
}

}  // namespace cmc
