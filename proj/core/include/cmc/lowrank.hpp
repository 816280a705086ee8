#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace cmc {

using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;

/// Rank-k factorization U diag(sigma) V^T with orthonormal U (d_u x k) and
/// V (D x k) and sigma positive, non-increasing.
struct ThinFactors {
  Eigen::MatrixXd u;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd v;

  static ThinFactors zero(Eigen::Index rows, Eigen::Index cols);

  [[nodiscard]] int rank() const { return static_cast<int>(sigma.size()); }
  [[nodiscard]] Eigen::Index rows() const { return u.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return v.rows(); }
  [[nodiscard]] Eigen::MatrixXd dense() const;
  [[nodiscard]] double nuclear_norm() const { return sigma.sum(); }
  [[nodiscard]] double at(Eigen::Index i, Eigen::Index col) const {
    double s = 0.0;
    for (Eigen::Index k = 0; k < sigma.size(); ++k) s += u(i, k) * sigma(k) * v(col, k);
    return s;
  }
};

struct QrResult {
  Eigen::MatrixXd q;         ///< orthonormal basis of range(m)
  std::vector<int> dropped;  ///< input columns found dependent
  [[nodiscard]] bool rank_deficient() const { return !dropped.empty(); }
};

/// Modified Gram-Schmidt with one re-orthogonalization pass. A column whose
/// residual falls below drop_tol times the largest input column norm is
/// dropped. The implied R has a non-negative diagonal.
QrResult qr_orthonormalize(const MatrixRef& m, double drop_tol = 1e-10);

/// Singular value thresholding through a full thin SVD:
/// U diag((sigma_i - tau)_+) V^T, keeping sigma_i > tau only.
ThinFactors svt_exact(const MatrixRef& z, double tau);

struct PowerMethodResult {
  Eigen::MatrixXd q;
  int iterations = 0;
  bool converged = false;  ///< false when the iteration cap was reached
  bool refilled = false;   ///< a rank-deficient block was topped up with random columns
};

/// Block power method on Z Z^T warm-started from Z r0; stops once
/// ||Q_{t+1} Q_{t+1}^T - Q_t Q_t^T||_F <= delta.
PowerMethodResult power_method(const MatrixRef& z, const MatrixRef& r0, double delta,
                               int max_iters = 100, std::uint64_t seed = 0);

struct ApproxSvtResult {
  ThinFactors factors;
  PowerMethodResult power;
  int width = 0;  ///< columns of the warm start actually used
};

/// SVT_lambda(Z) ~ Q SVT_lambda(Q^T Z) with Q from the power method.
ApproxSvtResult approx_svt(const MatrixRef& z, const MatrixRef& r0, double lambda, double delta,
                           int max_iters = 100, std::uint64_t seed = 0);

struct Rank1 {
  Eigen::VectorXd u;
  double sigma = 0.0;
  Eigen::VectorXd v;
};

/// Leading singular triplet by power iteration. Throws NumericalError on a
/// zero matrix.
Rank1 rank1_svd(const MatrixRef& y, double tol = 1e-13, int max_iters = 200000);

/// `basis` followed by `extra` orthonormal columns from a Gaussian draw
/// (fewer when rows run out).
Eigen::MatrixXd random_orthonormal_completion(const MatrixRef& basis, Eigen::Index rows,
                                              int extra, std::uint64_t seed);

}  // namespace cmc
