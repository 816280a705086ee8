#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <vector>

#include "cmc/data.hpp"

namespace cmc {

using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Per-source loss for the distribution-free path. All three built-ins are
/// 1-Lipschitz in the prediction.
struct LipschitzLoss {
  enum class Kind { Hinge, Logistic, Quantile };
  Kind kind = Kind::Logistic;
  double tau = 0.5;  ///< quantile level, Quantile only
  double rho = 1.0;  ///< Lipschitz constant in the prediction

  static LipschitzLoss hinge() { return {Kind::Hinge, 0.5, 1.0}; }
  static LipschitzLoss logistic() { return {Kind::Logistic, 0.5, 1.0}; }
  static LipschitzLoss quantile(double tau) { return {Kind::Quantile, tau, 1.0}; }

  void validate() const;
  friend bool operator==(const LipschitzLoss&, const LipschitzLoss&) = default;
};

/// l(y, x); hinge and logistic take labels in {-1, +1} (0 is read as -1).
double loss_value(const LipschitzLoss& loss, double y, double x);
/// One element of the subdifferential in x. Hinge returns 0 at the kink.
double loss_subgradient(const LipschitzLoss& loss, double y, double x);

/// -(1 / (d_u D)) sum_Omega (y W_ij - G^v(W_ij)).
double neg_log_likelihood(const ObservationSet& obs, const MatrixRef& w);
/// Gradient of neg_log_likelihood; supported on Omega only.
SparseMatrix grad_neg_log_likelihood(const ObservationSet& obs, const MatrixRef& w);
/// max_v sup G''_v / (d_u D) over the curvature interval of every family.
double lipschitz_grad_constant(const ObservationSet& obs);

/// (1 / (d_u D)) sum_Omega l^v(y, W_ij).
double empirical_risk(const ObservationSet& obs, const MatrixRef& w,
                      const std::vector<LipschitzLoss>& losses);
/// A member of the subdifferential of empirical_risk.
SparseMatrix risk_subgradient(const ObservationSet& obs, const MatrixRef& w,
                              const std::vector<LipschitzLoss>& losses);

/// Sum of singular values.
double nuclear_norm(const MatrixRef& w);

/// Largest singular value of a sparse matrix by power iteration on A^T A.
double spectral_norm(const SparseMatrix& a, double tol = 1e-8, int max_iters = 10000);

/// Which data term an objective uses.
struct DataTerm {
  enum class Mode { Likelihood, Risk };
  Mode mode = Mode::Likelihood;
  std::vector<LipschitzLoss> losses;  ///< one per source in Risk mode
  /// Moreau smoothing of the quantile loss inside solvers; 0 evaluates the
  /// plain loss.
  double quantile_smoothing = 0.0;

  static DataTerm likelihood() { return {}; }
  static DataTerm risk(std::vector<LipschitzLoss> losses, double smoothing = 0.0) {
    return {Mode::Risk, std::move(losses), smoothing};
  }
};

struct ObjectiveValue {
  double data_term = 0.0;
  double penalty = 0.0;  ///< nuclear norm
  double total = 0.0;    ///< data_term + lambda * penalty
  double lambda = 0.0;
};

ObjectiveValue objective_value(const ObservationSet& obs, const MatrixRef& w, double lambda,
                               const DataTerm& term = DataTerm::likelihood());

/// (1 / (d_u D)) sum_Omega d_{G^v}(w_hat, w_true).
double bregman_fit(const ObservationSet& obs, const MatrixRef& w_hat, const MatrixRef& w_true);

/// Data term evaluated from per-observation predictions, as the solvers
/// need it: predictions come from dense iterates or from thin factors.
class DataFit {
 public:
  DataFit(const ObservationSet& obs, DataTerm term);

  [[nodiscard]] const ObservationSet& observations() const { return *obs_; }
  [[nodiscard]] const DataTerm& term() const { return term_; }

  /// predictions[k] is the current value at obs.entries[k].
  [[nodiscard]] double value(const std::vector<double>& predictions) const;
  /// Per-observation partial derivatives, already divided by d_u D.
  void gradient(const std::vector<double>& predictions, std::vector<double>& out) const;
  /// Lipschitz constant of the gradient map in Frobenius norm.
  [[nodiscard]] double lipschitz() const;

 private:
  [[nodiscard]] double entry_value(std::size_t k, double x) const;
  [[nodiscard]] double entry_derivative(std::size_t k, double x) const;

  const ObservationSet* obs_;
  DataTerm term_;
  std::vector<double> labels_;
};

/// Values of w at each observed entry, in observation order.
std::vector<double> predictions(const ObservationSet& obs, const MatrixRef& w);

}  // namespace cmc
