#pragma once

#include <vector>

#include "cmc/data.hpp"
#include "cmc/objective.hpp"

namespace cmc {

/// 2c (U_gamma v K)(sqrt(mu) + log(d_u v D)^{3/2}) / (d_u D), with mu the
/// empirical marginal bound, U_gamma^2 the largest curvature bound and K the
/// largest kappa over the families.
double lambda_heuristic(const ObservationSet& obs, double constant_c = 1.0);

/// 2c rho (sqrt(mu) + sqrt(log(d_u v D))) / (d_u D), rho = max_v rho_v.
double lambda_general_loss(const ObservationSet& obs, const std::vector<LipschitzLoss>& losses,
                           double constant_c = 1.0);

/// ||grad L_Y(M)||, the quantity the heuristic has to dominate (times two).
double gradient_spectral_norm(const ObservationSet& obs, const MatrixRef& m);

struct CalibrationPoint {
  double constant_c = 0.0;
  double lambda = 0.0;
  double required = 0.0;  ///< 2 ||grad L_Y(M)||
  [[nodiscard]] bool dominates() const { return lambda >= required; }
};

/// Evaluates the heuristic over a grid of constants against a known truth.
std::vector<CalibrationPoint> lambda_calibration_sweep(
    const ObservationSet& obs, const MatrixRef& truth,
    const std::vector<double>& constants = {0.25, 0.5, 1.0, 2.0, 4.0});

enum class BoundKind { ExpFamily, General };

struct BoundParams {
  double rank = 1.0;
  double p = 1.0;
  double d_u = 1.0;
  double D = 1.0;
  double mu = 1.0;
  double gamma = 1.0;
  double l_sq = 1.0;
  double u_sq = 1.0;
  double kappa = 1.0;
  double rho = 1.0;
  double varsigma = 1.0;
  double constant_c = 1.0;
  friend bool operator==(const BoundParams&, const BoundParams&) = default;
};

/// Reference rate curves.
///
/// ExpFamily: normalized squared Frobenius error bound
///   c rk / (p^2 d_u D) (gamma^2 + (U v K)^2 / L^4)(mu + log^3(d_u v D)).
/// General: excess-risk bound
///   c rk / p (rho^2 + rho^{3/2} sqrt(gamma / varsigma))(mu + log(d_u v D)) / (d_u D).
double theory_bound(BoundKind kind, const BoundParams& params);

}  // namespace cmc
