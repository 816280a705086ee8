#include "cmc/tuning.hpp"

#include <algorithm>
#include <cmath>

#include "cmc/errors.hpp"

namespace cmc {

double lambda_heuristic(const ObservationSet& obs, double constant_c) {
  if (!(constant_c > 0.0)) throw ConfigError("lambda constant must be positive");
  if (static_cast<int>(obs.families.size()) != obs.layout.sources()) {
    throw ConfigError("lambda heuristic needs one family per source");
  }
  double u_sq = 0.0;
  double kappa = 0.0;
  for (const auto& f : obs.families) {
    u_sq = std::max(u_sq, strong_convexity_bounds(f).u_sq);
    kappa = std::max(kappa, f.kappa);
  }
  const double d_u = obs.layout.rows();
  const double d = obs.layout.total_cols();
  const double log_term = std::pow(std::log(std::max(d_u, d)), 1.5);
  return 2.0 * constant_c * std::max(std::sqrt(u_sq), kappa) *
         (std::sqrt(estimate_mu(obs)) + log_term) / (d_u * d);
}

double lambda_general_loss(const ObservationSet& obs, const std::vector<LipschitzLoss>& losses,
                           double constant_c) {
  if (!(constant_c > 0.0)) throw ConfigError("lambda constant must be positive");
  if (losses.empty()) throw ConfigError("at least one loss is required");
  double rho = 0.0;
  for (const auto& l : losses) {
    l.validate();
    rho = std::max(rho, l.rho);
  }
  const double d_u = obs.layout.rows();
  const double d = obs.layout.total_cols();
  return 2.0 * constant_c * rho *
         (std::sqrt(estimate_mu(obs)) + std::sqrt(std::log(std::max(d_u, d)))) / (d_u * d);
}

double gradient_spectral_norm(const ObservationSet& obs, const MatrixRef& m) {
  return spectral_norm(grad_neg_log_likelihood(obs, m));
}

std::vector<CalibrationPoint> lambda_calibration_sweep(const ObservationSet& obs,
                                                       const MatrixRef& truth,
                                                       const std::vector<double>& constants) {
  const double required = 2.0 * gradient_spectral_norm(obs, truth);
  std::vector<CalibrationPoint> out;
  out.reserve(constants.size());
  for (double c : constants) out.push_back({c, lambda_heuristic(obs, c), required});
  return out;
}

double theory_bound(BoundKind kind, const BoundParams& b) {
  const bool positive = b.rank > 0 && b.p > 0 && b.d_u > 0 && b.D > 0 && b.mu >= 0 &&
                        b.gamma > 0 && b.constant_c > 0;
  if (!positive) throw ConfigError("bound parameters must be positive");
  const double n = b.d_u * b.D;
  const double log_dim = std::log(std::max(b.d_u, b.D));
  if (kind == BoundKind::ExpFamily) {
    if (!(b.l_sq > 0 && b.u_sq > 0 && b.kappa > 0)) {
      throw ConfigError("curvature bounds and kappa must be positive");
    }
    const double spread = std::max(std::sqrt(b.u_sq), b.kappa);
    const double shape = b.gamma * b.gamma + spread * spread / (b.l_sq * b.l_sq);
    return b.constant_c * b.rank / (b.p * b.p * n) * shape * (b.mu + std::pow(log_dim, 3));
  }
  if (!(b.rho > 0 && b.varsigma > 0)) throw ConfigError("rho and varsigma must be positive");
  const double shape = b.rho * b.rho + std::pow(b.rho, 1.5) * std::sqrt(b.gamma / b.varsigma);
  return b.constant_c / b.p * b.rank * shape * (b.mu + log_dim) / n;
}

}  // namespace cmc
