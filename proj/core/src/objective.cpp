#include "cmc/objective.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

#include "cmc/errors.hpp"

namespace cmc {

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double sign_label(double y) {
  if (y == 1.0) return 1.0;
  if (y == -1.0 || y == 0.0) return -1.0;
  throw DomainError("label " + std::to_string(y) + " is not in {-1, +1} (or {0, 1})");
}

bool needs_label(const LipschitzLoss& loss) { return loss.kind != LipschitzLoss::Kind::Quantile; }

void require_families(const ObservationSet& obs) {
  if (static_cast<int>(obs.families.size()) != obs.layout.sources()) {
    throw ConfigError("likelihood data term needs one family per source");
  }
}

void require_losses(const ObservationSet& obs, const std::vector<LipschitzLoss>& losses) {
  if (static_cast<int>(losses.size()) != obs.layout.sources()) {
    throw ConfigError("risk data term needs one loss per source");
  }
  for (const auto& l : losses) l.validate();
}

SparseMatrix to_sparse(const ObservationSet& obs, const std::vector<double>& per_entry) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const Observation& o = obs.entries[k];
    trip.emplace_back(o.i, obs.column(o), per_entry[k]);
  }
  SparseMatrix g(obs.layout.rows(), obs.layout.total_cols());
  g.setFromTriplets(trip.begin(), trip.end());
  return g;
}

// Moreau envelope of z -> z (tau - 1{z <= 0}) with parameter s.
double smoothed_quantile(double tau, double s, double z) {
  if (z > s * tau) return tau * z - 0.5 * s * tau * tau;
  if (z < s * (tau - 1.0)) return (tau - 1.0) * z - 0.5 * s * (tau - 1.0) * (tau - 1.0);
  return 0.5 * z * z / s;
}

double smoothed_quantile_slope(double tau, double s, double z) {
  return std::clamp(z / s, tau - 1.0, tau);
}

}  // namespace

void LipschitzLoss::validate() const {
  if (!(rho > 0.0)) throw ConfigError("loss Lipschitz constant must be positive");
  if (kind == Kind::Quantile && !(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("quantile level must lie in (0, 1)");
  }
}

double loss_value(const LipschitzLoss& loss, double y, double x) {
  switch (loss.kind) {
    case LipschitzLoss::Kind::Hinge: return std::max(0.0, 1.0 - sign_label(y) * x);
    case LipschitzLoss::Kind::Logistic: return softplus(-sign_label(y) * x);
    case LipschitzLoss::Kind::Quantile: {
      const double z = x - y;
      return z * (loss.tau - (z <= 0.0 ? 1.0 : 0.0));
    }
  }
  return 0.0;
}

double loss_subgradient(const LipschitzLoss& loss, double y, double x) {
  switch (loss.kind) {
    case LipschitzLoss::Kind::Hinge: {
      const double s = sign_label(y);
      return 1.0 - s * x > 0.0 ? -s : 0.0;
    }
    case LipschitzLoss::Kind::Logistic: {
      const double s = sign_label(y);
      return -s * sigmoid(-s * x);
    }
    case LipschitzLoss::Kind::Quantile: return x - y > 0.0 ? loss.tau : loss.tau - 1.0;
  }
  return 0.0;
}

std::vector<double> predictions(const ObservationSet& obs, const MatrixRef& w) {
  if (w.rows() != obs.layout.rows() || w.cols() != obs.layout.total_cols()) {
    throw DataError("matrix shape does not match the observation layout");
  }
  std::vector<double> out(obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const Observation& o = obs.entries[k];
    out[k] = w(o.i, obs.column(o));
  }
  return out;
}

DataFit::DataFit(const ObservationSet& obs, DataTerm term) : obs_(&obs), term_(std::move(term)) {
  if (term_.mode == DataTerm::Mode::Likelihood) {
    require_families(obs);
    return;
  }
  require_losses(obs, term_.losses);
  if (term_.quantile_smoothing < 0.0) throw ConfigError("quantile smoothing must be >= 0");
  labels_.resize(obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const Observation& o = obs.entries[k];
    const auto& loss = term_.losses[static_cast<std::size_t>(o.v)];
    labels_[k] = needs_label(loss) ? sign_label(o.y) : o.y;
  }
}

double DataFit::entry_value(std::size_t k, double x) const {
  const Observation& o = obs_->entries[k];
  const auto v = static_cast<std::size_t>(o.v);
  if (term_.mode == DataTerm::Mode::Likelihood) {
    return g_value(obs_->families[v], x) - o.y * x;
  }
  const LipschitzLoss& loss = term_.losses[v];
  if (loss.kind == LipschitzLoss::Kind::Quantile && term_.quantile_smoothing > 0.0) {
    return smoothed_quantile(loss.tau, term_.quantile_smoothing, x - labels_[k]);
  }
  return loss_value(loss, labels_[k], x);
}

double DataFit::entry_derivative(std::size_t k, double x) const {
  const Observation& o = obs_->entries[k];
  const auto v = static_cast<std::size_t>(o.v);
  if (term_.mode == DataTerm::Mode::Likelihood) {
    return g_prime(obs_->families[v], x) - o.y;
  }
  const LipschitzLoss& loss = term_.losses[v];
  if (loss.kind == LipschitzLoss::Kind::Quantile && term_.quantile_smoothing > 0.0) {
    return smoothed_quantile_slope(loss.tau, term_.quantile_smoothing, x - labels_[k]);
  }
  return loss_subgradient(loss, labels_[k], x);
}

double DataFit::value(const std::vector<double>& pred) const {
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) sum += entry_value(k, pred[k]);
  return sum / obs_->layout.size();
}

void DataFit::gradient(const std::vector<double>& pred, std::vector<double>& out) const {
  out.resize(pred.size());
  const double scale = 1.0 / obs_->layout.size();
  for (std::size_t k = 0; k < pred.size(); ++k) out[k] = entry_derivative(k, pred[k]) * scale;
}

double DataFit::lipschitz() const {
  double curvature = 0.0;
  if (term_.mode == DataTerm::Mode::Likelihood) {
    for (const auto& f : obs_->families) {
      curvature = std::max(curvature, strong_convexity_bounds(f).u_sq);
    }
  } else {
    for (const auto& loss : term_.losses) {
      switch (loss.kind) {
        case LipschitzLoss::Kind::Logistic: curvature = std::max(curvature, 0.25); break;
        case LipschitzLoss::Kind::Quantile:
          if (term_.quantile_smoothing > 0.0) {
            curvature = std::max(curvature, 1.0 / term_.quantile_smoothing);
            break;
          }
          [[fallthrough]];
        case LipschitzLoss::Kind::Hinge:
          throw ConfigError("loss has no Lipschitz-continuous gradient; use logistic or a "
                            "smoothed quantile loss");
      }
    }
  }
  return curvature / obs_->layout.size();
}

double neg_log_likelihood(const ObservationSet& obs, const MatrixRef& w) {
  DataFit fit(obs, DataTerm::likelihood());
  return fit.value(predictions(obs, w));
}

SparseMatrix grad_neg_log_likelihood(const ObservationSet& obs, const MatrixRef& w) {
  DataFit fit(obs, DataTerm::likelihood());
  std::vector<double> g;
  fit.gradient(predictions(obs, w), g);
  return to_sparse(obs, g);
}

double lipschitz_grad_constant(const ObservationSet& obs) {
  require_families(obs);
  double u_sq = 0.0;
  for (const auto& f : obs.families) u_sq = std::max(u_sq, strong_convexity_bounds(f).u_sq);
  return u_sq / obs.layout.size();
}

double empirical_risk(const ObservationSet& obs, const MatrixRef& w,
                      const std::vector<LipschitzLoss>& losses) {
  DataFit fit(obs, DataTerm::risk(losses));
  return fit.value(predictions(obs, w));
}

SparseMatrix risk_subgradient(const ObservationSet& obs, const MatrixRef& w,
                              const std::vector<LipschitzLoss>& losses) {
  DataFit fit(obs, DataTerm::risk(losses));
  std::vector<double> g;
  fit.gradient(predictions(obs, w), g);
  return to_sparse(obs, g);
}

double nuclear_norm(const MatrixRef& w) {
  if (w.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(w);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD failed in nuclear_norm");
  return svd.singularValues().sum();
}

double spectral_norm(const SparseMatrix& a, double tol, int max_iters) {
  if (a.nonZeros() == 0) return 0.0;
  Eigen::VectorXd v(a.cols());
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = 1.0 + 0.01 * std::sin(static_cast<double>(k));
  v.normalize();
  double sigma = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd u = a * v;
    Eigen::VectorXd next = a.transpose() * u;
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    const double estimate = std::sqrt(norm);
    v = next / norm;
    if (std::abs(estimate - sigma) <= tol * estimate) return estimate;
    sigma = estimate;
  }
  return sigma;
}

ObjectiveValue objective_value(const ObservationSet& obs, const MatrixRef& w, double lambda,
                               const DataTerm& term) {
  DataFit fit(obs, term);
  ObjectiveValue out;
  out.data_term = fit.value(predictions(obs, w));
  out.penalty = nuclear_norm(w);
  out.lambda = lambda;
  out.total = out.data_term + lambda * out.penalty;
  return out;
}

double bregman_fit(const ObservationSet& obs, const MatrixRef& w_hat, const MatrixRef& w_true) {
  require_families(obs);
  const auto a = predictions(obs, w_hat);
  const auto b = predictions(obs, w_true);
  double sum = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    sum += bregman(obs.families[static_cast<std::size_t>(obs.entries[k].v)], a[k], b[k]);
  }
  return sum / obs.layout.size();
}

}  // namespace cmc
