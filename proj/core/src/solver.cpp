#include "cmc/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cmc/errors.hpp"
#include "cmc/tuning.hpp"

namespace cmc {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<double> factor_predictions(const ObservationSet& obs, const ThinFactors& f) {
  std::vector<double> out(obs.size(), 0.0);
  if (f.rank() == 0) return out;
  const Eigen::MatrixXd us = f.u * f.sigma.asDiagonal();
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const Observation& o = obs.entries[k];
    out[k] = us.row(o.i).dot(f.v.row(obs.column(o)));
  }
  return out;
}

// Z = Q - grad(Q) / L for a dense Q.
Eigen::MatrixXd gradient_step(const DataFit& fit, Eigen::MatrixXd q, double lipschitz,
                              std::vector<double>& scratch) {
  const ObservationSet& obs = fit.observations();
  fit.gradient(predictions(obs, q), scratch);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const Observation& o = obs.entries[k];
    q(o.i, obs.column(o)) -= scratch[k] / lipschitz;
  }
  return q;
}

// ||(I - Q Q^T) Z||_2 by power iteration on the residual.
double residual_spectral_norm(const Eigen::MatrixXd& z, const Eigen::MatrixXd& q) {
  const Eigen::MatrixXd r = z - q * (q.transpose() * z);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(r.cols());
  if (r.norm() == 0.0) return 0.0;
  double estimate = 0.0;
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd y = r.transpose() * (r * x);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
    const double next = std::sqrt(norm);
    if (std::abs(next - estimate) <= 1e-8 * next) return next;
    estimate = next;
  }
  return estimate;
}

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void require_observations(const ObservationSet& obs) {
  if (obs.empty()) throw DataError("no observations to fit");
  const Eigen::MatrixXd y = obs.dense();
  if (y.cwiseAbs().maxCoeff() == 0.0) throw NumericalError("observed matrix is identically zero");
}

double resolve_lipschitz(const DataFit& fit, const SolverConfig& cfg) {
  return cfg.lipschitz_auto ? fit.lipschitz() : cfg.lipschitz;
}

}  // namespace

void SolverConfig::validate() const {
  if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("nu must lie in (0, 1)");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be non-negative");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(lambda_constant > 0.0)) throw ConfigError("lambda constant must be positive");
  if (!(lambda_fraction >= 0.0) || !std::isfinite(lambda_fraction)) {
    throw ConfigError("lambda fraction must be >= 0");
  }
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (!(lipschitz > 0.0)) throw ConfigError("Lipschitz constant must be positive");
  if (clip_gamma && !(*clip_gamma > 0.0)) throw ConfigError("clip gamma must be positive");
  if (init_rank < 0 || slack < 0) throw ConfigError("init_rank and slack must be >= 0");
  if (power_max_iters < 1) throw ConfigError("power_max_iters must be at least 1");
  if (mode == Mode::GeneralLoss && losses.empty()) {
    throw ConfigError("general-loss mode needs one loss per source");
  }
  if (!(quantile_smoothing > 0.0)) throw ConfigError("quantile smoothing must be positive");
}

DataTerm SolverConfig::data_term() const {
  if (mode == Mode::Likelihood) return DataTerm::likelihood();
  return DataTerm::risk(losses, quantile_smoothing);
}

std::string_view termination_token(Termination t) {
  return t == Termination::Tolerance ? "tolerance" : "max_iters";
}

Eigen::MatrixXd FitResult::estimate() const {
  Eigen::MatrixXd w = factors.dense();
  if (config.clip_gamma) w = w.cwiseMax(-*config.clip_gamma).cwiseMin(*config.clip_gamma);
  return w;
}

long FitResult::clipped_entries() const {
  if (!config.clip_gamma) return 0;
  return static_cast<long>((factors.dense().array().abs() > *config.clip_gamma).count());
}

double resolve_lambda(const ObservationSet& obs, const SolverConfig& cfg) {
  if (cfg.lambda_fraction > 0.0) {
    const double step =
        cfg.lipschitz_auto ? DataFit(obs, cfg.data_term()).lipschitz() : cfg.lipschitz;
    return cfg.lambda_fraction * step * rank1_svd(obs.dense()).sigma;
  }
  if (!cfg.lambda_auto) return cfg.lambda;
  if (cfg.mode == SolverConfig::Mode::Likelihood) {
    return lambda_heuristic(obs, cfg.lambda_constant);
  }
  return lambda_general_loss(obs, cfg.losses, cfg.lambda_constant);
}

ThinFactors pg_step(const MatrixRef& w, const ObservationSet& obs, double lambda, double lipschitz,
                    const DataTerm& term) {
  if (!(lipschitz > 0.0)) throw ConfigError("Lipschitz constant must be positive");
  DataFit fit(obs, term);
  std::vector<double> scratch;
  return svt_exact(gradient_step(fit, w, lipschitz, scratch), lambda / lipschitz);
}

FitResult apg_solve(const ObservationSet& obs, const SolverConfig& cfg,
                    const IterationObserver& observer) {
  cfg.validate();
  obs.validate();
  require_observations(obs);
  const auto start = Clock::now();
  const DataFit fit(obs, cfg.data_term());

  FitResult out;
  out.config = cfg;
  out.lambda = resolve_lambda(obs, cfg);
  out.lipschitz = resolve_lipschitz(fit, cfg);
  const double lambda = out.lambda;
  const double step = out.lipschitz;

  auto objective = [&](const ThinFactors& f) {
    return fit.value(factor_predictions(obs, f)) + lambda * f.nuclear_norm();
  };

  Eigen::MatrixXd w_prev = obs.dense();
  Eigen::MatrixXd w_cur = w_prev;
  out.initial_objective = fit.value(predictions(obs, w_cur)) + lambda * nuclear_norm(w_cur);
  double f_prev = out.initial_objective;
  double alpha_prev = 1.0;
  double alpha_cur = 1.0;
  std::vector<double> scratch;
  ThinFactors current = svt_exact(w_cur, 0.0);

  for (int t = 1; t <= cfg.max_iters; ++t) {
    const double theta = cfg.momentum ? (alpha_prev - 1.0) / alpha_cur : 0.0;
    Eigen::MatrixXd q = w_cur + theta * (w_cur - w_prev);
    current = svt_exact(gradient_step(fit, std::move(q), step, scratch), lambda / step);
    if (cfg.momentum) {
      alpha_prev = alpha_cur;
      alpha_cur = 0.5 * (std::sqrt(4.0 * alpha_cur * alpha_cur + 1.0) + 1.0);
    }
    w_prev = std::move(w_cur);
    w_cur = current.dense();

    const double f_new = objective(current);
    out.objective_history.push_back(f_new);
    out.rank_history.push_back(current.rank());
    out.input_rank_history.push_back(static_cast<int>(std::min(w_cur.rows(), w_cur.cols())));
    out.lambda_history.push_back(lambda);
    if (observer) observer({t, lambda, current.rank(), out.input_rank_history.back(), f_new, false});
    if (cfg.epsilon > 0.0 && std::abs(f_new - f_prev) <= cfg.epsilon) {
      out.terminated_by = Termination::Tolerance;
      break;
    }
    f_prev = f_new;
  }
  out.factors = std::move(current);
  out.zero_solution = out.factors.rank() == 0;
  out.wall_time_ms = cfg.record_timing ? elapsed_ms(start) : 0.0;
  return out;
}

FitResult plais_impute(const ObservationSet& obs, const SolverConfig& cfg,
                       const IterationObserver& observer) {
  cfg.validate();
  obs.validate();
  require_observations(obs);
  const auto start = Clock::now();
  const DataFit fit(obs, cfg.data_term());
  const Eigen::Index rows = obs.layout.rows();
  const Eigen::Index cols = obs.layout.total_cols();

  FitResult out;
  out.config = cfg;
  out.lambda = resolve_lambda(obs, cfg);
  out.lipschitz = resolve_lipschitz(fit, cfg);
  const double lambda = out.lambda;
  const double step = out.lipschitz;

  auto objective = [&](const ThinFactors& f) {
    return fit.value(factor_predictions(obs, f)) + lambda * f.nuclear_norm();
  };

  // Start from the leading singular triplet of the observed matrix. lambda_0
  // is expressed in objective units so that lambda_0 / L is the top singular
  // value of Y; continuation never starts below the target.
  const Eigen::MatrixXd y = obs.dense();
  const Rank1 top = rank1_svd(y);
  const double lambda0 = std::max(step * top.sigma, lambda);
  const double delta0 = y.norm();

  ThinFactors w_prev{top.u, Eigen::VectorXd::Constant(1, top.sigma), top.v};
  ThinFactors w_cur = w_prev;
  out.initial_objective = objective(w_cur);
  double f_prev = out.initial_objective;
  int momentum_count = 1;
  bool saturated = true;
  std::vector<double> scratch;

  for (int t = 1; t <= cfg.max_iters; ++t) {
    const double decay = std::pow(cfg.nu, t);
    const double delta_t = decay * delta0;
    const double lambda_t = decay * (lambda0 - lambda) + lambda;
    const double theta = (momentum_count - 1.0) / (momentum_count + 2.0);

    Eigen::MatrixXd q = (1.0 + theta) * w_cur.dense();
    if (theta != 0.0) q -= theta * w_prev.dense();
    const Eigen::MatrixXd z = gradient_step(fit, std::move(q), step, scratch);

    ThinFactors next;
    int width = static_cast<int>(std::min(rows, cols));
    if (cfg.exact_svt) {
      next = svt_exact(z, lambda_t / step);
    } else {
      // Warm start from the current row space plus the part of the previous
      // one it does not already span.
      // Directions of the previous basis already within the power-method
      // tolerance of the current one add nothing the iteration can resolve.
      const Eigen::MatrixXd residual = w_prev.v - w_cur.v * (w_cur.v.transpose() * w_prev.v);
      const double keep_above = std::max(cfg.warm_start_drop_tol, delta_t);
      std::vector<Eigen::Index> kept;
      for (Eigen::Index c = 0; c < residual.cols(); ++c) {
        if (residual.col(c).norm() > keep_above) kept.push_back(c);
      }
      Eigen::MatrixXd stacked(cols, w_cur.rank() + static_cast<Eigen::Index>(kept.size()));
      stacked.leftCols(w_cur.rank()) = w_cur.v;
      for (std::size_t c = 0; c < kept.size(); ++c) {
        stacked.col(w_cur.rank() + static_cast<Eigen::Index>(c)) = residual.col(kept[c]);
      }
      Eigen::MatrixXd r = qr_orthonormalize(stacked, cfg.warm_start_drop_tol).q;
      int extra = saturated || r.cols() == 0 ? std::max(cfg.slack, 1) : 0;
      if (t == 1 && cfg.init_rank > 0) {
        extra = std::max(extra, cfg.init_rank - static_cast<int>(r.cols()));
      }
      if (extra > 0) {
        r = random_orthonormal_completion(r, cols, extra,
                                          cfg.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(t));
      }
      ApproxSvtResult approx =
          approx_svt(z, r, lambda_t / step, delta_t, cfg.power_max_iters,
                     cfg.seed + 7919ULL * static_cast<std::uint64_t>(t));
      if (!approx.power.converged) ++out.power_cap_hits;
      width = approx.width;
      // Every column survived: more singular values may lie above the
      // threshold outside span(Q), and sigma_{k+1}(Z) <= ||(I - QQ^T) Z||.
      saturated = approx.factors.rank() >= approx.width &&
                  residual_spectral_norm(z, approx.power.q) > lambda_t / step;
      next = std::move(approx.factors);
    }

    const double f_new = objective(next);
    const bool restart = f_new > f_prev;
    momentum_count = restart ? 1 : momentum_count + 1;
    if (restart) out.restarts.push_back(t);

    out.objective_history.push_back(f_new);
    out.rank_history.push_back(next.rank());
    out.input_rank_history.push_back(width);
    out.lambda_history.push_back(lambda_t);
    if (observer) observer({t, lambda_t, next.rank(), width, f_new, restart});

    w_prev = std::move(w_cur);
    w_cur = std::move(next);

    // A collapse to zero while lambda_t is still above lambda is transient.
    const bool transient_zero =
        w_cur.rank() == 0 && lambda_t > lambda * (1.0 + 1e-12) + 1e-300;
    if (cfg.epsilon > 0.0 && std::abs(f_new - f_prev) <= cfg.epsilon && !transient_zero) {
      out.terminated_by = Termination::Tolerance;
      break;
    }
    f_prev = f_new;
  }

  out.factors = std::move(w_cur);
  out.zero_solution = out.factors.rank() == 0;
  out.wall_time_ms = cfg.record_timing ? elapsed_ms(start) : 0.0;
  return out;
}

}  // namespace cmc
