#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "cmc/data.hpp"
#include "cmc/lowrank.hpp"
#include "cmc/objective.hpp"

namespace cmc {

/// Tuning knobs shared by the APG and PLAIS-Impute drivers.
struct SolverConfig {
  enum class Mode { Likelihood, GeneralLoss };

  double lambda = 0.0;        ///< final regularization
  bool lambda_auto = false;   ///< replace lambda by the closed-form heuristic
  double lambda_constant = 1.0;
  double lambda_fraction = 0.0;  ///< > 0: lambda = fraction * L * sigma_1(Y) (overrides the above)
  double nu = 0.7;            ///< continuation decay in (0, 1)
  double epsilon = 1e-6;      ///< stop on |F change| <= epsilon; 0 disables
  int max_iters = 1000;
  double lipschitz = 1.0;     ///< step size is 1 / lipschitz
  bool lipschitz_auto = false;  ///< use the data term's own gradient Lipschitz constant
  std::optional<double> clip_gamma;  ///< clip the reported estimate to [-gamma, gamma]
  Mode mode = Mode::Likelihood;
  std::vector<LipschitzLoss> losses;  ///< GeneralLoss mode, one per source
  double quantile_smoothing = 0.05;
  int init_rank = 0;  ///< warm-start width of the first approximate SVT (0: 1 + slack)
  int slack = 5;      ///< random columns added when the warm start saturates
  int power_max_iters = 100;
  double warm_start_drop_tol = 1e-10;
  bool exact_svt = false;  ///< PLAIS-Impute: full SVD instead of the power method
  bool momentum = true;    ///< APG: false degrades to plain proximal gradient
  std::uint64_t seed = 0;
  bool record_timing = true;

  void validate() const;
  [[nodiscard]] DataTerm data_term() const;
  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

enum class Termination { Tolerance, MaxIters };
std::string_view termination_token(Termination t);

struct FitResult {
  ThinFactors factors;
  std::vector<int> rank_history;        ///< surviving rank after each iteration
  std::vector<int> input_rank_history;  ///< warm-start width fed to each SVT
  std::vector<double> objective_history;  ///< F_lambda (final lambda) per iteration
  std::vector<double> lambda_history;     ///< threshold lambda_t per iteration
  std::vector<int> restarts;              ///< iterations where momentum was reset
  double initial_objective = 0.0;
  double wall_time_ms = 0.0;
  Termination terminated_by = Termination::MaxIters;
  double lambda = 0.0;     ///< final lambda actually used
  double lipschitz = 0.0;  ///< L actually used
  bool zero_solution = false;
  int power_cap_hits = 0;  ///< approximate SVTs whose power method hit its cap
  SolverConfig config;

  [[nodiscard]] int iterations() const { return static_cast<int>(objective_history.size()); }
  /// Dense estimate, clipped when config.clip_gamma is set.
  [[nodiscard]] Eigen::MatrixXd estimate() const;
  /// Entries changed by the clip.
  [[nodiscard]] long clipped_entries() const;
};

/// Per-iteration progress, emitted to an optional observer.
struct IterationLog {
  int iteration = 0;
  double lambda_t = 0.0;
  int rank = 0;
  int input_rank = 0;
  double objective = 0.0;
  bool restart = false;
};
using IterationObserver = std::function<void(const IterationLog&)>;

/// One proximal-gradient step SVT_{lambda/L}(W - grad(W) / L).
ThinFactors pg_step(const MatrixRef& w, const ObservationSet& obs, double lambda, double lipschitz,
                    const DataTerm& term = DataTerm::likelihood());

/// Accelerated proximal gradient with exact SVT, started at W_0 = W_1 = Y.
FitResult apg_solve(const ObservationSet& obs, const SolverConfig& cfg,
                    const IterationObserver& observer = {});

/// PLAIS-Impute: APG with approximate SVT, warm-started power method,
/// lambda continuation and momentum restart on objective increase.
FitResult plais_impute(const ObservationSet& obs, const SolverConfig& cfg,
                       const IterationObserver& observer = {});

/// lambda actually used by a fit: lambda_fraction * L * sigma_1(Y) when set,
/// else the heuristic when cfg.lambda_auto, else cfg.lambda.
double resolve_lambda(const ObservationSet& obs, const SolverConfig& cfg);

}  // namespace cmc
