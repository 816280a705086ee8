#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmc/data.hpp"
#include "cmc/solver.hpp"
#include "cmc/tuning.hpp"

namespace cmc {

/// How observed values are produced from the synthetic parameter matrix.
enum class ObservationMode {
  Exact,    ///< y = M_ij (noise-free)
  Mean,     ///< y = G'(M_ij)
  Sampled,  ///< y ~ family at eta = M_ij
};
std::string_view observation_token(ObservationMode m);
ObservationMode parse_observation_mode(std::string_view token);

enum class Method { Collective, PerSource };
std::string_view method_token(Method m);
Method parse_method(std::string_view token);

struct ExperimentSpec {
  std::string id = "exp";
  SyntheticConfig synth;               ///< seed is ignored, trials derive their own
  std::vector<ExpFamilyModel> families;  ///< fit families, one per source
  ObservationMode observation = ObservationMode::Exact;
  std::vector<double> p_grid;
  int trials = 1;
  std::uint64_t seed = 0;
  SolverConfig solver;
  std::vector<Method> methods{Method::Collective, Method::PerSource};
  double train_fraction = 0.8;  ///< 1 fits on every observation
  int jobs = 1;

  void validate() const;

  /// Three 100-column blocks sharing 300 rows, ranks 5, gamma 1, noise-free
  /// observations fitted with a unit-variance Gaussian likelihood.
  static ExperimentSpec desk_exp1();

  friend bool operator==(const ExperimentSpec&, const ExperimentSpec&) = default;
};

struct MetricRecord {
  std::string experiment;
  double p = 0.0;
  int trial = 0;
  Method method = Method::Collective;
  int target_source = -1;            ///< cold-start runs only
  double relative_error = 0.0;       ///< over the whole collective matrix (or the cold block)
  std::vector<double> source_re;     ///< per block
  double mse = 0.0;                  ///< ||W - M||_F^2 / (d_u D)
  int rank = 0;                      ///< final rank (summed over blocks for PerSource)
  int iterations = 0;
  std::string terminated_by;
  double wall_time_ms = 0.0;
  double heldout_risk = 0.0;  ///< mean data term per held-out observation, NaN without a test set
  std::vector<double> objective_history;  ///< collective fits only
  std::vector<int> rank_history;
  std::optional<std::string> error;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

/// ||w_hat - w_true||_F / ||w_true||_F; throws DataError on a zero truth.
double relative_error(const MatrixRef& w_hat, const MatrixRef& w_true);

/// Seed of trial `trial` at grid position `p_index`.
std::uint64_t trial_seed(std::uint64_t base, std::size_t p_index, int trial);

/// One synthetic draw of the spec at probability p.
struct TrialData {
  CollectiveMatrix truth;
  ObservationSet obs;
};
TrialData make_trial(const ExperimentSpec& spec, double p, std::uint64_t seed);

/// For each (p, trial): generate, mask, split, fit every method, record.
/// Records are ordered by (p, trial, method) whatever the job count.
std::vector<MetricRecord> run_experiment(const ExperimentSpec& spec);

struct ColdStartSummary {
  std::vector<MetricRecord> records;  ///< (trial, method) order
  double mean_collective = 0.0;
  double std_collective = 0.0;
  double mean_component = 0.0;
  double std_component = 0.0;
  int collective_wins = 0;  ///< trials with collective RE <= component RE
  double sign_test_p = 1.0;
};

/// Cold-start comparison at spec.p_grid.front(): zero the first fraction of
/// the target source's observations, fit the collective model on all sources
/// and the per-component model on the target alone, and score both against
/// the cold target block.
ColdStartSummary run_cold_start(const ExperimentSpec& spec, int target_v,
                                double cold_fraction = 0.2);

/// One-sided sign test: P(X >= wins) for X ~ Binomial(n, 1/2).
double sign_test_pvalue(int wins, int n);

struct RateRow {
  double p = 0.0;
  double mean_re = 0.0;
  double std_re = 0.0;
  double mean_mse = 0.0;
  double bound = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<RateRow> curve;
};

/// Least-squares fit of mean MSE against 1/p for one method, with the
/// theoretical reference curve at each p. Needs at least four distinct p.
RateFit rate_regression(const std::vector<MetricRecord>& records, const BoundParams& bound,
                        Method method = Method::Collective,
                        BoundKind kind = BoundKind::ExpFamily);

/// Runs job(0..count-1) on `jobs` threads; each index runs exactly once.
void parallel_for(int count, int jobs, const std::function<void(int)>& job);

}  // namespace cmc
