#include "cmc/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

#include "cmc/errors.hpp"

namespace cmc {

std::string_view observation_token(ObservationMode m) {
  switch (m) {
    case ObservationMode::Exact: return "exact";
    case ObservationMode::Mean: return "mean";
    case ObservationMode::Sampled: return "sampled";
  }
  return "exact";
}

ObservationMode parse_observation_mode(std::string_view token) {
  if (token == "exact") return ObservationMode::Exact;
  if (token == "mean") return ObservationMode::Mean;
  if (token == "sampled") return ObservationMode::Sampled;
  throw ConfigError("unknown observation mode '" + std::string(token) + "'");
}

std::string_view method_token(Method m) {
  return m == Method::Collective ? "collective" : "per_source";
}

Method parse_method(std::string_view token) {
  if (token == "collective") return Method::Collective;
  if (token == "per_source") return Method::PerSource;
  throw ConfigError("unknown method '" + std::string(token) + "'");
}

void ExperimentSpec::validate() const {
  if (synth.d_u < 1 || synth.d_vs.empty()) throw ConfigError("experiment layout is empty");
  const std::size_t v = synth.d_vs.size();
  if (synth.ranks.size() != v) throw ConfigError("need one rank per source");
  if (!synth.laws.empty() && synth.laws.size() != v) throw ConfigError("need one law per source");
  if (families.size() != v) throw ConfigError("need one fit family per source");
  if (p_grid.empty()) throw ConfigError("p_grid must not be empty");
  for (double p : p_grid) {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p_grid values must lie in (0, 1]");
  }
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (methods.empty()) throw ConfigError("at least one method is required");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1]");
  }
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  for (const auto& f : families) f.validate();
  solver.validate();
}

ExperimentSpec ExperimentSpec::desk_exp1() {
  ExperimentSpec s;
  s.id = "exp1";
  s.synth.d_u = 300;
  s.synth.d_vs = {100, 100, 100};
  s.synth.ranks = {5, 5, 5};
  s.synth.laws = SyntheticConfig::default_laws(3);
  s.synth.gamma = 1.0;
  s.families.assign(3, ExpFamilyModel::gaussian(1.0));
  s.p_grid = {0.2, 0.4, 0.6, 0.8};
  s.solver.lipschitz_auto = true;
  s.solver.lambda_fraction = 0.02;
  s.solver.init_rank = 25;
  return s;
}

double relative_error(const MatrixRef& w_hat, const MatrixRef& w_true) {
  if (w_hat.rows() != w_true.rows() || w_hat.cols() != w_true.cols()) {
    throw DataError("relative error of matrices with different shapes");
  }
  const double denom = w_true.norm();
  if (denom == 0.0) throw DataError("relative error against a zero matrix");
  return (w_hat - w_true).norm() / denom;
}

std::uint64_t trial_seed(std::uint64_t base, std::size_t p_index, int trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(p_index), static_cast<std::uint32_t>(trial)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

TrialData make_trial(const ExperimentSpec& spec, double p, std::uint64_t seed) {
  SyntheticConfig synth = spec.synth;
  if (synth.laws.empty()) synth.laws = SyntheticConfig::default_laws(static_cast<int>(synth.d_vs.size()));
  synth.seed = seed;
  TrialData out;
  out.truth = generate_synthetic(synth).matrix;
  const SamplingScheme scheme = SamplingScheme::uniform(p);
  const std::uint64_t obs_seed = seed ^ 0x6f62736572766521ULL;
  switch (spec.observation) {
    case ObservationMode::Exact:
      out.obs = mask_sample(out.truth, scheme, obs_seed);
      out.obs.families = spec.families;
      break;
    case ObservationMode::Mean:
      out.obs = observe_means(out.truth, spec.families, scheme, obs_seed);
      break;
    case ObservationMode::Sampled:
      out.obs = observe_from_model(out.truth, spec.families, scheme, obs_seed);
      break;
  }
  return out;
}

namespace {

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double heldout_risk(const ObservationSet& test, const MatrixRef& w, const SolverConfig& cfg) {
  if (test.empty()) return std::numeric_limits<double>::quiet_NaN();
  const DataFit fit(test, cfg.data_term());
  return fit.value(predictions(test, w)) * test.layout.size() / static_cast<double>(test.size());
}

struct MethodFit {
  Eigen::MatrixXd estimate;
  int rank = 0;
  int iterations = 0;
  Termination terminated_by = Termination::MaxIters;
  double wall_time_ms = 0.0;
  std::vector<double> objective_history;
  std::vector<int> rank_history;
};

MethodFit fit_method(const ObservationSet& train, const SolverConfig& cfg, Method method) {
  MethodFit out;
  if (method == Method::Collective) {
    FitResult r = plais_impute(train, cfg);
    out.estimate = r.estimate();
    out.rank = r.factors.rank();
    out.iterations = r.iterations();
    out.terminated_by = r.terminated_by;
    out.wall_time_ms = r.wall_time_ms;
    out.objective_history = std::move(r.objective_history);
    out.rank_history = std::move(r.rank_history);
    return out;
  }
  const BlockLayout& layout = train.layout;
  out.estimate = Eigen::MatrixXd::Zero(layout.rows(), layout.total_cols());
  out.terminated_by = Termination::Tolerance;
  for (int v = 0; v < layout.sources(); ++v) {
    const ObservationSet sub = train.source_subset(v);
    bool has_signal = false;
    for (const auto& o : sub.entries) has_signal = has_signal || o.y != 0.0;
    if (!has_signal) continue;  // nothing to learn: the block estimate stays zero
    FitResult r = plais_impute(sub, cfg);
    out.estimate.middleCols(layout.offset(v), layout.cols(v)) = r.estimate();
    out.rank += r.factors.rank();
    out.iterations = std::max(out.iterations, r.iterations());
    if (r.terminated_by == Termination::MaxIters) out.terminated_by = Termination::MaxIters;
    out.wall_time_ms += r.wall_time_ms;
  }
  return out;
}

void fill_record(MetricRecord& rec, MethodFit fit, const CollectiveMatrix& truth,
                 const ObservationSet& test, const SolverConfig& cfg) {
  const BlockLayout& layout = truth.layout;
  rec.relative_error = relative_error(fit.estimate, truth.values);
  rec.mse = (fit.estimate - truth.values).squaredNorm() / layout.size();
  for (int v = 0; v < layout.sources(); ++v) {
    const auto block = truth.block(v);
    rec.source_re.push_back(block.norm() == 0.0
                                ? std::numeric_limits<double>::quiet_NaN()
                                : relative_error(fit.estimate.middleCols(layout.offset(v),
                                                                         layout.cols(v)),
                                                 block));
  }
  rec.rank = fit.rank;
  rec.iterations = fit.iterations;
  rec.terminated_by = std::string(termination_token(fit.terminated_by));
  rec.wall_time_ms = fit.wall_time_ms;
  rec.heldout_risk = heldout_risk(test, fit.estimate, cfg);
  rec.objective_history = std::move(fit.objective_history);
  rec.rank_history = std::move(fit.rank_history);
}

}  // namespace

void parallel_for(int count, int jobs, const std::function<void(int)>& job) {
  if (count <= 0) return;
  const int width = std::clamp(jobs, 1, count);
  if (width == 1) {
    for (int k = 0; k < count; ++k) job(k);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(width));
  for (int w = 0; w < width; ++w) {
    pool.emplace_back([&] {
      for (int k = next++; k < count; k = next++) job(k);
    });
  }
  for (auto& t : pool) t.join();
}

std::vector<MetricRecord> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const int n_trials = static_cast<int>(spec.p_grid.size()) * spec.trials;
  const std::size_t n_methods = spec.methods.size();
  std::vector<MetricRecord> records(static_cast<std::size_t>(n_trials) * n_methods);

  parallel_for(n_trials, spec.jobs, [&](int job) {
    const std::size_t p_index = static_cast<std::size_t>(job / spec.trials);
    const int trial = job % spec.trials;
    const double p = spec.p_grid[p_index];
    const std::uint64_t seed = trial_seed(spec.seed, p_index, trial);
    for (std::size_t m = 0; m < n_methods; ++m) {
      MetricRecord& rec = records[static_cast<std::size_t>(job) * n_methods + m];
      rec.experiment = spec.id;
      rec.p = p;
      rec.trial = trial;
      rec.method = spec.methods[m];
    }
    try {
      const TrialData data = make_trial(spec, p, seed);
      ObservationSet train = data.obs;
      ObservationSet test{data.obs.layout, {}, data.obs.families};
      if (spec.train_fraction < 1.0) {
        std::tie(train, test) = train_test_split(data.obs, spec.train_fraction, seed ^ 0x73706c6974ULL);
      }
      SolverConfig cfg = spec.solver;
      cfg.seed = seed;
      for (std::size_t m = 0; m < n_methods; ++m) {
        MetricRecord& rec = records[static_cast<std::size_t>(job) * n_methods + m];
        try {
          fill_record(rec, fit_method(train, cfg, spec.methods[m]), data.truth, test, cfg);
        } catch (const Error& e) {
          rec.error = e.what();
        }
      }
    } catch (const Error& e) {
      for (std::size_t m = 0; m < n_methods; ++m) {
        records[static_cast<std::size_t>(job) * n_methods + m].error = e.what();
      }
    }
  });
  return records;
}

double sign_test_pvalue(int wins, int n) {
  if (n < 0 || wins < 0 || wins > n) throw ConfigError("sign test needs 0 <= wins <= n");
  double tail = 0.0;
  for (int k = wins; k <= n; ++k) {
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
                     n * std::log(2.0));
  }
  return std::min(tail, 1.0);
}

ColdStartSummary run_cold_start(const ExperimentSpec& spec, int target_v, double cold_fraction) {
  spec.validate();
  if (target_v < 0 || target_v >= static_cast<int>(spec.synth.d_vs.size())) {
    throw ConfigError("cold-start target source out of range");
  }
  if (!(cold_fraction >= 0.0 && cold_fraction <= 1.0)) {
    throw ConfigError("cold fraction must lie in [0, 1]");
  }
  const double p = spec.p_grid.front();
  ColdStartSummary out;
  out.records.resize(static_cast<std::size_t>(spec.trials) * 2);

  parallel_for(spec.trials, spec.jobs, [&](int trial) {
    const std::uint64_t seed = trial_seed(spec.seed, 0, trial);
    MetricRecord* recs[2] = {&out.records[static_cast<std::size_t>(trial) * 2],
                             &out.records[static_cast<std::size_t>(trial) * 2 + 1]};
    const Method methods[2] = {Method::Collective, Method::PerSource};
    for (int m = 0; m < 2; ++m) {
      recs[m]->experiment = spec.id;
      recs[m]->p = p;
      recs[m]->trial = trial;
      recs[m]->method = methods[m];
      recs[m]->target_source = target_v;
    }
    try {
      const TrialData data = make_trial(spec, p, seed);
      const ColdStartResult cold = cold_start_transform(data.obs, target_v, cold_fraction);
      const BlockLayout& layout = data.truth.layout;
      Eigen::MatrixXd m_cold = data.truth.block(target_v);
      for (std::size_t k : cold.zeroed) {
        const Observation& o = cold.obs.entries[k];
        m_cold(o.i, o.j) = 0.0;
      }
      SolverConfig cfg = spec.solver;
      cfg.seed = seed;
      const ObservationSet target_obs = cold.obs.source_subset(target_v);
      const ObservationSet empty_test{target_obs.layout, {}, target_obs.families};
      for (int m = 0; m < 2; ++m) {
        MetricRecord& rec = *recs[m];
        try {
          MethodFit fit;
          if (methods[m] == Method::Collective) {
            fit = fit_method(cold.obs, cfg, Method::Collective);
            fit.estimate = fit.estimate.middleCols(layout.offset(target_v), layout.cols(target_v)).eval();
          } else {
            fit = fit_method(target_obs, cfg, Method::Collective);
          }
          CollectiveMatrix truth(target_obs.layout, m_cold);
          fill_record(rec, std::move(fit), truth, empty_test, cfg);
        } catch (const Error& e) {
          rec.error = e.what();
        }
      }
    } catch (const Error& e) {
      recs[0]->error = e.what();
      recs[1]->error = e.what();
    }
  });

  std::vector<double> collective;
  std::vector<double> component;
  for (int t = 0; t < spec.trials; ++t) {
    const MetricRecord& c = out.records[static_cast<std::size_t>(t) * 2];
    const MetricRecord& s = out.records[static_cast<std::size_t>(t) * 2 + 1];
    if (c.error || s.error) continue;
    collective.push_back(c.relative_error);
    component.push_back(s.relative_error);
    if (c.relative_error <= s.relative_error) ++out.collective_wins;
  }
  out.mean_collective = mean_of(collective);
  out.std_collective = sample_std(collective);
  out.mean_component = mean_of(component);
  out.std_component = sample_std(component);
  out.sign_test_p = sign_test_pvalue(out.collective_wins, static_cast<int>(collective.size()));
  return out;
}

RateFit rate_regression(const std::vector<MetricRecord>& records, const BoundParams& bound,
                        Method method, BoundKind kind) {
  std::map<double, std::vector<const MetricRecord*>> by_p;
  for (const auto& r : records) {
    if (r.method == method && !r.error) by_p[r.p].push_back(&r);
  }
  if (by_p.size() < 4) throw ConfigError("rate regression needs at least four distinct p values");

  RateFit out;
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [p, recs] : by_p) {
    std::vector<double> re;
    std::vector<double> mse;
    for (const auto* r : recs) {
      re.push_back(r->relative_error);
      mse.push_back(r->mse);
    }
    BoundParams b = bound;
    b.p = p;
    out.curve.push_back({p, mean_of(re), sample_std(re), mean_of(mse), theory_bound(kind, b)});
    x.push_back(1.0 / p);
    y.push_back(mean_of(mse));
  }
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  double sse = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double e = y[k] - (out.intercept + out.slope * x[k]);
    sse += e * e;
  }
  out.r_squared = syy == 0.0 ? 1.0 : 1.0 - sse / syy;
  return out;
}

}  // namespace cmc
