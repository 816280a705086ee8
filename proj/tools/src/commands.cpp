#include "cmc_tools/commands.hpp"

#include <filesystem>
#include <map>
#include <ostream>

#include "cmc/errors.hpp"
#include "cmc/io.hpp"
#include "json.hpp"

namespace cmc::tools {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path prepare_output(const RunConfig& cfg) {
  const fs::path dir = cfg.output.empty() ? fs::path(".") : fs::path(cfg.output);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string());
  return dir;
}

ExperimentSpec seeded_spec(const RunConfig& cfg) {
  ExperimentSpec spec = cfg.experiment;
  spec.seed = *cfg.seed;
  return spec;
}

BoundParams bound_for(const RunConfig& cfg, const ExperimentSpec& spec) {
  BoundParams b = cfg.bound;
  b.rank = 0;
  for (int r : spec.synth.ranks) b.rank += r;
  b.d_u = spec.synth.d_u;
  b.D = 0;
  for (int d : spec.synth.d_vs) b.D += d;
  b.gamma = spec.synth.gamma;
  double l_sq = 0.0;
  double u_sq = 0.0;
  double kappa = 0.0;
  for (const auto& f : spec.families) {
    const CurvatureBounds cb = strong_convexity_bounds(f);
    l_sq = l_sq == 0.0 ? cb.l_sq : std::min(l_sq, cb.l_sq);
    u_sq = std::max(u_sq, cb.u_sq);
    kappa = std::max(kappa, f.kappa);
  }
  b.l_sq = l_sq;
  b.u_sq = u_sq;
  b.kappa = kappa;
  return b;
}

// Per-p curve rows for any number of grid points.
std::vector<RateRow> curve_rows(const std::vector<MetricRecord>& recs, const BoundParams& bound,
                                BoundKind kind) {
  std::map<double, std::vector<double>> re;
  std::map<double, std::vector<double>> mse;
  for (const auto& r : recs) {
    if (r.method != Method::Collective || r.error) continue;
    re[r.p].push_back(r.relative_error);
    mse[r.p].push_back(r.mse);
  }
  std::vector<RateRow> rows;
  for (const auto& [p, xs] : re) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    double mean_mse = 0.0;
    for (double x : mse[p]) mean_mse += x;
    mean_mse /= static_cast<double>(mse[p].size());
    BoundParams b = bound;
    b.p = p;
    rows.push_back({p, mean,
                    xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0,
                    mean_mse, theory_bound(kind, b)});
  }
  return rows;
}

}  // namespace

int cmd_generate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const ExperimentSpec spec = seeded_spec(cfg);
  const double p = spec.p_grid.front();
  const TrialData data = make_trial(spec, p, *cfg.seed);
  const fs::path dir = prepare_output(cfg);
  write_text_file(dir / "observations.csv", observations_to_csv(data.obs));
  write_text_file(dir / "layout.json", layout_to_json({data.obs.layout, data.obs.families}));
  write_matrix(dir / "truth", data.truth.values);
  log << json{{"command", "generate"},
              {"p", p},
              {"observations", data.obs.size()},
              {"output", dir.string()}}
             .dump()
      << '\n';
  return kExitOk;
}

int cmd_fit(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  LayoutFile lf = layout_from_json(read_text_file(cfg.layout));
  if (lf.families.empty()) {
    lf.families.assign(static_cast<std::size_t>(lf.layout.sources()), ExpFamilyModel::gaussian(1.0));
  }
  const ObservationSet obs =
      observations_from_csv(read_text_file(cfg.observations), lf.layout, lf.families);
  SolverConfig solver = cfg.solver;
  if (cfg.seed) solver.seed = *cfg.seed;

  IterationObserver observer;
  if (cfg.verbose) {
    observer = [&log](const IterationLog& it) {
      log << json{{"iteration", it.iteration},
                  {"lambda_t", it.lambda_t},
                  {"rank", it.rank},
                  {"input_rank", it.input_rank},
                  {"objective", it.objective},
                  {"restart", it.restart}}
                 .dump()
          << '\n';
    };
  }
  const FitResult fit = cfg.algorithm == Algorithm::Plais ? plais_impute(obs, solver, observer)
                                                          : apg_solve(obs, solver, observer);
  const fs::path dir = prepare_output(cfg);
  write_text_file(dir / "fit.json", fit_result_to_json(fit));
  write_factors(dir / "factors", fit.factors);
  log << json{{"command", "fit"},
              {"lambda", fit.lambda},
              {"iterations", fit.iterations()},
              {"rank", fit.factors.rank()},
              {"terminated_by", termination_token(fit.terminated_by)},
              {"zero_solution", fit.zero_solution}}
             .dump()
      << '\n';
  return fit.terminated_by == Termination::Tolerance ? kExitOk : kExitMaxIters;
}

int cmd_experiment(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const ExperimentSpec spec = seeded_spec(cfg);
  const auto records = run_experiment(spec);
  const fs::path dir = prepare_output(cfg);
  write_text_file(dir / "records.jsonl", metric_records_to_jsonl(records));
  const BoundParams bound = bound_for(cfg, spec);
  write_text_file(dir / "curve.csv", curve_to_csv(curve_rows(records, bound, cfg.bound_kind)));
  json summary{{"command", "experiment"}, {"records", records.size()}};
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.error ? 1 : 0;
  summary["failed"] = failed;
  try {
    const RateFit rate = rate_regression(records, bound, Method::Collective, cfg.bound_kind);
    summary["slope"] = rate.slope;
    summary["intercept"] = rate.intercept;
    summary["r_squared"] = rate.r_squared;
  } catch (const ConfigError&) {
    summary["r_squared"] = nullptr;  // fewer than four p values
  }
  write_text_file(dir / "summary.json", summary.dump(2));
  log << summary.dump() << '\n';
  return kExitOk;
}

int cmd_coldstart(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const ExperimentSpec spec = seeded_spec(cfg);
  const ColdStartSummary res = run_cold_start(spec, cfg.target_source, cfg.cold_fraction);
  const fs::path dir = prepare_output(cfg);
  write_text_file(dir / "records.jsonl", metric_records_to_jsonl(res.records));
  const json summary{{"command", "coldstart"},
                     {"records", res.records.size()},
                     {"target_source", cfg.target_source},
                     {"mean_collective", res.mean_collective},
                     {"std_collective", res.std_collective},
                     {"mean_component", res.mean_component},
                     {"std_component", res.std_component},
                     {"collective_wins", res.collective_wins},
                     {"sign_test_p", res.sign_test_p}};
  write_text_file(dir / "summary.json", summary.dump(2));
  log << summary.dump() << '\n';
  return kExitOk;
}

int cmd_bounds(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const double value = theory_bound(cfg.bound_kind, cfg.bound);
  const json out{{"command", "bounds"},
                 {"kind", cfg.bound_kind == BoundKind::ExpFamily ? "expfam" : "general"},
                 {"bound", value}};
  const fs::path dir = prepare_output(cfg);
  write_text_file(dir / "bounds.json", out.dump(2));
  log << out.dump() << '\n';
  return kExitOk;
}

int run(const RunConfig& cfg, std::ostream& log) {
  switch (cfg.command) {
    case Command::Fit: return cmd_fit(cfg, log);
    case Command::Generate: return cmd_generate(cfg, log);
    case Command::Experiment: return cmd_experiment(cfg, log);
    case Command::ColdStart: return cmd_coldstart(cfg, log);
    case Command::Bounds: return cmd_bounds(cfg, log);
  }
  return kExitOk;
}

}  // namespace cmc::tools
