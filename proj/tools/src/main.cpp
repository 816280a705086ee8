#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cmc/errors.hpp"
#include "cmc/io.hpp"
#include "cmc_tools/commands.hpp"

namespace {

struct Overrides {
  std::string config;
  std::vector<double> p;
  std::string lambda;
  std::optional<std::uint64_t> seed;
  std::optional<double> nu;
  std::optional<double> epsilon;
  std::optional<int> jobs;
  std::optional<int> trials;
  bool verbose = false;
  std::string output;
  std::string observations;
  std::string layout;
  std::string algorithm;
  std::optional<int> target;
  std::optional<double> cold_fraction;
  std::string bound_kind;
  std::optional<double> rank, d_u, big_d, mu, gamma, l_sq, u_sq, kappa, rho, varsigma, constant_c;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  sub->add_option("--p", o.p, "observation probability (list for experiment)")->delimiter(',');
  sub->add_option("--lambda", o.lambda, "final lambda, or 'auto' for the heuristic");
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--nu", o.nu, "continuation decay in (0, 1)");
  sub->add_option("--epsilon", o.epsilon, "stopping tolerance on the objective change");
  sub->add_option("--jobs", o.jobs, "worker threads for trials");
  sub->add_option("--trials", o.trials, "repetitions per p");
  sub->add_option("-o,--output", o.output, "output directory");
  sub->add_flag("-v,--verbose", o.verbose, "one JSON line per solver iteration");
}

cmc::tools::RunConfig build(cmc::tools::Command command, const Overrides& o) {
  using namespace cmc::tools;
  RunConfig cfg;
  if (!o.config.empty()) cfg = run_config_from_json(cmc::read_text_file(o.config));
  cfg.command = command;
  if (!o.p.empty()) cfg.experiment.p_grid = o.p;
  if (!o.lambda.empty()) {
    if (o.lambda == "auto") {
      cfg.solver.lambda_auto = true;
      cfg.solver.lambda_fraction = 0.0;
    } else {
      try {
        cfg.solver.lambda = std::stod(o.lambda);
      } catch (const std::exception&) {
        throw cmc::ConfigError("--lambda must be a number or 'auto'");
      }
      cfg.solver.lambda_auto = false;
      cfg.solver.lambda_fraction = 0.0;
    }
    cfg.experiment.solver.lambda = cfg.solver.lambda;
    cfg.experiment.solver.lambda_auto = cfg.solver.lambda_auto;
    cfg.experiment.solver.lambda_fraction = cfg.solver.lambda_fraction;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.nu) cfg.solver.nu = cfg.experiment.solver.nu = *o.nu;
  if (o.epsilon) cfg.solver.epsilon = cfg.experiment.solver.epsilon = *o.epsilon;
  if (o.jobs) cfg.experiment.jobs = *o.jobs;
  if (o.trials) cfg.experiment.trials = *o.trials;
  if (!o.output.empty()) cfg.output = o.output;
  if (o.verbose) cfg.verbose = true;
  if (!o.observations.empty()) cfg.observations = o.observations;
  if (!o.layout.empty()) cfg.layout = o.layout;
  if (o.algorithm == "apg") cfg.algorithm = Algorithm::Apg;
  if (o.algorithm == "plais") cfg.algorithm = Algorithm::Plais;
  if (o.target) cfg.target_source = *o.target;
  if (o.cold_fraction) cfg.cold_fraction = *o.cold_fraction;
  if (o.bound_kind == "expfam") cfg.bound_kind = cmc::BoundKind::ExpFamily;
  if (o.bound_kind == "general") cfg.bound_kind = cmc::BoundKind::General;
  auto set = [](const std::optional<double>& v, double& out) {
    if (v) out = *v;
  };
  set(o.rank, cfg.bound.rank);
  if (!o.p.empty() && command == Command::Bounds) cfg.bound.p = o.p.front();
  set(o.d_u, cfg.bound.d_u);
  set(o.big_d, cfg.bound.D);
  set(o.mu, cfg.bound.mu);
  set(o.gamma, cfg.bound.gamma);
  set(o.l_sq, cfg.bound.l_sq);
  set(o.u_sq, cfg.bound.u_sq);
  set(o.kappa, cfg.bound.kappa);
  set(o.rho, cfg.bound.rho);
  set(o.varsigma, cfg.bound.varsigma);
  set(o.constant_c, cfg.bound.constant_c);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  using cmc::tools::Command;
  CLI::App app{"Collective matrix completion: generate, fit, experiment, coldstart, bounds"};
  app.require_subcommand(1);
  Overrides o;

  auto* generate = app.add_subcommand("generate", "synthetic observations, layout and truth");
  add_common(generate, o);

  auto* fit = app.add_subcommand("fit", "fit an observation file");
  add_common(fit, o);
  fit->add_option("--observations", o.observations, "observation CSV");
  fit->add_option("--layout", o.layout, "layout JSON");
  fit->add_option("--algorithm", o.algorithm, "plais or apg")
      ->check(CLI::IsMember({"plais", "apg"}));

  auto* experiment = app.add_subcommand("experiment", "relative error against p");
  add_common(experiment, o);

  auto* coldstart = app.add_subcommand("coldstart", "collective against per-component on a cold source");
  add_common(coldstart, o);
  coldstart->add_option("--target", o.target, "cold source index");
  coldstart->add_option("--cold-fraction", o.cold_fraction, "fraction of the target zeroed");

  auto* bounds = app.add_subcommand("bounds", "evaluate the reference error bound");
  add_common(bounds, o);
  bounds->add_option("--kind", o.bound_kind, "expfam or general")
      ->check(CLI::IsMember({"expfam", "general"}));
  bounds->add_option("--rank", o.rank);
  bounds->add_option("--d-u", o.d_u);
  bounds->add_option("--D", o.big_d);
  bounds->add_option("--mu", o.mu);
  bounds->add_option("--gamma", o.gamma);
  bounds->add_option("--l-sq", o.l_sq);
  bounds->add_option("--u-sq", o.u_sq);
  bounds->add_option("--kappa", o.kappa);
  bounds->add_option("--rho", o.rho);
  bounds->add_option("--varsigma", o.varsigma);
  bounds->add_option("--c", o.constant_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  Command command = Command::Fit;
  if (*generate) command = Command::Generate;
  else if (*experiment) command = Command::Experiment;
  else if (*coldstart) command = Command::ColdStart;
  else if (*bounds) command = Command::Bounds;

  try {
    const auto cfg = build(command, o);
    return cmc::tools::run(cfg, std::cout);
  } catch (const cmc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
