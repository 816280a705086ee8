#include "cmc_tools/run_config.hpp"

#include <filesystem>

#include "cmc/errors.hpp"
#include "cmc/io.hpp"
#include "json.hpp"

namespace cmc::tools {

using json = nlohmann::json;

std::string_view command_token(Command c) {
  switch (c) {
    case Command::Fit: return "fit";
    case Command::Generate: return "generate";
    case Command::Experiment: return "experiment";
    case Command::ColdStart: return "coldstart";
    case Command::Bounds: return "bounds";
  }
  return "fit";
}

Command parse_command(std::string_view token) {
  for (Command c : {Command::Fit, Command::Generate, Command::Experiment, Command::ColdStart,
                    Command::Bounds}) {
    if (command_token(c) == token) return c;
  }
  throw ConfigError("unknown command '" + std::string(token) + "'");
}

void RunConfig::validate() const {
  namespace fs = std::filesystem;
  const bool seeded = command == Command::Generate || command == Command::Experiment ||
                      command == Command::ColdStart;
  if (seeded && !seed) throw ConfigError("a seed is required for this command");
  switch (command) {
    case Command::Fit:
      if (observations.empty() || layout.empty()) {
        throw ConfigError("fit needs --observations and --layout");
      }
      if (!fs::exists(observations)) throw ConfigError("no such file: " + observations);
      if (!fs::exists(layout)) throw ConfigError("no such file: " + layout);
      solver.validate();
      break;
    case Command::Generate:
    case Command::Experiment:
      experiment.validate();
      break;
    case Command::ColdStart:
      experiment.validate();
      if (target_source < 0 || target_source >= static_cast<int>(experiment.synth.d_vs.size())) {
        throw ConfigError("target source out of range");
      }
      if (!(cold_fraction >= 0.0 && cold_fraction <= 1.0)) {
        throw ConfigError("cold fraction must lie in [0, 1]");
      }
      break;
    case Command::Bounds:
      (void)theory_bound(bound_kind, bound);
      break;
  }
}

namespace {

json bound_json(BoundKind kind, const BoundParams& b) {
  return {{"kind", kind == BoundKind::ExpFamily ? "expfam" : "general"},
          {"rank", b.rank},
          {"p", b.p},
          {"d_u", b.d_u},
          {"D", b.D},
          {"mu", b.mu},
          {"gamma", b.gamma},
          {"l_sq", b.l_sq},
          {"u_sq", b.u_sq},
          {"kappa", b.kappa},
          {"rho", b.rho},
          {"varsigma", b.varsigma},
          {"constant_c", b.constant_c}};
}

void bound_from(const json& j, BoundKind& kind, BoundParams& b) {
  for (const auto& [k, _] : j.items()) {
    static const char* keys[] = {"kind", "rank", "p",     "d_u", "D",        "mu",        "gamma",
                                 "l_sq", "u_sq", "kappa", "rho", "varsigma", "constant_c"};
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError("unknown key '" + k + "' in bounds");
  }
  if (j.contains("kind")) {
    const auto k = j.at("kind").get<std::string>();
    if (k == "expfam") kind = BoundKind::ExpFamily;
    else if (k == "general") kind = BoundKind::General;
    else throw ConfigError("unknown bound kind '" + k + "'");
  }
  b.rank = j.value("rank", b.rank);
  b.p = j.value("p", b.p);
  b.d_u = j.value("d_u", b.d_u);
  b.D = j.value("D", b.D);
  b.mu = j.value("mu", b.mu);
  b.gamma = j.value("gamma", b.gamma);
  b.l_sq = j.value("l_sq", b.l_sq);
  b.u_sq = j.value("u_sq", b.u_sq);
  b.kappa = j.value("kappa", b.kappa);
  b.rho = j.value("rho", b.rho);
  b.varsigma = j.value("varsigma", b.varsigma);
  b.constant_c = j.value("constant_c", b.constant_c);
}

}  // namespace

std::string to_json(const RunConfig& c) {
  json j{{"command", command_token(c.command)},
         {"seed", c.seed ? json(*c.seed) : json(nullptr)},
         {"observations", c.observations},
         {"layout", c.layout},
         {"output", c.output},
         {"algorithm", c.algorithm == Algorithm::Plais ? "plais" : "apg"},
         {"solver", json::parse(solver_config_to_json(c.solver))},
         {"experiment", json::parse(experiment_spec_to_json(c.experiment))},
         {"target_source", c.target_source},
         {"cold_fraction", c.cold_fraction},
         {"bounds", bound_json(c.bound_kind, c.bound)},
         {"verbose", c.verbose}};
  return j.dump(2);
}

RunConfig run_config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  RunConfig c;
  try {
    for (const auto& [k, _] : j.items()) {
      static const char* keys[] = {"command",    "seed",   "observations",  "layout",
                                   "output",     "algorithm", "solver",     "experiment",
                                   "target_source", "cold_fraction", "bounds", "verbose"};
      bool known = false;
      for (const char* key : keys) known = known || k == key;
      if (!known) throw ConfigError("unknown key '" + k + "' in run config");
    }
    if (j.contains("command")) c.command = parse_command(j.at("command").get<std::string>());
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    c.observations = j.value("observations", c.observations);
    c.layout = j.value("layout", c.layout);
    c.output = j.value("output", c.output);
    if (j.contains("algorithm")) {
      const auto a = j.at("algorithm").get<std::string>();
      if (a == "plais") c.algorithm = Algorithm::Plais;
      else if (a == "apg") c.algorithm = Algorithm::Apg;
      else throw ConfigError("unknown algorithm '" + a + "'");
    }
    if (j.contains("solver")) c.solver = solver_config_from_json(j.at("solver").dump());
    if (j.contains("experiment")) c.experiment = experiment_spec_from_json(j.at("experiment").dump());
    c.target_source = j.value("target_source", c.target_source);
    c.cold_fraction = j.value("cold_fraction", c.cold_fraction);
    if (j.contains("bounds")) bound_from(j.at("bounds"), c.bound_kind, c.bound);
    c.verbose = j.value("verbose", c.verbose);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

}  // namespace cmc::tools
