#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "cmc/bench.hpp"
#include "cmc/solver.hpp"
#include "cmc/tuning.hpp"

namespace cmc::tools {

enum class Command { Fit, Generate, Experiment, ColdStart, Bounds };
std::string_view command_token(Command c);
Command parse_command(std::string_view token);

enum class Algorithm { Plais, Apg };

struct RunConfig {
  Command command = Command::Fit;
  std::optional<std::uint64_t> seed;  ///< required by generate, experiment, coldstart
  std::string observations;  ///< fit input CSV
  std::string layout;        ///< fit input layout sidecar
  std::string output = ".";  ///< output directory
  Algorithm algorithm = Algorithm::Plais;
  SolverConfig solver;
  ExperimentSpec experiment = ExperimentSpec::desk_exp1();
  int target_source = 0;
  double cold_fraction = 0.2;
  BoundKind bound_kind = BoundKind::ExpFamily;
  BoundParams bound;
  bool verbose = false;

  /// Checks the fields the command needs; input paths must exist.
  void validate() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string to_json(const RunConfig& cfg);
/// Missing keys keep their defaults.
RunConfig run_config_from_json(std::string_view text);

}  // namespace cmc::tools
