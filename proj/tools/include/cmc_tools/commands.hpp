#pragma once

#include <iosfwd>

#include "cmc_tools/run_config.hpp"

namespace cmc::tools {

/// Each command returns its process exit code; errors propagate as cmc::Error.
/// `log` receives a JSON summary line (and per-iteration lines when verbose).
int cmd_generate(const RunConfig& cfg, std::ostream& log);
int cmd_fit(const RunConfig& cfg, std::ostream& log);
int cmd_experiment(const RunConfig& cfg, std::ostream& log);
int cmd_coldstart(const RunConfig& cfg, std::ostream& log);
int cmd_bounds(const RunConfig& cfg, std::ostream& log);

int run(const RunConfig& cfg, std::ostream& log);

inline constexpr int kExitOk = 0;
inline constexpr int kExitMaxIters = 5;

}  // namespace cmc::tools
