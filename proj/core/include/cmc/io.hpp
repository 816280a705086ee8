#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cmc/bench.hpp"
#include "cmc/data.hpp"
#include "cmc/expfam.hpp"
#include "cmc/lowrank.hpp"
#include "cmc/solver.hpp"

namespace cmc {

namespace fs = std::filesystem;

// Text files are written through a temporary sibling and renamed into place,
// so a failed write never leaves a partial file behind.
std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, std::string_view contents);

// Observations: header `v,i,j,y`, 0-based indices, y as %.17e.
std::string observations_to_csv(const ObservationSet& obs);
/// Parse errors carry the 1-based line number.
ObservationSet observations_from_csv(std::string_view text, const BlockLayout& layout,
                                     std::vector<ExpFamilyModel> families);

// Layout sidecar {d_u, d_vs, families:[{family, nuisance, gamma, kappa, support}]}.
struct LayoutFile {
  BlockLayout layout;
  std::vector<ExpFamilyModel> families;
  friend bool operator==(const LayoutFile&, const LayoutFile&) = default;
};
std::string layout_to_json(const LayoutFile& layout);
LayoutFile layout_from_json(std::string_view text);

std::string family_to_json(const ExpFamilyModel& model);
ExpFamilyModel family_from_json(std::string_view text);

std::string solver_config_to_json(const SolverConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SolverConfig solver_config_from_json(std::string_view text);

std::string experiment_spec_to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_spec_from_json(std::string_view text);

/// {config, lambda, lipschitz, objective_history, rank_history,
///  input_rank_history, lambda_history, restarts, terminated_by, wall_time_ms, ...}
std::string fit_result_to_json(const FitResult& fit);

/// One record per line (no trailing newline).
std::string metric_record_to_json(const MetricRecord& rec);
MetricRecord metric_record_from_json(std::string_view line);
std::string metric_records_to_jsonl(const std::vector<MetricRecord>& recs);

/// `p,mean_re,std_re,bound`.
std::string curve_to_csv(const std::vector<RateRow>& rows);

// Dense matrices as little-endian float64, column-major, in `<base>.bin`
// with the shape in `<base>.json`.
void write_matrix(const fs::path& base, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const fs::path& base);

// Factors as `<base>_u.bin`, `<base>_sigma.bin`, `<base>_v.bin` plus one
// `<base>.json` shape header.
void write_factors(const fs::path& base, const ThinFactors& f);
ThinFactors read_factors(const fs::path& base);

}  // namespace cmc
