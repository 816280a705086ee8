#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "cmc/expfam.hpp"

namespace cmc {

/// Column structure of a collective matrix: d_u shared rows and V blocks of
/// d_v columns, concatenated left to right into D = sum d_v global columns.
class BlockLayout {
 public:
  BlockLayout() = default;
  BlockLayout(int d_u, std::vector<int> d_vs);

  [[nodiscard]] int rows() const { return d_u_; }
  [[nodiscard]] int sources() const { return static_cast<int>(d_vs_.size()); }
  [[nodiscard]] int cols(int v) const { return d_vs_.at(static_cast<std::size_t>(v)); }
  [[nodiscard]] int total_cols() const { return total_; }
  [[nodiscard]] int offset(int v) const { return offsets_.at(static_cast<std::size_t>(v)); }
  [[nodiscard]] const std::vector<int>& block_cols() const { return d_vs_; }
  /// d_u * D, the normalization of every data term.
  [[nodiscard]] double size() const { return static_cast<double>(d_u_) * total_; }

  [[nodiscard]] int global_col(int v, int j) const;
  /// Inverse of global_col: (v, j) owning a global column.
  [[nodiscard]] std::pair<int, int> locate(int col) const;

  /// Layout of a single block, used for per-source fits.
  [[nodiscard]] BlockLayout single(int v) const { return BlockLayout(d_u_, {cols(v)}); }

  friend bool operator==(const BlockLayout& a, const BlockLayout& b) {
    return a.d_u_ == b.d_u_ && a.d_vs_ == b.d_vs_;
  }

 private:
  int d_u_ = 0;
  std::vector<int> d_vs_;
  std::vector<int> offsets_;
  int total_ = 0;
};

/// Dense d_u x D matrix with its block structure. block(v) aliases the
/// underlying storage.
struct CollectiveMatrix {
  BlockLayout layout;
  Eigen::MatrixXd values;

  CollectiveMatrix() = default;
  explicit CollectiveMatrix(BlockLayout l);
  CollectiveMatrix(BlockLayout l, Eigen::MatrixXd v);

  auto block(int v) { return values.middleCols(layout.offset(v), layout.cols(v)); }
  [[nodiscard]] auto block(int v) const {
    return values.middleCols(layout.offset(v), layout.cols(v));
  }
  double& operator()(int v, int i, int j) { return values(i, layout.global_col(v, j)); }
  double operator()(int v, int i, int j) const { return values(i, layout.global_col(v, j)); }
};

struct Observation {
  int v = 0;
  int i = 0;
  int j = 0;
  double y = 0.0;
  friend bool operator==(const Observation&, const Observation&) = default;
};

/// Masked observations {(v, i, j, y)} plus the per-source family tags.
/// Each entry is observed at most once.
struct ObservationSet {
  BlockLayout layout;
  std::vector<Observation> entries;
  std::vector<ExpFamilyModel> families;

  [[nodiscard]] std::size_t size() const { return entries.size(); }
  [[nodiscard]] bool empty() const { return entries.empty(); }
  [[nodiscard]] int column(const Observation& o) const { return layout.global_col(o.v, o.j); }

  /// Index range check and duplicate detection; throws DataError.
  void validate() const;

  /// Observations of source v re-indexed as a one-block set.
  [[nodiscard]] ObservationSet source_subset(int v) const;

  /// Dense d_u x D matrix holding y on observed entries and zero elsewhere.
  [[nodiscard]] Eigen::MatrixXd dense() const;

  [[nodiscard]] std::size_t count_in_source(int v) const;
};

/// Bernoulli sampling probabilities pi^v_ij.
struct SamplingScheme {
  enum class Mode { Uniform, PerEntry };
  Mode mode = Mode::Uniform;
  double p = 1.0;
  Eigen::MatrixXd pi;  ///< d_u x D table, used in PerEntry mode

  static SamplingScheme uniform(double p);
  static SamplingScheme per_entry(Eigen::MatrixXd table);

  [[nodiscard]] double probability(int i, int col) const {
    return mode == Mode::Uniform ? p : pi(i, col);
  }
  void validate(const BlockLayout& layout) const;
};

/// Includes each entry independently with probability pi; y is copied from
/// the full matrix. Entries are ordered by source, then row-major.
ObservationSet mask_sample(const CollectiveMatrix& full, const SamplingScheme& scheme,
                           std::uint64_t seed);

struct Marginals {
  std::vector<Eigen::VectorXd> row_sums;  ///< per source, length d_u
  std::vector<Eigen::VectorXd> col_sums;  ///< per source, length d_v
};

Marginals empirical_marginals(const ObservationSet& obs);

/// Plug-in bound on the sampling marginals:
/// max(max_i sum_v rows[v][i], max_{v,j} cols[v][j]).
double estimate_mu(const ObservationSet& obs);

/// sum pi^v_ij (A^v_ij)^2.
double weighted_frobenius_sq(const CollectiveMatrix& a, const SamplingScheme& scheme);

/// Law of the i.i.d. entries of the factors L^v and R^v.
struct FactorLaw {
  enum class Kind { Normal, Poisson, Bernoulli };
  Kind kind = Kind::Normal;
  double a = 0.5;  ///< mean (Normal), rate (Poisson), success probability (Bernoulli)
  double b = 1.0;  ///< standard deviation (Normal only)

  static FactorLaw normal(double mean, double sd) { return {Kind::Normal, mean, sd}; }
  static FactorLaw poisson(double rate) { return {Kind::Poisson, rate, 0.0}; }
  static FactorLaw bernoulli(double p) { return {Kind::Bernoulli, p, 0.0}; }
  double draw(Rng& rng) const;
  friend bool operator==(const FactorLaw&, const FactorLaw&) = default;
};

enum class FactorSharing {
  Independent,  ///< L^v drawn independently per block
  SharedRows,   ///< one common row factor across blocks
};

struct SyntheticConfig {
  int d_u = 0;
  std::vector<int> d_vs;
  std::vector<int> ranks;
  std::vector<FactorLaw> laws;  ///< one per source
  double gamma = 1.0;
  FactorSharing sharing = FactorSharing::Independent;
  std::uint64_t seed = 0;

  /// Normal(0.5, 1), Poisson(0.5), Bernoulli(0.5) cycled over the sources.
  static std::vector<FactorLaw> default_laws(int sources);
  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

struct SyntheticMatrix {
  CollectiveMatrix matrix;
  int resamples = 0;  ///< degenerate all-zero block draws that were redrawn
};

/// M^v = L^v R^v^T, each block scaled to sup-norm gamma.
SyntheticMatrix generate_synthetic(const SyntheticConfig& cfg);

/// Observes y ~ family v at eta = M^v_ij on every masked-in entry.
ObservationSet observe_from_model(const CollectiveMatrix& params,
                                  const std::vector<ExpFamilyModel>& families,
                                  const SamplingScheme& scheme, std::uint64_t seed);

/// Masked observation of the means G'(M^v_ij) instead of random draws.
ObservationSet observe_means(const CollectiveMatrix& params,
                             const std::vector<ExpFamilyModel>& families,
                             const SamplingScheme& scheme, std::uint64_t seed);

struct ColdStartResult {
  ObservationSet obs;
  std::vector<std::size_t> zeroed;  ///< indices into obs.entries that were set to 0
  bool no_observations = false;     ///< target source had nothing to zero
};

/// Sets y = 0 on the first ceil(fraction * |Omega_v|) observations of source
/// target_v, in list order. The mask is unchanged.
ColdStartResult cold_start_transform(const ObservationSet& obs, int target_v,
                                     double fraction = 0.2);

/// Random partition of the observations; |train| = ceil(train_fraction * |Omega|).
/// Both halves keep the original relative order.
std::pair<ObservationSet, ObservationSet> train_test_split(const ObservationSet& obs,
                                                           double train_fraction,
                                                           std::uint64_t seed);

}  // namespace cmc
