#include "cmc/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "cmc/errors.hpp"

namespace cmc {

BlockLayout::BlockLayout(int d_u, std::vector<int> d_vs) : d_u_(d_u), d_vs_(std::move(d_vs)) {
  if (d_u_ < 1) throw ConfigError("layout needs at least one row");
  if (d_vs_.empty()) throw ConfigError("layout needs at least one source");
  offsets_.reserve(d_vs_.size());
  for (int dv : d_vs_) {
    if (dv < 1) throw ConfigError("every source needs at least one column");
    offsets_.push_back(total_);
    total_ += dv;
  }
}

int BlockLayout::global_col(int v, int j) const {
  if (v < 0 || v >= sources() || j < 0 || j >= cols(v)) {
    throw DataError("block index (" + std::to_string(v) + ", " + std::to_string(j) +
                    ") out of range");
  }
  return offsets_[static_cast<std::size_t>(v)] + j;
}

std::pair<int, int> BlockLayout::locate(int col) const {
  if (col < 0 || col >= total_) throw DataError("global column out of range");
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), col);
  const int v = static_cast<int>(it - offsets_.begin()) - 1;
  return {v, col - offsets_[static_cast<std::size_t>(v)]};
}

CollectiveMatrix::CollectiveMatrix(BlockLayout l)
    : layout(std::move(l)), values(Eigen::MatrixXd::Zero(layout.rows(), layout.total_cols())) {}

CollectiveMatrix::CollectiveMatrix(BlockLayout l, Eigen::MatrixXd v)
    : layout(std::move(l)), values(std::move(v)) {
  if (values.rows() != layout.rows() || values.cols() != layout.total_cols()) {
    throw DataError("matrix shape does not match its block layout");
  }
}

void ObservationSet::validate() const {
  if (!families.empty() && static_cast<int>(families.size()) != layout.sources()) {
    throw DataError("one family per source is required");
  }
  std::unordered_set<long long> seen;
  seen.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Observation& o = entries[k];
    if (o.v < 0 || o.v >= layout.sources() || o.i < 0 || o.i >= layout.rows() || o.j < 0 ||
        o.j >= layout.cols(o.v)) {
      throw DataError("observation " + std::to_string(k) + " has indices out of range");
    }
    if (!std::isfinite(o.y)) {
      throw DataError("observation " + std::to_string(k) + " is not finite");
    }
    const long long key =
        static_cast<long long>(o.i) * layout.total_cols() + layout.global_col(o.v, o.j);
    if (!seen.insert(key).second) {
      throw DataError("entry (" + std::to_string(o.v) + ", " + std::to_string(o.i) + ", " +
                      std::to_string(o.j) + ") observed more than once");
    }
  }
}

ObservationSet ObservationSet::source_subset(int v) const {
  ObservationSet out;
  out.layout = layout.single(v);
  if (!families.empty()) out.families = {families.at(static_cast<std::size_t>(v))};
  for (const Observation& o : entries) {
    if (o.v == v) out.entries.push_back({0, o.i, o.j, o.y});
  }
  return out;
}

Eigen::MatrixXd ObservationSet::dense() const {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(layout.rows(), layout.total_cols());
  for (const Observation& o : entries) y(o.i, column(o)) = o.y;
  return y;
}

std::size_t ObservationSet::count_in_source(int v) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [v](const Observation& o) { return o.v == v; }));
}

SamplingScheme SamplingScheme::uniform(double p) {
  SamplingScheme s;
  s.mode = Mode::Uniform;
  s.p = p;
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("sampling probability must lie in (0, 1]");
  return s;
}

SamplingScheme SamplingScheme::per_entry(Eigen::MatrixXd table) {
  SamplingScheme s;
  s.mode = Mode::PerEntry;
  s.pi = std::move(table);
  if (s.pi.size() == 0) throw ConfigError("empty sampling table");
  if (!(s.pi.array() > 0.0).all() || !(s.pi.array() <= 1.0).all()) {
    throw ConfigError("sampling probabilities must lie in (0, 1]");
  }
  s.p = s.pi.minCoeff();
  return s;
}

void SamplingScheme::validate(const BlockLayout& layout) const {
  if (mode == Mode::PerEntry &&
      (pi.rows() != layout.rows() || pi.cols() != layout.total_cols())) {
    throw ConfigError("sampling table shape does not match the layout");
  }
}

namespace {

template <typename Value>
ObservationSet masked(const BlockLayout& layout, const SamplingScheme& scheme,
                      std::uint64_t seed, Value&& value) {
  scheme.validate(layout);
  Rng rng = make_rng(seed, 0x6d61736bULL);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ObservationSet obs;
  obs.layout = layout;
  for (int v = 0; v < layout.sources(); ++v) {
    for (int i = 0; i < layout.rows(); ++i) {
      for (int j = 0; j < layout.cols(v); ++j) {
        const double pi = scheme.probability(i, layout.global_col(v, j));
        if (unif(rng) < pi) obs.entries.push_back({v, i, j, value(v, i, j)});
      }
    }
  }
  return obs;
}

}  // namespace

ObservationSet mask_sample(const CollectiveMatrix& full, const SamplingScheme& scheme,
                           std::uint64_t seed) {
  return masked(full.layout, scheme, seed,
                [&](int v, int i, int j) { return full(v, i, j); });
}

Marginals empirical_marginals(const ObservationSet& obs) {
  Marginals m;
  for (int v = 0; v < obs.layout.sources(); ++v) {
    m.row_sums.push_back(Eigen::VectorXd::Zero(obs.layout.rows()));
    m.col_sums.push_back(Eigen::VectorXd::Zero(obs.layout.cols(v)));
  }
  for (const Observation& o : obs.entries) {
    m.row_sums[static_cast<std::size_t>(o.v)](o.i) += 1.0;
    m.col_sums[static_cast<std::size_t>(o.v)](o.j) += 1.0;
  }
  return m;
}

double estimate_mu(const ObservationSet& obs) {
  const Marginals m = empirical_marginals(obs);
  Eigen::VectorXd rows = Eigen::VectorXd::Zero(obs.layout.rows());
  double col_max = 0.0;
  for (std::size_t v = 0; v < m.row_sums.size(); ++v) {
    rows += m.row_sums[v];
    col_max = std::max(col_max, m.col_sums[v].maxCoeff());
  }
  return std::max(rows.maxCoeff(), col_max);
}

double weighted_frobenius_sq(const CollectiveMatrix& a, const SamplingScheme& scheme) {
  if (scheme.mode == SamplingScheme::Mode::Uniform) return scheme.p * a.values.squaredNorm();
  scheme.validate(a.layout);
  return (scheme.pi.array() * a.values.array().square()).sum();
}

double FactorLaw::draw(Rng& rng) const {
  switch (kind) {
    case Kind::Normal: return std::normal_distribution<double>(a, b)(rng);
    case Kind::Poisson: return static_cast<double>(std::poisson_distribution<int>(a)(rng));
    case Kind::Bernoulli: return std::bernoulli_distribution(a)(rng) ? 1.0 : 0.0;
  }
  return 0.0;
}

std::vector<FactorLaw> SyntheticConfig::default_laws(int sources) {
  const FactorLaw cycle[3] = {FactorLaw::normal(0.5, 1.0), FactorLaw::poisson(0.5),
                              FactorLaw::bernoulli(0.5)};
  std::vector<FactorLaw> laws;
  for (int v = 0; v < sources; ++v) laws.push_back(cycle[v % 3]);
  return laws;
}

namespace {

Eigen::MatrixXd draw_factor(const FactorLaw& law, int rows, int cols, Rng& rng) {
  Eigen::MatrixXd f(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) f(r, c) = law.draw(rng);
  }
  return f;
}

constexpr int kMaxResamples = 64;

}  // namespace

SyntheticMatrix generate_synthetic(const SyntheticConfig& cfg) {
  BlockLayout layout(cfg.d_u, cfg.d_vs);
  const auto sources = static_cast<std::size_t>(layout.sources());
  if (cfg.ranks.size() != sources) throw ConfigError("one rank per source is required");
  if (cfg.laws.size() != sources) throw ConfigError("one factor law per source is required");
  if (!(cfg.gamma > 0.0)) throw ConfigError("gamma must be positive");
  int max_rank = 0;
  for (std::size_t v = 0; v < sources; ++v) {
    const int r = cfg.ranks[v];
    if (r < 1 || r > std::min(cfg.d_u, cfg.d_vs[v])) {
      throw ConfigError("rank of source " + std::to_string(v) + " must lie in [1, min(d_u, d_v)]");
    }
    max_rank = std::max(max_rank, r);
  }

  SyntheticMatrix out{CollectiveMatrix(layout), 0};
  Eigen::MatrixXd shared;
  if (cfg.sharing == FactorSharing::SharedRows) {
    Rng rng = make_rng(cfg.seed, 0x5348415245ULL);
    shared = draw_factor(cfg.laws.front(), cfg.d_u, max_rank, rng);
  }

  for (std::size_t v = 0; v < sources; ++v) {
    const int r = cfg.ranks[v];
    const int vi = static_cast<int>(v);
    bool done = false;
    for (int attempt = 0; attempt < kMaxResamples && !done; ++attempt) {
      Rng rng = make_rng(cfg.seed, (v + 1) * 1000 + static_cast<std::uint64_t>(attempt));
      Eigen::MatrixXd left = cfg.sharing == FactorSharing::SharedRows
                                 ? Eigen::MatrixXd(shared.leftCols(r))
                                 : draw_factor(cfg.laws[v], cfg.d_u, r, rng);
      const Eigen::MatrixXd right = draw_factor(cfg.laws[v], cfg.d_vs[v], r, rng);
      Eigen::MatrixXd block = left * right.transpose();
      const double sup = block.cwiseAbs().maxCoeff();
      if (sup == 0.0) {
        ++out.resamples;
        continue;
      }
      block *= cfg.gamma / sup;
      out.matrix.block(vi) = block;
      done = true;
    }
    if (!done) {
      throw NumericalError("factor law of source " + std::to_string(v) +
                           " keeps producing an all-zero block");
    }
  }
  return out;
}

ObservationSet observe_from_model(const CollectiveMatrix& params,
                                  const std::vector<ExpFamilyModel>& families,
                                  const SamplingScheme& scheme, std::uint64_t seed) {
  if (static_cast<int>(families.size()) != params.layout.sources()) {
    throw ConfigError("one family per source is required");
  }
  Rng noise = make_rng(seed, 0x6e6f697365ULL);
  ObservationSet obs = masked(params.layout, scheme, seed, [&](int v, int i, int j) {
    return sample(families[static_cast<std::size_t>(v)], params(v, i, j), noise);
  });
  obs.families = families;
  return obs;
}

ObservationSet observe_means(const CollectiveMatrix& params,
                             const std::vector<ExpFamilyModel>& families,
                             const SamplingScheme& scheme, std::uint64_t seed) {
  if (static_cast<int>(families.size()) != params.layout.sources()) {
    throw ConfigError("one family per source is required");
  }
  ObservationSet obs = masked(params.layout, scheme, seed, [&](int v, int i, int j) {
    return g_prime(families[static_cast<std::size_t>(v)], params(v, i, j));
  });
  obs.families = families;
  return obs;
}

ColdStartResult cold_start_transform(const ObservationSet& obs, int target_v, double fraction) {
  if (target_v < 0 || target_v >= obs.layout.sources()) {
    throw ConfigError("cold-start source out of range");
  }
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ConfigError("cold-start fraction must lie in [0, 1]");
  }
  ColdStartResult out{obs, {}, false};
  const std::size_t n_v = obs.count_in_source(target_v);
  if (n_v == 0) {
    out.no_observations = true;
    return out;
  }
  const auto quota = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n_v)));
  for (std::size_t k = 0; k < out.obs.entries.size() && out.zeroed.size() < quota; ++k) {
    Observation& o = out.obs.entries[k];
    if (o.v != target_v) continue;
    o.y = 0.0;
    out.zeroed.push_back(k);
  }
  return out;
}

std::pair<ObservationSet, ObservationSet> train_test_split(const ObservationSet& obs,
                                                           double train_fraction,
                                                           std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1]");
  }
  const std::size_t n = obs.size();
  const auto n_train =
      static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, 0x73706c6974ULL);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<char> in_train(n, 0);
  for (std::size_t k = 0; k < n_train; ++k) in_train[perm[k]] = 1;

  ObservationSet train{obs.layout, {}, obs.families};
  ObservationSet test{obs.layout, {}, obs.families};
  train.entries.reserve(n_train);
  test.entries.reserve(n - n_train);
  for (std::size_t k = 0; k < n; ++k) {
    (in_train[k] ? train : test).entries.push_back(obs.entries[k]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace cmc
