#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "cmc/data.hpp"
#include "cmc/expfam.hpp"

namespace cmc::testing {

inline std::vector<ExpFamilyModel> all_families() {
  return {ExpFamilyModel::gaussian(1.0), ExpFamilyModel::binomial(3.0),
          ExpFamilyModel::gamma_dist(2.0, {-2.0, -0.5}),
          ExpFamilyModel::negative_binomial(2.0, {-1.5, -0.3}), ExpFamilyModel::poisson()};
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                     double lo = -1.0, double hi = 1.0) {
  Rng rng = make_rng(seed, 99);
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = u(rng);
  }
  return m;
}

inline Eigen::MatrixXd random_low_rank(Eigen::Index rows, Eigen::Index cols, int rank,
                                       std::uint64_t seed) {
  Rng rng = make_rng(seed, 7);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(rows, rank);
  Eigen::MatrixXd b(cols, rank);
  for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = g(rng);
  for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = g(rng);
  return a * b.transpose();
}

/// Observation set over `layout` with every entry kept with probability p and
/// y drawn from the per-source family at a parameter inside its domain.
inline ObservationSet random_observations(const BlockLayout& layout,
                                          const std::vector<ExpFamilyModel>& families, double p,
                                          std::uint64_t seed) {
  Rng rng = make_rng(seed, 3);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  ObservationSet obs{layout, {}, families};
  for (int v = 0; v < layout.sources(); ++v) {
    const auto& f = families[static_cast<std::size_t>(v)];
    const Interval iv = f.support.value_or(Interval{-f.gamma, f.gamma});
    std::uniform_real_distribution<double> eta(iv.lo, iv.hi);
    for (int i = 0; i < layout.rows(); ++i) {
      for (int j = 0; j < layout.cols(v); ++j) {
        if (coin(rng) < p) obs.entries.push_back({v, i, j, sample(f, eta(rng), rng)});
      }
    }
  }
  return obs;
}

/// A parameter matrix whose block v lies inside family v's parameter interval.
inline Eigen::MatrixXd random_parameters(const BlockLayout& layout,
                                         const std::vector<ExpFamilyModel>& families,
                                         std::uint64_t seed) {
  Rng rng = make_rng(seed, 5);
  Eigen::MatrixXd w(layout.rows(), layout.total_cols());
  for (int v = 0; v < layout.sources(); ++v) {
    const auto& f = families[static_cast<std::size_t>(v)];
    const Interval iv = f.support.value_or(Interval{-f.gamma, f.gamma});
    std::uniform_real_distribution<double> eta(iv.lo, iv.hi);
    for (int j = 0; j < layout.cols(v); ++j) {
      for (int i = 0; i < layout.rows(); ++i) w(i, layout.global_col(v, j)) = eta(rng);
    }
  }
  return w;
}

}  // namespace cmc::testing
