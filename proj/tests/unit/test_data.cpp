#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>
#include <set>

#include "cmc/data.hpp"
#include "cmc/errors.hpp"
#include "support.hpp"

using namespace cmc;

namespace {

int numerical_rank(const Eigen::MatrixXd& m, double tol = 1e-8) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  int r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) r += s(k) > tol * s(0) ? 1 : 0;
  return r;
}

CollectiveMatrix filled(const BlockLayout& layout, std::uint64_t seed) {
  return {layout, cmc::testing::random_matrix(layout.rows(), layout.total_cols(), seed)};
}

}  // namespace

TEST(Layout, GlobalColumnBijection) {
  Rng rng = make_rng(1);
  std::uniform_int_distribution<int> width(1, 40);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> d_vs;
    int total = 0;
    while (total < 10000 && d_vs.size() < 400) {
      d_vs.push_back(width(rng));
      total += d_vs.back();
    }
    const BlockLayout layout(3, d_vs);
    EXPECT_EQ(layout.total_cols(), total);
    int expected = 0;
    for (int v = 0; v < layout.sources(); ++v) {
      for (int j = 0; j < layout.cols(v); ++j) {
        const int col = layout.global_col(v, j);
        ASSERT_EQ(col, expected++);
        ASSERT_EQ(layout.locate(col), std::make_pair(v, j));
      }
    }
  }
}

TEST(Layout, RejectsInvalidShapes) {
  EXPECT_THROW(BlockLayout(0, {2}), ConfigError);
  EXPECT_THROW(BlockLayout(2, {}), ConfigError);
  EXPECT_THROW(BlockLayout(2, {3, 0}), ConfigError);
  const BlockLayout layout(2, {3, 4});
  EXPECT_THROW(layout.global_col(2, 0), DataError);
  EXPECT_THROW(layout.global_col(1, 4), DataError);
  EXPECT_THROW(layout.locate(7), DataError);
}

TEST(CollectiveMatrixTest, BlockViewsAliasStorage) {
  CollectiveMatrix m(BlockLayout(3, {2, 4}));
  m.block(1)(2, 3) = 5.0;
  EXPECT_EQ(m.values(2, 5), 5.0);
  EXPECT_EQ(m(1, 2, 3), 5.0);
  m(0, 1, 1) = -2.0;
  EXPECT_EQ(m.block(0)(1, 1), -2.0);
  EXPECT_THROW(CollectiveMatrix(BlockLayout(3, {2}), Eigen::MatrixXd::Zero(3, 3)), DataError);
}

TEST(Observations, ValidateRejectsDuplicatesRangeAndNaN) {
  const BlockLayout layout(2, {2, 2});
  ObservationSet obs{layout, {{0, 0, 0, 1.0}, {1, 1, 1, 2.0}}, {}};
  EXPECT_NO_THROW(obs.validate());
  obs.entries.push_back({0, 0, 0, 3.0});
  EXPECT_THROW(obs.validate(), DataError);
  obs.entries.back() = {1, 2, 0, 3.0};
  EXPECT_THROW(obs.validate(), DataError);
  obs.entries.back() = {1, 0, 0, std::nan("")};
  EXPECT_THROW(obs.validate(), DataError);
}

TEST(Observations, SourceSubsetReindexes) {
  const BlockLayout layout(2, {2, 3});
  ObservationSet obs{layout, {{0, 0, 1, 1.0}, {1, 1, 2, 2.0}, {1, 0, 0, 3.0}},
                     {ExpFamilyModel::gaussian(1.0), ExpFamilyModel::poisson()}};
  const auto sub = obs.source_subset(1);
  EXPECT_EQ(sub.layout, BlockLayout(2, {3}));
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.entries[0], (Observation{0, 1, 2, 2.0}));
  EXPECT_EQ(sub.families.size(), 1u);
  EXPECT_EQ(sub.families[0].family, Family::Poisson);
}

TEST(MaskSample, FullProbabilityKeepsEverything) {
  const BlockLayout layout(7, {3, 5});
  const auto full = filled(layout, 2);
  const auto obs = mask_sample(full, SamplingScheme::uniform(1.0), 3);
  EXPECT_EQ(obs.size(), 7u * 8u);
  for (const auto& o : obs.entries) EXPECT_EQ(o.y, full(o.v, o.i, o.j));
}

TEST(MaskSample, FractionConcentratesAtP) {
  const BlockLayout layout(200, {100, 200});
  const auto full = filled(layout, 4);
  for (double p : {0.1, 0.5, 0.9}) {
    const auto obs = mask_sample(full, SamplingScheme::uniform(p), 5);
    const double n = layout.size();
    EXPECT_NEAR(obs.size() / n, p, 4.0 * std::sqrt(p * (1 - p) / n));
  }
  const auto half = mask_sample(full, SamplingScheme::uniform(0.5), 6);
  EXPECT_NEAR(half.size() / layout.size(), 0.5, 0.02);
}

TEST(MaskSample, TinyProbabilityGivesEmptySet) {
  const BlockLayout layout(3, {3});
  const auto obs = mask_sample(filled(layout, 1), SamplingScheme::uniform(1e-12), 9);
  EXPECT_TRUE(obs.empty());
}

TEST(MaskSample, ReproducibleAndOrdered) {
  const BlockLayout layout(20, {10, 15});
  const auto full = filled(layout, 8);
  const auto a = mask_sample(full, SamplingScheme::uniform(0.3), 77);
  const auto b = mask_sample(full, SamplingScheme::uniform(0.3), 77);
  EXPECT_EQ(a.entries, b.entries);
  for (std::size_t k = 1; k < a.size(); ++k) {
    const auto& x = a.entries[k - 1];
    const auto& y = a.entries[k];
    EXPECT_TRUE(std::tie(x.v, x.i, x.j) < std::tie(y.v, y.i, y.j));
  }
}

TEST(MaskSample, PerEntryProbabilities) {
  const BlockLayout layout(2, {2});
  Eigen::MatrixXd pi(2, 2);
  pi << 1.0, 1e-12, 1e-12, 1.0;
  const auto obs = mask_sample(filled(layout, 3), SamplingScheme::per_entry(pi), 4);
  ASSERT_EQ(obs.size(), 2u);
  EXPECT_EQ(obs.entries[0].i, 0);
  EXPECT_EQ(obs.entries[0].j, 0);
  EXPECT_EQ(obs.entries[1].i, 1);
  EXPECT_EQ(obs.entries[1].j, 1);
  EXPECT_THROW(SamplingScheme::per_entry(Eigen::MatrixXd::Zero(2, 2)), ConfigError);
  EXPECT_THROW(SamplingScheme::uniform(0.0), ConfigError);
  EXPECT_THROW(SamplingScheme::uniform(1.5), ConfigError);
}

TEST(Marginals, EmptyAndFull) {
  const BlockLayout layout(4, {2, 3});
  const ObservationSet empty{layout, {}, {}};
  const auto m0 = empirical_marginals(empty);
  for (const auto& r : m0.row_sums) EXPECT_EQ(r.sum(), 0.0);
  EXPECT_EQ(estimate_mu(empty), 0.0);
  const auto full = mask_sample(filled(layout, 1), SamplingScheme::uniform(1.0), 1);
  const auto m1 = empirical_marginals(full);
  for (int v = 0; v < 2; ++v) {
    for (int i = 0; i < 4; ++i) EXPECT_EQ(m1.row_sums[v](i), layout.cols(v));
    for (int j = 0; j < layout.cols(v); ++j) EXPECT_EQ(m1.col_sums[v](j), 4);
  }
}

TEST(Marginals, MatchBruteForceRecount) {
  const BlockLayout layout(13, {4, 7, 2});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto obs = mask_sample(filled(layout, seed), SamplingScheme::uniform(0.4), seed);
    const auto m = empirical_marginals(obs);
    double mu = 0.0;
    for (int i = 0; i < layout.rows(); ++i) {
      double row_total = 0.0;
      for (int v = 0; v < layout.sources(); ++v) {
        double count = 0.0;
        for (const auto& o : obs.entries) count += (o.v == v && o.i == i) ? 1 : 0;
        EXPECT_EQ(m.row_sums[v](i), count);
        row_total += count;
      }
      mu = std::max(mu, row_total);
    }
    for (int v = 0; v < layout.sources(); ++v) {
      for (int j = 0; j < layout.cols(v); ++j) {
        double count = 0.0;
        for (const auto& o : obs.entries) count += (o.v == v && o.j == j) ? 1 : 0;
        EXPECT_EQ(m.col_sums[v](j), count);
        mu = std::max(mu, count);
      }
    }
    EXPECT_EQ(estimate_mu(obs), mu);
  }
}

TEST(Marginals, MuWorkedValues) {
  const BlockLayout square(5, {5});
  EXPECT_EQ(estimate_mu(mask_sample(filled(square, 1), SamplingScheme::uniform(1.0), 1)), 5.0);
  const BlockLayout three(4, {2, 2, 2});
  EXPECT_EQ(estimate_mu(mask_sample(filled(three, 1), SamplingScheme::uniform(1.0), 1)), 6.0);
}

TEST(WeightedFrobenius, UniformAndPerEntry) {
  const BlockLayout layout(6, {3, 4});
  EXPECT_EQ(weighted_frobenius_sq(CollectiveMatrix(layout), SamplingScheme::uniform(0.3)), 0.0);
  const auto a = filled(layout, 3);
  const double fro = a.values.squaredNorm();
  EXPECT_NEAR(weighted_frobenius_sq(a, SamplingScheme::uniform(0.3)), 0.3 * fro, 1e-12 * fro);
  Eigen::MatrixXd scaled = a.values * std::sqrt(10.0 / fro);
  EXPECT_NEAR(weighted_frobenius_sq({layout, scaled}, SamplingScheme::uniform(0.3)), 3.0, 1e-12);
  const Eigen::MatrixXd pi = cmc::testing::random_matrix(6, 7, 5, 0.1, 1.0);
  double brute = 0.0;
  for (int i = 0; i < 6; ++i) {
    for (int c = 0; c < 7; ++c) brute += pi(i, c) * a.values(i, c) * a.values(i, c);
  }
  EXPECT_NEAR(weighted_frobenius_sq(a, SamplingScheme::per_entry(pi)), brute, 1e-12 * brute);
}

TEST(Synthetic, AllOnesFactorsGiveConstantBlock) {
  SyntheticConfig cfg;
  cfg.d_u = 4;
  cfg.d_vs = {3};
  cfg.ranks = {1};
  cfg.laws = {FactorLaw::bernoulli(1.0)};
  cfg.gamma = 2.5;
  const auto m = generate_synthetic(cfg).matrix;
  EXPECT_TRUE((m.values.array() == 2.5).all());
}

TEST(Synthetic, DeskExperimentShapesRanksAndScale) {
  SyntheticConfig cfg;
  cfg.d_u = 300;
  cfg.d_vs = {100, 100, 100};
  cfg.ranks = {5, 5, 5};
  cfg.laws = SyntheticConfig::default_laws(3);
  cfg.gamma = 1.0;
  cfg.seed = 3;
  for (auto sharing : {FactorSharing::Independent, FactorSharing::SharedRows}) {
    cfg.sharing = sharing;
    const auto m = generate_synthetic(cfg).matrix;
    EXPECT_EQ(m.values.rows(), 300);
    EXPECT_EQ(m.values.cols(), 300);
    for (int v = 0; v < 3; ++v) {
      const Eigen::MatrixXd b = m.block(v);
      EXPECT_EQ(b.rows(), 300);
      EXPECT_EQ(b.cols(), 100);
      EXPECT_LE(numerical_rank(b), 5);
      EXPECT_NEAR(b.cwiseAbs().maxCoeff(), 1.0, 1e-12);
    }
  }
}

TEST(Synthetic, RankMatchesFactorRank) {
  SyntheticConfig cfg;
  cfg.d_u = 40;
  cfg.d_vs = {30, 25};
  cfg.ranks = {3, 6};
  cfg.laws = {FactorLaw::normal(0.5, 1.0), FactorLaw::normal(0.5, 1.0)};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const auto m = generate_synthetic(cfg).matrix;
    EXPECT_EQ(numerical_rank(m.block(0)), 3);
    EXPECT_EQ(numerical_rank(m.block(1)), 6);
  }
}

TEST(Synthetic, SharedRowsGiveCommonColumnSpace) {
  SyntheticConfig cfg;
  cfg.d_u = 50;
  cfg.d_vs = {20, 20, 20};
  cfg.ranks = {4, 4, 4};
  cfg.laws = {FactorLaw::normal(0.5, 1.0), FactorLaw::normal(0.5, 1.0), FactorLaw::normal(0.5, 1.0)};
  cfg.sharing = FactorSharing::SharedRows;
  cfg.seed = 8;
  EXPECT_EQ(numerical_rank(generate_synthetic(cfg).matrix.values), 4);
  cfg.sharing = FactorSharing::Independent;
  EXPECT_EQ(numerical_rank(generate_synthetic(cfg).matrix.values), 12);
}

TEST(Synthetic, DeterministicAndDegenerateDrawsResampled) {
  SyntheticConfig cfg;
  cfg.d_u = 3;
  cfg.d_vs = {2};
  cfg.ranks = {1};
  cfg.laws = {FactorLaw::bernoulli(0.2)};
  int resampled = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    cfg.seed = seed;
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    EXPECT_EQ(a.matrix.values, b.matrix.values);
    EXPECT_EQ(a.resamples, b.resamples);
    EXPECT_GT(a.matrix.values.cwiseAbs().maxCoeff(), 0.0);
    resampled += a.resamples;
  }
  EXPECT_GT(resampled, 0);
}

TEST(Synthetic, RankLargerThanBlockRejected) {
  SyntheticConfig cfg;
  cfg.d_u = 3;
  cfg.d_vs = {2};
  cfg.ranks = {3};
  EXPECT_THROW(generate_synthetic(cfg), ConfigError);
}

TEST(ObserveFromModel, TinyGaussianNoiseTracksParameters) {
  const BlockLayout layout(30, {20});
  const CollectiveMatrix params{layout, cmc::testing::random_matrix(30, 20, 4)};
  const auto obs = observe_from_model(params, {ExpFamilyModel::gaussian(1e-6)},
                                      SamplingScheme::uniform(1.0), 5);
  int close = 0;
  for (const auto& o : obs.entries) close += std::abs(o.y - 1e-6 * params(o.v, o.i, o.j)) < 0.01;
  EXPECT_GT(close, 0.99 * obs.size());
}

TEST(ObserveFromModel, PoissonBlockMean) {
  const BlockLayout layout(100, {100});
  const CollectiveMatrix params(layout);
  const auto obs = observe_from_model(params, {ExpFamilyModel::poisson()},
                                      SamplingScheme::uniform(1.0), 6);
  double s = 0.0;
  for (const auto& o : obs.entries) s += o.y;
  EXPECT_NEAR(s / obs.size(), 1.0, 0.05);
  EXPECT_EQ(obs.families.size(), 1u);
}

TEST(ObserveFromModel, EmptyMaskAndDomainErrors) {
  const BlockLayout layout(3, {3});
  const CollectiveMatrix zeros(layout);
  EXPECT_TRUE(observe_from_model(zeros, {ExpFamilyModel::poisson()},
                                 SamplingScheme::uniform(1e-12), 1)
                  .empty());
  EXPECT_THROW(observe_from_model(zeros, {ExpFamilyModel::gamma_dist(1.0, {-2.0, -1.0})},
                                  SamplingScheme::uniform(1.0), 1),
               DomainError);
}

TEST(ObserveMeans, ValuesAreMeanLink) {
  const BlockLayout layout(5, {4});
  const CollectiveMatrix params{layout, cmc::testing::random_matrix(5, 4, 2)};
  const auto model = ExpFamilyModel::binomial(3.0);
  const auto obs = observe_means(params, {model}, SamplingScheme::uniform(1.0), 1);
  for (const auto& o : obs.entries) EXPECT_EQ(o.y, g_prime(model, params(o.v, o.i, o.j)));
}

TEST(ColdStart, ZeroesFirstFifth) {
  const BlockLayout layout(5, {2, 2});
  ObservationSet obs{layout, {}, {}};
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 2; ++j) {
      obs.entries.push_back({0, i, j, 1.0});
      obs.entries.push_back({1, i, j, 2.0});
    }
  }
  const auto res = cold_start_transform(obs, 1);
  EXPECT_EQ(res.zeroed.size(), 2u);
  int zeros = 0;
  for (const auto& o : res.obs.entries) zeros += o.y == 0.0;
  EXPECT_EQ(zeros, 2);
  EXPECT_EQ(res.obs.entries[1].y, 0.0);
  EXPECT_EQ(res.obs.entries[3].y, 0.0);
  EXPECT_EQ(res.obs.entries[5].y, 2.0);
  EXPECT_EQ(res.obs.size(), obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    EXPECT_EQ(res.obs.entries[k].i, obs.entries[k].i);
    EXPECT_EQ(res.obs.entries[k].j, obs.entries[k].j);
  }
  const auto again = cold_start_transform(res.obs, 1);
  int zeros_again = 0;
  for (const auto& o : again.obs.entries) zeros_again += o.y == 0.0;
  EXPECT_EQ(zeros_again, 2);
}

TEST(ColdStart, UnobservedTargetIsFlaggedNoOp) {
  const BlockLayout layout(2, {2, 2});
  const ObservationSet obs{layout, {{0, 0, 0, 1.0}}, {}};
  const auto res = cold_start_transform(obs, 1);
  EXPECT_TRUE(res.no_observations);
  EXPECT_EQ(res.obs.entries, obs.entries);
  EXPECT_THROW(cold_start_transform(obs, 2), ConfigError);
}

TEST(TrainTestSplit, PartitionsObservations) {
  const BlockLayout layout(20, {10, 10});
  const auto obs = mask_sample(filled(layout, 1), SamplingScheme::uniform(0.7), 2);
  const auto [train, test] = train_test_split(obs, 0.8, 3);
  EXPECT_EQ(train.size(), static_cast<std::size_t>(std::ceil(0.8 * obs.size())));
  EXPECT_EQ(train.size() + test.size(), obs.size());
  std::set<std::tuple<int, int, int>> seen;
  for (const auto& o : train.entries) seen.insert({o.v, o.i, o.j});
  for (const auto& o : test.entries) EXPECT_TRUE(seen.insert({o.v, o.i, o.j}).second);
  EXPECT_EQ(seen.size(), obs.size());
  const auto again = train_test_split(obs, 0.8, 3);
  EXPECT_EQ(again.first.entries, train.entries);
}
