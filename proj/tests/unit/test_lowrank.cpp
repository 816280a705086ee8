#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>

#include "cmc/errors.hpp"
#include "cmc/lowrank.hpp"
#include "cmc/objective.hpp"
#include "support.hpp"

using namespace cmc;

namespace {

void expect_thin_invariants(const ThinFactors& f) {
  const int k = f.rank();
  ASSERT_EQ(f.u.cols(), k);
  ASSERT_EQ(f.v.cols(), k);
  EXPECT_LE(k, std::min(f.rows(), f.cols()));
  if (k == 0) return;
  EXPECT_LT((f.u.transpose() * f.u - Eigen::MatrixXd::Identity(k, k)).norm(), 1e-10);
  EXPECT_LT((f.v.transpose() * f.v - Eigen::MatrixXd::Identity(k, k)).norm(), 1e-10);
  for (int i = 0; i < k; ++i) {
    EXPECT_GT(f.sigma(i), 0.0);
    if (i > 0) EXPECT_LE(f.sigma(i), f.sigma(i - 1));
  }
}

double prox_objective(const Eigen::MatrixXd& z, const Eigen::MatrixXd& q, double tau) {
  return 0.5 * (z - q).squaredNorm() + tau * nuclear_norm(q);
}

}  // namespace

TEST(SvtExact, ShiftsDiagonal) {
  const Eigen::MatrixXd z = Eigen::Vector2d(3, 1).asDiagonal();
  const auto f = svt_exact(z, 2.0);
  EXPECT_EQ(f.rank(), 1);
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(2, 2);
  expected(0, 0) = 1.0;
  EXPECT_LT((f.dense() - expected).norm(), 1e-14);
}

TEST(SvtExact, ZeroThresholdIsThinSvd) {
  const Eigen::MatrixXd z = cmc::testing::random_matrix(9, 7, 1);
  const auto f = svt_exact(z, 0.0);
  EXPECT_EQ(f.rank(), 7);
  EXPECT_LT((f.dense() - z).norm(), 1e-12);
  expect_thin_invariants(f);
}

TEST(SvtExact, LargeThresholdGivesEmptyFactors) {
  const Eigen::MatrixXd z = cmc::testing::random_matrix(6, 4, 2);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(z);
  const auto f = svt_exact(z, svd.singularValues()(0));
  EXPECT_EQ(f.rank(), 0);
  EXPECT_EQ(f.dense().norm(), 0.0);
  EXPECT_EQ(f.rows(), 6);
  EXPECT_EQ(f.cols(), 4);
}

TEST(SvtExact, ProxCharacterizationUnderPerturbation) {
  Rng rng = make_rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Eigen::MatrixXd z = cmc::testing::random_matrix(8 + seed * 10, 6 + seed * 12, seed);
    for (double tau : {0.1, 0.5, 1.0, 2.0}) {
      const Eigen::MatrixXd q = svt_exact(z, tau).dense();
      const double best = prox_objective(z, q, tau);
      for (int k = 0; k < 1000 / 4; ++k) {
        Eigen::MatrixXd e(z.rows(), z.cols());
        for (Eigen::Index t = 0; t < e.size(); ++t) e.data()[t] = g(rng);
        const double scale = std::pow(10.0, -1 - (k % 5));
        EXPECT_GE(prox_objective(z, q + scale * e, tau), best - 1e-9);
      }
    }
  }
}

TEST(SvtExact, Nonexpansive) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Eigen::MatrixXd a = cmc::testing::random_matrix(10, 8, 2 * seed);
    const Eigen::MatrixXd b = cmc::testing::random_matrix(10, 8, 2 * seed + 1);
    const double tau = 0.2 * (seed % 7);
    EXPECT_LE((svt_exact(a, tau).dense() - svt_exact(b, tau).dense()).norm(),
              (a - b).norm() * (1 + 1e-12));
  }
}

TEST(Qr, OrthonormalInputPreservedUpToSign) {
  const Eigen::MatrixXd q0 = qr_orthonormalize(cmc::testing::random_matrix(12, 4, 1)).q;
  const auto r = qr_orthonormalize(q0);
  EXPECT_FALSE(r.rank_deficient());
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(std::abs(r.q.col(k).dot(q0.col(k))), 1.0, 1e-12);
}

TEST(Qr, DuplicateColumnDroppedAndFlagged) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 2);
  m(0, 0) = m(0, 1) = 1.0;
  const auto r = qr_orthonormalize(m);
  EXPECT_EQ(r.q.cols(), 1);
  EXPECT_TRUE(r.rank_deficient());
  EXPECT_EQ(r.dropped, std::vector<int>{1});
  EXPECT_EQ(r.q(0, 0), 1.0);
}

TEST(Qr, RandomInputsOrthonormalWithNonnegativeDiagonal) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::MatrixXd m = cmc::testing::random_matrix(30, 10, seed);
    const auto r = qr_orthonormalize(m);
    ASSERT_EQ(r.q.cols(), 10);
    EXPECT_LT((r.q.transpose() * r.q - Eigen::MatrixXd::Identity(10, 10)).norm(), 1e-12);
    const Eigen::MatrixXd rr = r.q.transpose() * m;
    for (int k = 0; k < 10; ++k) EXPECT_GT(rr(k, k), 0.0);
    EXPECT_LT((r.q * rr - m).norm(), 1e-12 * m.norm());
  }
}

TEST(PowerMethod, ExactRankRecoversRange) {
  const Eigen::MatrixXd z = cmc::testing::random_low_rank(40, 30, 4, 2);
  for (double delta : {1e-2, 1e-4, 1e-6}) {
    const auto pm = power_method(z, cmc::testing::random_matrix(30, 4, 3), delta, 100, 1);
    EXPECT_TRUE(pm.converged);
    EXPECT_LE((pm.q * (pm.q.transpose() * z) - z).norm(), 10 * delta * z.norm());
    EXPECT_LT((pm.q.transpose() * pm.q - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-10);
  }
}

TEST(PowerMethod, RankOneAlignsWithLeftVector) {
  const Eigen::VectorXd u = cmc::testing::random_matrix(20, 1, 1).col(0).normalized();
  const Eigen::VectorXd v = cmc::testing::random_matrix(15, 1, 2).col(0).normalized();
  const Eigen::MatrixXd z = 3.0 * u * v.transpose();
  const double delta = 1e-6;
  const auto pm = power_method(z, cmc::testing::random_matrix(15, 1, 3), delta);
  EXPECT_GE(std::abs(pm.q.col(0).dot(u)), 1 - 10 * delta);
}

TEST(PowerMethod, HugeToleranceStopsAfterOneIteration) {
  const Eigen::MatrixXd z = cmc::testing::random_matrix(20, 15, 5);
  const auto pm = power_method(z, cmc::testing::random_matrix(15, 3, 6), 1e3);
  EXPECT_EQ(pm.iterations, 1);
  EXPECT_TRUE(pm.converged);
  EXPECT_LT((pm.q.transpose() * pm.q - Eigen::MatrixXd::Identity(3, 3)).norm(), 1e-10);
}

TEST(PowerMethod, IterationCapFlagged) {
  const Eigen::MatrixXd z = cmc::testing::random_matrix(40, 40, 7);
  const auto pm = power_method(z, cmc::testing::random_matrix(40, 5, 8), 1e-14, 3);
  EXPECT_FALSE(pm.converged);
  EXPECT_EQ(pm.iterations, 3);
}

TEST(PowerMethod, RankDeficientBlockRefilled) {
  const Eigen::MatrixXd z = cmc::testing::random_low_rank(20, 20, 2, 4);
  const auto pm = power_method(z, cmc::testing::random_matrix(20, 5, 5), 1e-6, 100, 9);
  EXPECT_TRUE(pm.refilled);
  EXPECT_EQ(pm.q.cols(), 5);
  EXPECT_LT((pm.q.transpose() * pm.q - Eigen::MatrixXd::Identity(5, 5)).norm(), 1e-10);
}

TEST(ApproxSvt, ExactRowSpaceWarmStartMatchesExact) {
  const Eigen::MatrixXd z = cmc::testing::random_low_rank(50, 60, 5, 11);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinV);
  const double lambda = 0.5 * svd.singularValues()(4);
  const Eigen::MatrixXd r0 = svd.matrixV().leftCols(5);
  const auto res = approx_svt(z, r0, lambda, 1e-10);
  EXPECT_LT((res.factors.dense() - svt_exact(z, lambda).dense()).norm(), 1e-8);
  expect_thin_invariants(res.factors);
}

TEST(ApproxSvt, ThresholdAboveTopValueGivesEmpty) {
  const Eigen::MatrixXd z = cmc::testing::random_matrix(10, 8, 1);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(z);
  const auto res = approx_svt(z, cmc::testing::random_matrix(8, 3, 2), svd.singularValues()(0),
                              1e-6);
  EXPECT_EQ(res.factors.rank(), 0);
}

TEST(ApproxSvt, IdentityWarmStartOnDiagonal) {
  const Eigen::MatrixXd z = Eigen::Vector4d(5, 4, 2, 1).asDiagonal();
  const auto res = approx_svt(z, Eigen::MatrixXd::Identity(4, 4), 1.5, 1e-8);
  EXPECT_LT((res.factors.dense() - Eigen::Vector4d(3.5, 2.5, 0.5, 0).asDiagonal().toDenseMatrix())
                .norm(),
            1e-12);
}

TEST(ApproxSvt, GapShrinksOverDeltaLadder) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Eigen::MatrixXd z = cmc::testing::random_low_rank(50, 60, 5, seed) +
                              1e-3 * cmc::testing::random_matrix(50, 60, seed + 30);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(z);
    const double lambda = 0.5 * svd.singularValues()(4);
    const Eigen::MatrixXd exact = svt_exact(z, lambda).dense();
    const Eigen::MatrixXd r0 = cmc::testing::random_matrix(60, 8, seed + 60);
    double previous = INFINITY;
    for (double delta : {1e-1, 1e-3, 1e-5, 1e-7}) {
      const auto res = approx_svt(z, r0, lambda, delta, 1000, seed);
      const double gap = (res.factors.dense() - exact).norm();
      EXPECT_LE(gap, previous + 1e-12);
      previous = gap;
    }
    EXPECT_LT(previous, 1e-6);
  }
}

TEST(Rank1, WorkedValues) {
  const Eigen::VectorXd u = cmc::testing::random_matrix(6, 1, 1).col(0).normalized();
  const Eigen::VectorXd v = cmc::testing::random_matrix(4, 1, 2).col(0).normalized();
  EXPECT_NEAR(rank1_svd(7.0 * u * v.transpose()).sigma, 7.0, 1e-12);
  const auto d = rank1_svd(Eigen::Vector2d(5, 3).asDiagonal().toDenseMatrix());
  EXPECT_NEAR(d.sigma, 5.0, 1e-10);
  EXPECT_NEAR(std::abs(d.u(0)), 1.0, 1e-10);
  EXPECT_THROW(rank1_svd(Eigen::MatrixXd::Zero(3, 3)), NumericalError);
}

TEST(Rank1, MatchesFullSvd) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd y = cmc::testing::random_matrix(30, 20, seed);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(y);
    EXPECT_NEAR(rank1_svd(y).sigma, svd.singularValues()(0), 1e-8 * svd.singularValues()(0));
  }
}

TEST(RandomCompletion, OrthogonalToBasis) {
  const Eigen::MatrixXd basis = qr_orthonormalize(cmc::testing::random_matrix(20, 3, 1)).q;
  const Eigen::MatrixXd full = random_orthonormal_completion(basis, 20, 4, 5);
  ASSERT_EQ(full.cols(), 7);
  EXPECT_EQ(full.leftCols(3), basis);
  const Eigen::MatrixXd extra = full.rightCols(4);
  EXPECT_LT((basis.transpose() * extra).norm(), 1e-12);
  EXPECT_LT((extra.transpose() * extra - Eigen::MatrixXd::Identity(4, 4)).norm(), 1e-12);
  EXPECT_EQ(full, random_orthonormal_completion(basis, 20, 4, 5));
  EXPECT_EQ(random_orthonormal_completion(basis, 5, 4, 5).cols(), 5);
}
