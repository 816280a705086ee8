#include <benchmark/benchmark.h>

#include <random>

#include "cmc/data.hpp"
#include "cmc/lowrank.hpp"

namespace {

Eigen::MatrixXd low_rank_plus_noise(int n, int rank) {
  cmc::Rng rng = cmc::make_rng(11, 0);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(n, rank), b(n, rank), e(n, n);
  for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = g(rng);
  for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = g(rng);
  for (Eigen::Index k = 0; k < e.size(); ++k) e.data()[k] = 0.01 * g(rng);
  return a * b.transpose() + e;
}

void BM_SvtExact(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd z = low_rank_plus_noise(n, 5);
  for (auto _ : state) benchmark::DoNotOptimize(cmc::svt_exact(z, 1.0));
}

void BM_SvtApprox(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd z = low_rank_plus_noise(n, 5);
  const auto warm = cmc::svt_exact(z, 1.0);
  Eigen::MatrixXd r0(n, 8);
  r0.leftCols(warm.rank()) = warm.v;
  r0.rightCols(8 - warm.rank()).setRandom();
  for (auto _ : state) benchmark::DoNotOptimize(cmc::approx_svt(z, r0, 1.0, 1e-6));
}

}  // namespace

BENCHMARK(BM_SvtExact)->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SvtApprox)->Arg(100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);
