#include <benchmark/benchmark.h>

#include "cmc/data.hpp"
#include "cmc/solver.hpp"

namespace {

cmc::ObservationSet desk_instance(int d_u) {
  cmc::SyntheticConfig sc;
  sc.d_u = d_u;
  sc.d_vs = {d_u / 2, d_u / 2, d_u / 2};
  sc.ranks = {5, 5, 5};
  sc.laws = cmc::SyntheticConfig::default_laws(3);
  sc.sharing = cmc::FactorSharing::SharedRows;
  sc.seed = 5;
  const auto m = cmc::generate_synthetic(sc);
  const std::vector<cmc::ExpFamilyModel> fam{cmc::ExpFamilyModel::gaussian(1.0),
                                             cmc::ExpFamilyModel::poisson(),
                                             cmc::ExpFamilyModel::binomial(1.0)};
  return cmc::observe_from_model(m.matrix, fam, cmc::SamplingScheme::uniform(0.5), 9);
}

void run(benchmark::State& state, bool exact) {
  const auto obs = desk_instance(static_cast<int>(state.range(0)));
  cmc::SolverConfig cfg;
  cfg.lipschitz_auto = true;
  cfg.lambda_fraction = 0.05;
  cfg.exact_svt = exact;
  cfg.record_timing = false;
  for (auto _ : state) benchmark::DoNotOptimize(cmc::plais_impute(obs, cfg));
}

void BM_PlaisApprox(benchmark::State& state) { run(state, false); }
void BM_PlaisExact(benchmark::State& state) { run(state, true); }

}  // namespace

BENCHMARK(BM_PlaisApprox)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PlaisExact)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
