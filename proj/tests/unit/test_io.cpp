#include <gtest/gtest.h>

#include <filesystem>

#include "cmc/errors.hpp"
#include "cmc/io.hpp"
#include "support.hpp"

using namespace cmc;
using cmc::testing::all_families;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("cmc_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Csv, RoundTripIsLossless) {
  const BlockLayout layout(20, {6, 6, 6, 6, 6});
  const auto obs = cmc::testing::random_observations(layout, all_families(), 0.4, 3);
  const std::string text = observations_to_csv(obs);
  const auto back = observations_from_csv(text, layout, obs.families);
  EXPECT_EQ(back.entries, obs.entries);
  EXPECT_EQ(observations_to_csv(back), text);
}

TEST(Csv, ErrorsCarryLineNumbers) {
  const BlockLayout layout(2, {2});
  const std::vector<ExpFamilyModel> fam{ExpFamilyModel::gaussian(1.0)};
  EXPECT_THROW(observations_from_csv("", layout, fam), DataError);
  EXPECT_THROW(observations_from_csv("a,b,c,d\n", layout, fam), DataError);
  try {
    observations_from_csv("v,i,j,y\n0,0,0,1.0\n0,1,x,2.0\n", layout, fam);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(observations_from_csv("v,i,j,y\n0,0,5,1.0\n", layout, fam), DataError);
  EXPECT_THROW(observations_from_csv("v,i,j,y\n0,0,0,1.0,7\n", layout, fam), DataError);
  EXPECT_THROW(observations_from_csv("v,i,j,y\n0,0,0,1\n0,0,0,2\n", layout, fam), DataError);
  EXPECT_EQ(observations_from_csv("v,i,j,y\n", layout, fam).size(), 0u);
}

TEST(Layout, JsonRoundTrip) {
  const LayoutFile lf{BlockLayout(20, {6, 6, 6, 6, 6}), all_families()};
  EXPECT_EQ(layout_from_json(layout_to_json(lf)), lf);
  for (const auto& f : all_families()) EXPECT_EQ(family_from_json(family_to_json(f)), f);
  EXPECT_THROW(layout_from_json(R"({"d_u": 3, "d_vs": [2], "bogus": 1})"), ConfigError);
  EXPECT_THROW(layout_from_json("{"), ConfigError);
}

TEST(SolverConfigJson, RoundTripAndOverrides) {
  SolverConfig cfg;
  cfg.lambda = 0.125;
  cfg.nu = 0.3;
  cfg.clip_gamma = 2.0;
  cfg.mode = SolverConfig::Mode::GeneralLoss;
  cfg.losses = {LipschitzLoss::quantile(0.25), LipschitzLoss::logistic()};
  cfg.init_rank = 7;
  cfg.seed = 1ULL << 60;
  cfg.lambda_fraction = 0.02;
  EXPECT_EQ(solver_config_from_json(solver_config_to_json(cfg)), cfg);
  EXPECT_EQ(solver_config_from_json("{}"), SolverConfig{});
  const auto automatic = solver_config_from_json(R"({"lambda": "auto"})");
  EXPECT_TRUE(automatic.lambda_auto);
  EXPECT_THROW(solver_config_from_json(R"({"lamda": 1})"), ConfigError);
  EXPECT_THROW(solver_config_from_json(R"({"nu": 2})"), ConfigError);
}

TEST(ExperimentSpecJson, RoundTrip) {
  auto spec = ExperimentSpec::desk_exp1();
  EXPECT_EQ(experiment_spec_from_json(experiment_spec_to_json(spec)), spec);
  spec.synth.sharing = FactorSharing::SharedRows;
  spec.observation = ObservationMode::Sampled;
  spec.families = {ExpFamilyModel::poisson(), ExpFamilyModel::binomial(2.0),
                   ExpFamilyModel::gaussian(0.5)};
  spec.methods = {Method::PerSource};
  spec.train_fraction = 1.0;
  EXPECT_EQ(experiment_spec_from_json(experiment_spec_to_json(spec)), spec);
}

TEST(MetricRecordJson, RoundTripWithNaN) {
  MetricRecord r;
  r.experiment = "exp1";
  r.p = 0.6;
  r.trial = 3;
  r.method = Method::PerSource;
  r.relative_error = 0.123456789012345678;
  r.source_re = {0.1, 0.2, 1.0 / 3.0};
  r.mse = 1e-5;
  r.rank = 15;
  r.iterations = 17;
  r.terminated_by = "tolerance";
  r.heldout_risk = std::nan("");
  r.objective_history = {1.0, 0.5};
  r.rank_history = {1, 5};
  const auto back = metric_record_from_json(metric_record_to_json(r));
  EXPECT_TRUE(std::isnan(back.heldout_risk));
  MetricRecord a = r;
  MetricRecord b = back;
  a.heldout_risk = b.heldout_risk = 0.0;
  EXPECT_EQ(a, b);
  r.error = "solver failed";
  r.heldout_risk = 0.25;
  EXPECT_EQ(metric_record_from_json(metric_record_to_json(r)), r);
}

TEST(CurveCsv, HeaderAndRows) {
  const std::vector<RateRow> rows{{0.2, 0.5, 0.1, 0.01, 2.0}, {0.4, 0.3, 0.05, 0.005, 0.5}};
  const std::string csv = curve_to_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "p,mean_re,std_re,bound");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(MatrixFiles, RoundTripBitExact) {
  const auto dir = scratch_dir("matrix");
  const Eigen::MatrixXd m = cmc::testing::random_matrix(7, 5, 2) * 1e-3;
  write_matrix(dir / "m", m);
  EXPECT_EQ(fs::file_size(dir / "m.bin"), 7u * 5u * 8u);
  EXPECT_EQ(read_matrix(dir / "m"), m);
  const auto f = svt_exact(m, 1e-4);
  write_factors(dir / "f", f);
  const auto g = read_factors(dir / "f");
  EXPECT_EQ(g.u, f.u);
  EXPECT_EQ(g.sigma, f.sigma);
  EXPECT_EQ(g.v, f.v);
  write_factors(dir / "z", ThinFactors::zero(4, 3));
  const auto z = read_factors(dir / "z");
  EXPECT_EQ(z.rank(), 0);
  EXPECT_EQ(z.rows(), 4);
  EXPECT_EQ(z.cols(), 3);
  fs::remove_all(dir);
}

TEST(TextFiles, MissingFileIsDataError) {
  EXPECT_THROW(read_text_file("/nonexistent/cmc/file.csv"), DataError);
}
