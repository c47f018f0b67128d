#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "odpp/errors.hpp"
#include "odpp/io.hpp"
#include "odpp/rng.hpp"

using namespace odpp;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("odpp_test_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path file(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int cli(const std::string& line, std::string* err_text = nullptr) const {
    std::vector<std::string> args;
    std::istringstream in(line);
    for (std::string w; in >> w;) args.push_back(w);
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (err_text) *err_text = err.str();
    return code;
  }

  fs::path dir_;
};

}  // namespace

using Csv = TempDir;
using Cli = TempDir;

TEST_F(Csv, MalformedLineReportsLineNumber) {
  const fs::path p = file("pts.csv", "id,x,y\n0,1,2\n1,3\n");
  try {
    read_points_csv(p, Units::Kilometres);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_points_csv(dir_ / "missing.csv", Units::Kilometres), IoError);
}

TEST_F(Csv, MetresAreConverted) {
  const fs::path p = file("pts.csv", "id,x,y\n0,1500,250\n");
  const PointPattern pts = read_points_csv(p, Units::Metres);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_DOUBLE_EQ(pts.points[0].x(), 1.5);
  EXPECT_DOUBLE_EQ(pts.points[0].y(), 0.25);
  const AreasTable a = read_areas_csv(file("areas.csv", "cell_id,area\n0,2000000\n"), Units::Metres);
  EXPECT_DOUBLE_EQ(a.areas[0], 2.0);
  EXPECT_THROW(parse_units("miles"), ConfigError);
}

TEST_F(Csv, PairsRoundTripWithMissingRecovery) {
  PairedPattern p;
  p.thefts = {{0.125, 3.5}, {1.0 / 3.0, 2.0}};
  p.recoveries = {Point(4.0, 0.1), std::nullopt};
  write_pairs_csv(dir_ / "pairs.csv", p, Units::Kilometres);
  const PairedPattern q = read_pairs_csv(dir_ / "pairs.csv", Units::Kilometres);
  ASSERT_EQ(q.size(), 2u);
  EXPECT_EQ(q.thefts[1], p.thefts[1]);
  EXPECT_EQ(*q.recoveries[0], *p.recoveries[0]);
  EXPECT_FALSE(q.recoveries[1].has_value());
}

TEST_F(Csv, CovariateRowsMustMatchGrid) {
  const fs::path p = file("cov.csv", "cell_id,a\n0,1.5\n1,2.5\n");
  EXPECT_EQ(read_covariates_csv(p, 2).values.rows(), 2);
  EXPECT_THROW(read_covariates_csv(p, 3), DimensionError);
  EXPECT_THROW(read_covariates_csv(file("dup.csv", "cell_id,a\n0,1\n0,2\n"), 2), DataError);
}

TEST_F(Csv, ChainRoundTrip) {
  PosteriorChain c;
  c.scalar_names = {"beta", "sigma2"};
  c.scalars.resize(3, 2);
  c.scalars << 1.0, 0.1, 1.0 / 3.0, 0.2, -2.5e-7, 0.3;
  c.latent_names = {"z"};
  c.latents = {Eigen::MatrixXd::Random(3, 4)};
  write_chain_jsonl(dir_ / "chain.jsonl", c);
  const PosteriorChain d = read_chain_jsonl(dir_ / "chain.jsonl");
  EXPECT_EQ(d.scalar_names, c.scalar_names);
  EXPECT_EQ(d.scalars, c.scalars);
  EXPECT_EQ(d.latent("z"), c.latents[0]);
}

TEST(Config, OverridesAndUnknownKeys) {
  cli::Config c = cli::default_config();
  cli::apply_override(c, "mcmc.keep=123");
  EXPECT_EQ(c["mcmc"]["keep"], 123);
  cli::apply_override(c, "validate.w=[2,4]");
  EXPECT_EQ(c["validate"]["w"].size(), 2u);
  cli::apply_override(c, "theft.model=nhpp");
  EXPECT_EQ(c["theft"]["model"], "nhpp");
  EXPECT_THROW(cli::apply_override(c, "mcmc.keep"), ConfigError);
  cli::Config unknown = cli::Config::object();
  cli::apply_override(unknown, "mcmc.nope=1");
  EXPECT_THROW(cli::merge_config(cli::default_config(), unknown), ConfigError);
  cli::Config user = {{"mcmc", {{"burn_in", 5}}}};
  EXPECT_EQ(cli::merge_config(cli::default_config(), user)["mcmc"]["burn_in"], 5);
  user = {{"mcmc", {{"burn_in", "many"}}}};
  EXPECT_THROW(cli::merge_config(cli::default_config(), user), ConfigError);
}

TEST(Config, ExitCodes) {
  EXPECT_EQ(cli::exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(cli::exit_code_for(IoError("x")), 3);
  EXPECT_EQ(cli::exit_code_for(DataError("x")), 4);
  EXPECT_EQ(cli::exit_code_for(DimensionError("x")), 5);
  EXPECT_EQ(cli::exit_code_for(NumericalError("x")), 6);
  EXPECT_EQ(cli::exit_code_for(std::runtime_error("x")), 1);
}

TEST_F(Cli, ErrorsMapToExitCodes) {
  const std::string out = (dir_ / "o").string();
  EXPECT_EQ(cli("fit-theft --out-dir " + out + " --set data.points_csv=" + (dir_ / "none.csv").string()), 3);
  EXPECT_EQ(cli("fit-theft --out-dir " + out + " --set mcmc.bogus=1"), 2);
  EXPECT_EQ(cli("simulate --out-dir " + out + " --set grid.nx=40 --set grid.ny=40"), 2);
  const fs::path bad = file("bad.csv", "id,x,y\n0,1,1\n1,2\n");
  std::string err;
  EXPECT_EQ(cli("fit-theft --out-dir " + out + " --set data.points_csv=" + bad.string(), &err), 4);
  EXPECT_NE(err.find("bad.csv:3"), std::string::npos) << err;
}

TEST_F(Cli, SimulateThenFitAndValidate) {
  const std::string d = dir_.string();
  ASSERT_EQ(cli("simulate --seed 3 --out-dir " + d + "/sim --set simulate.beta=[5,1]"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "sim" / "points.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "sim" / "manifest.json"));
  ASSERT_EQ(cli("fit-theft --out-dir " + d + "/fit --set data.points_csv=" + d + "/sim/points.csv --set data.covariates_csv=" +
                d + "/sim/covariates.csv --set theft.covariates=[\"x1\"] --set mcmc.burn_in=100 --set mcmc.keep=100"),
            0);
  for (const char* f : {"chain.jsonl", "summary.json", "surface.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "fit" / f)) << f;
  }
  EXPECT_EQ(read_chain_jsonl(dir_ / "fit" / "chain.jsonl").draws(), 100u);
  ASSERT_EQ(cli("validate --out-dir " + d + "/val --set data.points_csv=" + d +
                "/sim/points.csv --set mcmc.burn_in=100 --set mcmc.keep=100 --set validate.predictive_draws=100"
                " --set validate.w=[2] --set validate.regions_per_w=10"),
            0);
  EXPECT_TRUE(fs::exists(dir_ / "val" / "report.json"));
  EXPECT_TRUE(fs::exists(dir_ / "val" / "scores.csv"));
}
