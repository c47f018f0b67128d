#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "odpp/diagnostics.hpp"
#include "odpp/errors.hpp"
#include "odpp/mcmc.hpp"
#include "odpp/priors.hpp"
#include "odpp/rng.hpp"

using namespace odpp;

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

TEST(Rng, DeterministicAndStreamsDiffer) {
  Rng a(42), b(42), c(42, 1);
  bool differ = false;
  for (int i = 0; i < 10; ++i) {
    const double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    differ |= x != c.uniform();
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_TRUE(differ);
  Rng s1 = a.split(3), s2 = b.split(3);
  EXPECT_EQ(s1.normal(), s2.normal());
}

TEST(Rng, PoissonMean) {
  Rng r(9);
  double sum = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += static_cast<double>(r.poisson(5.0));
  EXPECT_NEAR(sum / n, 5.0, 3.0 * std::sqrt(5.0 / n));
  EXPECT_EQ(r.poisson(0.0), 0);
}

TEST(Priors, Densities) {
  EXPECT_NEAR(log_density(InverseGamma{2.0, 0.1}, 0.5), 2 * std::log(0.1) - 3 * std::log(0.5) - 0.2, 1e-14);
  EXPECT_EQ(log_density(InverseGamma{2.0, 0.1}, -1.0), kNegInf);
  EXPECT_NEAR(log_density(Normal{0.0, 100.0}, 0.0), -0.5 * std::log(200 * std::numbers::pi), 1e-14);
  EXPECT_NEAR(log_density(Uniform{0.0, 10.0}, 3.0), -std::log(10.0), 1e-15);
  EXPECT_EQ(log_density(Uniform{0.0, 10.0}, 11.0), kNegInf);
  EXPECT_EQ(log_density(Flat{}, 1e6), 0.0);
  EXPECT_THROW(validate(Uniform{1.0, 1.0}), ConfigError);
  EXPECT_THROW(validate(Normal{0.0, -1.0}), ConfigError);
}

TEST(Priors, TransformsRoundTripWithJacobian) {
  for (const Prior& p : {Prior{InverseGamma{}}, Prior{Uniform{-1.0, 1.0}}, Prior{Normal{}}}) {
    const Transform t = default_transform(p);
    for (double u : {-3.0, -0.2, 0.0, 0.7, 2.5}) {
      const double x = t.to_natural(u);
      EXPECT_NEAR(t.to_unconstrained(x), u, 1e-10);
      const double h = 1e-6;
      const double dx = (t.to_natural(u + h) - t.to_natural(u - h)) / (2 * h);
      EXPECT_NEAR(t.log_jacobian(u), std::log(std::abs(dx)), 1e-6);
    }
  }
}

TEST(Diagnostics, QuantilesAndSd) {
  const Eigen::Vector4d v(4, 1, 3, 2);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 1.75);
  EXPECT_NEAR(sample_sd(v), std::sqrt(5.0 / 3.0), 1e-15);
}

TEST(Diagnostics, InefficiencyFactor) {
  Rng r(3);
  const int n = 100000;
  Eigen::VectorXd iid(n), ar(n);
  double x = 0;
  for (int i = 0; i < n; ++i) {
    iid[i] = r.normal();
    x = 0.9 * x + std::sqrt(1 - 0.81) * r.normal();
    ar[i] = x;
  }
  EXPECT_NEAR(inefficiency_factor(iid), 1.0, 0.1);
  // AR(1): (1 + rho) / (1 - rho) = 19.
  EXPECT_NEAR(inefficiency_factor(ar), 19.0, 2.5);
  EXPECT_EQ(inefficiency_factor(Eigen::VectorXd::Constant(50, 2.0)), 1.0);
}

TEST(Arwmh, FlatTargetAlwaysAccepts) {
  Rng rng(1);
  AdaptiveRWState s;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  const double start = s.log_step;
  const LogTarget flat = [](const Eigen::VectorXd&) { return 0.0; };
  for (int i = 0; i < 1000; ++i) {
    const ArwmhResult r = arwmh_step(x, flat, s, rng);
    x = r.next;
    s = r.state;
  }
  EXPECT_EQ(s.acceptance_rate(), 1.0);
  EXPECT_GT(s.log_step, start);
}

TEST(Arwmh, AdaptsToTargetAcceptance) {
  Rng rng(2);
  AdaptiveRWState s;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  const LogTarget normal = [](const Eigen::VectorXd& v) { return -0.5 * v.squaredNorm(); };
  int late_accepts = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const ArwmhResult r = arwmh_step(x, normal, s, rng);
    x = r.next;
    s = r.state;
    if (i >= n / 2) late_accepts += r.accepted;
  }
  EXPECT_NEAR(late_accepts / (n / 2.0), kVectorTargetAccept, 0.05);
}

TEST(Arwmh, RejectsMinusInfinityAndThrowsOnNan) {
  Rng rng(3);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 0.25);
  const LogTarget spike = [&](const Eigen::VectorXd& v) { return v == x0 ? 0.0 : kNegInf; };
  AdaptiveRWState s;
  for (int i = 0; i < 100; ++i) {
    const ArwmhResult r = arwmh_step(x0, spike, s, rng);
    EXPECT_FALSE(r.accepted);
    EXPECT_EQ(r.next, x0);
    s = r.state;
  }
  const LogTarget nan = [](const Eigen::VectorXd&) { return std::numeric_limits<double>::quiet_NaN(); };
  EXPECT_THROW(arwmh_step(x0, nan, AdaptiveRWState{}, rng, 0.0), NumericalError);
}

TEST(Ess, TerminatesOnRestrictedSupport) {
  Rng rng(4);
  const LogTarget orthant = [](const Eigen::VectorXd& v) { return (v.array() > 0).all() ? 0.0 : kNegInf; };
  Eigen::VectorXd x = Eigen::VectorXd::Ones(3);
  for (int i = 0; i < 200; ++i) {
    const EssResult r = ess_step(x, Eigen::VectorXd(Eigen::VectorXd::Random(3) * 5.0), orthant, rng);
    ASSERT_TRUE((r.next.array() > 0).all());
    x = r.next;
  }
}

TEST(Ess, ConjugateGaussian) {
  Rng rng(5);
  const LogTarget ll = [](const Eigen::VectorXd& v) { return -0.5 * (2.0 - v[0]) * (2.0 - v[0]); };
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  const int n = 100000;
  Eigen::VectorXd draws(n);
  for (int i = 0; i < n; ++i) {
    x = ess_step(x, Eigen::VectorXd::Constant(1, rng.normal()), ll, rng).next;
    draws[i] = x[0];
  }
  const double se = std::sqrt(0.5 * inefficiency_factor(draws) / n);
  EXPECT_NEAR(draws.mean(), 1.0, 3 * se);
  EXPECT_NEAR(sample_sd(draws) * sample_sd(draws), 0.5, 0.02);
}

namespace {

PosteriorProgram gaussian_program(double mean, double sd) {
  PosteriorProgram prog;
  const int i = prog.state.add("mu", Eigen::VectorXd::Zero(1));
  auto target = [=](const ChainState& s) { return -0.5 * std::pow((s[i][0] - mean) / sd, 2); };
  prog.blocks.push_back(std::make_unique<MhBlock>(i, "mu", std::vector<Prior>{Flat{}}, target));
  prog.scalar_records = {i};
  prog.derived.push_back({"target", target});
  return prog;
}

}  // namespace

TEST(RunChain, GaussianTarget) {
  PosteriorProgram prog = gaussian_program(3.0, 0.5);
  McmcConfig cfg;
  cfg.burn_in = 2000;
  cfg.keep = 20000;
  const PosteriorChain c = run_chain(prog, cfg);
  ASSERT_EQ(c.scalar_names, (std::vector<std::string>{"mu", "target"}));
  const Eigen::VectorXd mu = c.column("mu");
  const double se = 0.5 * std::sqrt(inefficiency_factor(mu) / mu.size());
  EXPECT_NEAR(mu.mean(), 3.0, 4 * se);
  ASSERT_EQ(c.blocks.size(), 1u);
  EXPECT_NEAR(c.blocks[0].acceptance_rate, kScalarTargetAccept, 0.05);
}

TEST(RunChain, EmptyKeepAndDeterminism) {
  McmcConfig cfg;
  cfg.burn_in = 10;
  cfg.keep = 0;
  cfg.seed = 77;
  PosteriorProgram p0 = gaussian_program(0.0, 1.0);
  const PosteriorChain empty = run_chain(p0, cfg);
  EXPECT_EQ(empty.draws(), 0u);
  EXPECT_EQ(empty.scalar_names.size(), 2u);
  EXPECT_EQ(empty.seed, 77u);
  EXPECT_EQ(empty.burn_in, 10u);

  cfg.keep = 500;
  PosteriorProgram p1 = gaussian_program(0.0, 1.0), p2 = gaussian_program(0.0, 1.0);
  EXPECT_EQ(run_chain(p1, cfg).scalars, run_chain(p2, cfg).scalars);
  EXPECT_THROW(empty.column("nope"), ConfigError);
}

TEST(CenteredRegression, LeavesPriorInvariant) {
  // No data: the joint law of (beta, z) must stay N(m, v) x N(0, s C).
  const std::vector<Point> pts{{0, 0}, {1, 0}, {0, 1}, {1, 1}, {2, 0.5}};
  const CholFactor f = chol(cov_matrix(pts, CovarianceModel::exponential(1.0, 1.0)));
  const double scale = 0.7;
  Eigen::MatrixXd x(5, 2);
  x << 1, 0.3, 1, -1.0, 1, 0.5, 1, 1.2, 1, -0.4;
  PosteriorProgram prog;
  const int ib = prog.state.add("beta", Eigen::Vector2d(5.0, -5.0));
  const int iz = prog.state.add("z", Eigen::VectorXd::Zero(5));
  auto flat = [](const ChainState&) { return 0.0; };
  auto draw = [&](const ChainState&, Rng& rng) { return Eigen::VectorXd(std::sqrt(scale) * mvn_sample(f, rng)); };
  const std::vector<Prior> priors{Normal{1.0, 4.0}, Normal{-0.5, 0.25}};
  auto factor = [&](const ChainState&) { return std::pair<const CholFactor*, double>(&f, scale); };
  prog.blocks.push_back(std::make_unique<EssBlock>(iz, "z", draw, flat));
  prog.blocks.push_back(std::make_unique<CenteredRegressionBlock>(ib, iz, x, priors, factor));
  prog.scalar_records = {ib};
  prog.latent_records = {iz};
  McmcConfig cfg;
  cfg.burn_in = 100;
  cfg.keep = 40000;
  const PosteriorChain c = run_chain(prog, cfg);
  const Eigen::VectorXd b0 = c.column("beta[0]"), b1 = c.column("beta[1]");
  const double n = static_cast<double>(c.draws());
  EXPECT_NEAR(b0.mean(), 1.0, 4 * 2.0 * std::sqrt(inefficiency_factor(b0) / n));
  EXPECT_NEAR(b1.mean(), -0.5, 4 * 0.5 * std::sqrt(inefficiency_factor(b1) / n));
  EXPECT_NEAR(sample_sd(b0), 2.0, 0.1);
  EXPECT_NEAR(sample_sd(b1), 0.5, 0.025);
  EXPECT_NEAR(sample_sd(Eigen::VectorXd(c.latent("z").col(0))), std::sqrt(scale), 0.03);
}

TEST(CenteredRegression, RejectsNonGaussianPriors) {
  EXPECT_FALSE(CenteredRegressionBlock::applicable({Uniform{0, 1}}));
  EXPECT_TRUE(CenteredRegressionBlock::applicable({Normal{}, Flat{}}));
}
