#include <gtest/gtest.h>

#include <cmath>

#include "odpp/covariates.hpp"
#include "odpp/diagnostics.hpp"
#include "odpp/errors.hpp"
#include "odpp/grid.hpp"
#include "odpp/model_select.hpp"
#include "odpp/ppm.hpp"
#include "odpp/rng.hpp"
#include "odpp/simulate.hpp"

using namespace odpp;

namespace {

GridSpec grid10() { return build_regular_grid({0, 10, 0, 10}, 10, 10); }

McmcConfig quick(std::size_t burn, std::size_t keep, std::uint64_t seed = 1) {
  McmcConfig c;
  c.burn_in = burn;
  c.keep = keep;
  c.seed = seed;
  return c;
}

Eigen::MatrixXd random_design(int k, Rng& rng) {
  Eigen::MatrixXd x(k, 2);
  for (int i = 0; i < k; ++i) x.row(i) << 1.0, rng.normal();
  return x;
}

}  // namespace

TEST(GriddedLikelihood, EmptyCounts) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 3, 2);
  Rng rng(1);
  const Eigen::MatrixXd x = random_design(6, rng);
  const Eigen::Vector2d beta(0.3, -0.7);
  const double got = loglik_gridded(beta, {}, Eigen::VectorXi::Zero(6), g, x);
  const double expect = -((x * beta).array().exp() * g.std_areas().array()).sum();
  EXPECT_NEAR(got, expect, 1e-14);
}

TEST(GriddedLikelihood, MatchesPoissonMass) {
  const GridSpec g = build_regular_grid({0, 3, 0, 1}, 4, 3);
  Rng rng(2);
  const Eigen::MatrixXd x = random_design(12, rng);
  const Eigen::Vector2d beta(2.0, 0.5);
  Eigen::VectorXd z(12);
  Eigen::VectorXi n(12);
  for (int k = 0; k < 12; ++k) {
    z[k] = 0.3 * rng.normal();
    n[k] = static_cast<int>(rng.poisson(3.0));
  }
  const Eigen::VectorXd areas = g.std_areas();
  double mass = 0.0, constant = 0.0;
  for (int k = 0; k < 12; ++k) {
    const double mu = std::exp(x.row(k).dot(beta) + z[k]) * areas[k];
    mass += n[k] * std::log(mu) - mu - std::lgamma(n[k] + 1.0);
    constant += n[k] * std::log(areas[k]) - std::lgamma(n[k] + 1.0);
  }
  EXPECT_NEAR(loglik_gridded(beta, z, n, g, x), mass - constant, 1e-10);
}

TEST(GriddedLikelihood, ZeroFieldIsBitwiseNhpp) {
  const GridSpec g = grid10();
  Rng rng(3);
  const Eigen::MatrixXd x = random_design(100, rng);
  Eigen::VectorXi n(100);
  for (int k = 0; k < 100; ++k) n[k] = static_cast<int>(rng.poisson(10.0));
  const Eigen::Vector2d beta(7.0, 0.2);
  EXPECT_EQ(loglik_gridded(beta, {}, n, g, x), loglik_gridded(beta, Eigen::VectorXd::Zero(100), n, g, x));
}

TEST(GriddedLikelihood, GradientMatchesFiniteDifferences) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 3, 3);
  Rng rng(4);
  const Eigen::MatrixXd x = random_design(9, rng);
  Eigen::VectorXd z(9);
  Eigen::VectorXi n(9);
  for (int k = 0; k < 9; ++k) {
    z[k] = rng.normal();
    n[k] = static_cast<int>(rng.poisson(4.0));
  }
  const Eigen::Vector2d beta(3.0, -0.4);
  const GriddedGradient grad = loglik_gridded_gradient(beta, z, n, g, x);
  const double h = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Eigen::Vector2d up = beta, dn = beta;
    up[j] += h;
    dn[j] -= h;
    const double fd = (loglik_gridded(up, z, n, g, x) - loglik_gridded(dn, z, n, g, x)) / (2 * h);
    EXPECT_NEAR(grad.beta[j], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
  for (int k = 0; k < 9; ++k) {
    Eigen::VectorXd up = z, dn = z;
    up[k] += h;
    dn[k] -= h;
    const double fd = (loglik_gridded(beta, up, n, g, x) - loglik_gridded(beta, dn, n, g, x)) / (2 * h);
    EXPECT_NEAR(grad.z[k], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(GriddedLikelihood, OverflowNamesCell) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 2, 1);
  Eigen::VectorXd z(2);
  z << 0.0, 800.0;
  try {
    loglik_gridded(Eigen::VectorXd::Zero(1), z, Eigen::VectorXi::Zero(2), g, intercept_design(2));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("cell 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(loglik_gridded(Eigen::VectorXd::Zero(1), {}, Eigen::VectorXi::Zero(3), g, intercept_design(2)),
               DimensionError);
}

TEST(FitNhpp, HomogeneousInterceptNearLogN) {
  const GridSpec g = grid10();
  Rng rng(5);
  const SimulatedPattern sim = simulate_lgcp(g, intercept_design(100), Eigen::VectorXd::Constant(1, std::log(800.0)),
                                             std::nullopt, rng);
  const PosteriorChain c = fit_nhpp(sim.pattern, g, intercept_design(100), {}, quick(1000, 4000));
  const Eigen::VectorXd b = c.column("beta");
  EXPECT_NEAR(b.mean(), std::log(static_cast<double>(sim.pattern.size())), 3 * sample_sd(b));
}

TEST(FitNhpp, EmptyPatternFollowsTightPrior) {
  const GridSpec g = grid10();
  PriorSpec p;
  p["beta"] = Normal{2.0, 0.01};
  const PosteriorChain c = fit_nhpp(PointPattern{}, g, intercept_design(100), p, quick(1000, 4000));
  // Posterior of beta with n = 0: density prop. to exp(-e^b) N(b; 2, 0.01), mode just below 2.
  EXPECT_NEAR(c.mean("beta"), 2.0, 0.15);
  EXPECT_LT(c.mean("beta"), 2.0);
}

TEST(FitLgcp, SingleCellMatchesQuadrature) {
  // K = 1: n ~ Poisson(exp(w)), w = beta + z, z | s2 ~ N(0, s2), s2 ~ IG(2, 0.1),
  // beta ~ N(0, 100). Posterior mean of w by 2-D quadrature over (w, s2).
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 1, 1);
  PointPattern p;
  for (int i = 0; i < 7; ++i) p.points.emplace_back(0.5, 0.5);
  double num = 0.0, den = 0.0;
  for (int a = 0; a < 400; ++a) {
    const double ls2 = -10.0 + 14.0 * (a + 0.5) / 400;  // log s2
    const double s2 = std::exp(ls2);
    const double ig = std::log(0.01) - 3.0 * ls2 - 0.1 / s2 + ls2;  // includes ds2 = s2 dls2
    for (int b = 0; b < 2000; ++b) {
      const double w = -4.0 + 10.0 * (b + 0.5) / 2000;
      const double v = 100.0 + s2;
      const double lp = ig - 0.5 * std::log(v) - 0.5 * w * w / v - std::exp(w) + 7.0 * w;
      const double d = std::exp(lp);
      num += w * d;
      den += d;
    }
  }
  const double expect = num / den;
  const PosteriorChain c = fit_lgcp(p, g, intercept_design(1), {}, quick(2000, 40000, 9));
  const Eigen::VectorXd w = c.column("beta") + c.latent("z").col(0);
  const double se = sample_sd(w) * std::sqrt(inefficiency_factor(w) / static_cast<double>(w.size()));
  EXPECT_NEAR(w.mean(), expect, 4 * se + 1e-3);
}

TEST(FitLgcp, HotspotCellsHaveHigherIntensity) {
  const GridSpec g = grid10();
  Rng rng(6);
  PointPattern p;
  for (int i = 0; i < 300; ++i) p.points.emplace_back(rng.uniform(0, 10), rng.uniform(0, 10));
  for (int i = 0; i < 400; ++i) p.points.emplace_back(rng.uniform(2, 4), rng.uniform(6, 8));
  const PosteriorChain c = fit_lgcp(p, g, intercept_design(100), {}, quick(1000, 1000));
  const IntensitySurface s = posterior_intensity(c, g, intercept_design(100));
  const int hot = g.locate({3.0, 7.0}).value();
  const int cold = g.locate({8.5, 1.5}).value();
  EXPECT_GT(s.mean[hot], 3.0 * s.mean[cold]);
  EXPECT_TRUE((s.lo95.array() <= s.mean.array()).all());
  EXPECT_TRUE((s.mean.array() <= s.hi95.array()).all());
}

TEST(Surface, SingleDrawAndConstantIntercept) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 2, 2);
  PosteriorChain c;
  c.scalar_names = {"beta"};
  c.scalars = Eigen::MatrixXd::Constant(1, 1, 1.5);
  const IntensitySurface s = posterior_intensity(c, g, intercept_design(4));
  for (int k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(s.mean[k], std::exp(1.5));
  EXPECT_EQ(s.sd, Eigen::VectorXd::Zero(4));
}

TEST(Predictive, PoissonMeanAndScale) {
  Rng rng(7);
  const Eigen::VectorXd areas = Eigen::VectorXd::Constant(4, 0.25);
  const Eigen::VectorXd lambda = Eigen::VectorXd::Constant(4, 20.0);  // lambda * Delta = 5
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(4);
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += sample_predictive_counts(lambda, areas, 1.0, rng).cast<double>();
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(sum[k] / n, 5.0, 3 * std::sqrt(5.0 / n));
  EXPECT_EQ(sample_predictive_counts(Eigen::VectorXd::Zero(4), areas, 1.0, rng), Eigen::VectorXi::Zero(4));
  EXPECT_DOUBLE_EQ(thinning_scale(0.5), 1.0);
  EXPECT_DOUBLE_EQ(thinning_scale(0.8), 0.25);
  EXPECT_THROW(thinning_scale(1.0), ConfigError);
}

TEST(PoissonGlm, InterceptClosedForm) {
  const GridSpec g = build_regular_grid({0, 2, 0, 1}, 4, 1);
  const Eigen::Vector4i n(3, 0, 5, 2);
  const Eigen::VectorXd offset = g.std_areas().array().log();
  const GlmFit f = poisson_glm(n, intercept_design(4), offset);
  EXPECT_TRUE(f.converged);
  EXPECT_NEAR(f.coefficients[0], std::log(10.0), 1e-10);
  double ll = 0.0;
  for (int k = 0; k < 4; ++k) ll += n[k] * std::log(2.5) - 2.5 - std::lgamma(n[k] + 1.0);
  EXPECT_NEAR(f.loglik, ll, 1e-10);
}

TEST(PoissonGlm, BinaryCovariateRateRatio) {
  Eigen::MatrixXd x(6, 2);
  x << 1, 0, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1;
  const Eigen::VectorXi n = (Eigen::VectorXi(6) << 2, 4, 3, 10, 7, 13).finished();
  Eigen::VectorXd areas(6);
  areas << 0.1, 0.2, 0.1, 0.2, 0.3, 0.1;
  const GlmFit f = poisson_glm(n, x, areas.array().log());
  const double rate0 = 9.0 / 0.4, rate1 = 30.0 / 0.6;
  EXPECT_NEAR(f.coefficients[0], std::log(rate0), 1e-9);
  EXPECT_NEAR(f.coefficients[1], std::log(rate1 / rate0), 1e-9);
}

TEST(PoissonGlm, DegenerateCases) {
  const GlmFit f = poisson_glm(Eigen::VectorXi::Zero(5), intercept_design(5), Eigen::VectorXd::Zero(5));
  EXPECT_TRUE(f.boundary);
  EXPECT_FALSE(f.converged);
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, 1, 2, 1, 2, 1, 2;
  EXPECT_THROW(poisson_glm(Eigen::Vector4i(1, 2, 3, 4), x, Eigen::VectorXd::Zero(4)), DataError);
}

TEST(Stepwise, InterceptOnlyDesign) {
  const Eigen::Vector3i n(4, 1, 2);
  const StepwiseResult r = stepwise_bic(n, intercept_design(3), {kInterceptName}, Eigen::VectorXd::Zero(3));
  EXPECT_EQ(r.columns, std::vector<int>{0});
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_EQ(r.trace[0].move, "start");
}

TEST(Stepwise, MovesStrictlyDecreaseBic) {
  const GridSpec g = grid10();
  Rng rng(8);
  Eigen::MatrixXd x(100, 5);
  for (int k = 0; k < 100; ++k) {
    x(k, 0) = 1.0;
    for (int j = 1; j < 5; ++j) x(k, j) = rng.normal();
  }
  Eigen::VectorXd beta(5);
  beta << 8.0, 0.5, 0.0, -0.4, 0.0;
  const SimulatedPattern sim = simulate_lgcp(g, x, beta, std::nullopt, rng);
  const Eigen::VectorXi n = assign_counts(sim.pattern, g);
  const StepwiseResult r = stepwise_bic(n, x, {kInterceptName, "a", "b", "c", "d"}, g.std_areas().array().log());
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LT(r.trace[i].bic, r.trace[i - 1].bic);
  EXPECT_EQ(r.columns, (std::vector<int>{0, 1, 3}));
  EXPECT_EQ(r.names, (std::vector<std::string>{kInterceptName, "a", "c"}));
  EXPECT_DOUBLE_EQ(r.bic, r.trace.back().bic);
  EXPECT_NEAR(r.bic, bic(r.fit, 3, n.sum()), 1e-9);
}
