#include <gtest/gtest.h>

#include <boost/math/distributions/poisson.hpp>
#include <cmath>
#include <set>

#include "odpp/errors.hpp"
#include "odpp/rng.hpp"
#include "odpp/simulate.hpp"
#include "odpp/validation.hpp"

using namespace odpp;

namespace {

PointPattern uniform_points(int n, Rng& rng) {
  PointPattern p;
  for (int i = 0; i < n; ++i) p.points.emplace_back(rng.uniform(0, 1), rng.uniform(0, 1));
  return p;
}

Eigen::VectorXd poisson_draws(double mean, int n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = static_cast<double>(rng.poisson(mean));
  return v;
}

}  // namespace

TEST(Thinning, ConservesPointsAndKeepsAboutP) {
  Rng rng(1);
  const PointPattern p = uniform_points(1000, rng);
  const ThinSplit s = p_thin(p, 0.5, rng);
  EXPECT_EQ(s.train.size() + s.test.size(), 1000u);
  // Binomial(1000, 0.5): within 3 sd.
  EXPECT_NEAR(static_cast<double>(s.train.size()), 500.0, 3 * std::sqrt(250.0));
  std::set<std::size_t> seen(s.train_index.begin(), s.train_index.end());
  for (std::size_t i : s.test_index) EXPECT_TRUE(seen.insert(i).second);
  EXPECT_EQ(seen.size(), 1000u);
  for (std::size_t j = 0; j < s.train.size(); ++j) EXPECT_EQ(s.train.points[j], p.points[s.train_index[j]]);
}

TEST(Thinning, EdgeProbabilities) {
  Rng rng(2);
  const PointPattern p = uniform_points(50, rng);
  EXPECT_EQ(p_thin(p, 1.0 - 1e-12, rng).test.size(), 0u);
  EXPECT_EQ(p_thin(p, 1e-12, rng).train.size(), 0u);
  EXPECT_THROW(p_thin(p, 1.0, rng), ConfigError);
  Rng a(9), b(9);
  EXPECT_EQ(p_thin(p, 0.5, a).train_index, p_thin(p, 0.5, b).train_index);
}

TEST(Blocks, DistinctCellsAndRelativeSize) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 61, 5);
  Rng rng(3);
  const EvalRegions r = random_blocks_relative(g, 0.1, 40, rng);
  EXPECT_EQ(r.cells_per_set, 31);
  for (const auto& s : r.sets) {
    EXPECT_EQ(std::set<int>(s.begin(), s.end()).size(), 31u);
    for (int c : s) {
      EXPECT_GE(c, 0);
      EXPECT_LT(c, 305);
    }
  }
  const EvalRegions whole = random_blocks(g, 305, 2, rng);
  const Eigen::VectorXi counts = Eigen::VectorXi::Ones(305);
  EXPECT_EQ(region_counts(counts, whole), Eigen::Vector2i(305, 305));
  EXPECT_THROW(random_blocks(g, 306, 1, rng), ConfigError);
}

TEST(Pic, IdenticalAndInflated) {
  Rng rng(4);
  Eigen::MatrixXd same(200, 10);
  Eigen::VectorXd test(10);
  for (int r = 0; r < 10; ++r) {
    test[r] = 7.0 + r;
    same.col(r).setConstant(test[r]);
  }
  EXPECT_DOUBLE_EQ(pic(same, test), 1.0);
  Eigen::MatrixXd inflated(500, 10);
  for (int r = 0; r < 10; ++r) inflated.col(r) = poisson_draws(10.0 * test[r], 500, rng);
  EXPECT_LE(pic(inflated, test), 0.1);
  EXPECT_THROW(pic(same.topRows(50), test), DataError);
}

TEST(Pic, WiderPredictiveCoversMore) {
  Rng rng(5);
  const int r = 100;
  Eigen::VectorXd test(r);
  Eigen::MatrixXd narrow(400, r), wide(400, r);
  for (int j = 0; j < r; ++j) {
    test[j] = static_cast<double>(rng.poisson(50.0));
    for (int l = 0; l < 400; ++l) {
      const double e = rng.normal();
      narrow(l, j) = 50.0 + 2.0 * e;
      wide(l, j) = 50.0 + 6.0 * e;
    }
  }
  EXPECT_GE(pic(wide, test), pic(narrow, test));
}

TEST(Rps, HandValueAndNaiveAgreement) {
  EXPECT_DOUBLE_EQ(rps(Eigen::Vector2d(0, 2), 1.0), 0.5);
  EXPECT_DOUBLE_EQ(rps(Eigen::VectorXd::Constant(5, 3.0), 3.0), 0.0);
  Rng rng(6);
  const Eigen::VectorXd s = poisson_draws(12.0, 300, rng);
  for (double obs : {0.0, 10.0, 12.5, 40.0}) EXPECT_NEAR(rps(s, obs), rps_naive(s, obs), 1e-10);
}

TEST(Rps, PoissonOracle) {
  // CRPS of Poisson(5) at y = 4: sum_n (F(n) - 1{n >= 4})^2.
  const boost::math::poisson_distribution<> d(5.0);
  double exact = 0.0;
  for (int n = 0; n < 60; ++n) {
    const double f = boost::math::cdf(d, n);
    exact += (f - (n >= 4 ? 1.0 : 0.0)) * (f - (n >= 4 ? 1.0 : 0.0));
  }
  Rng rng(7);
  const Eigen::VectorXd s = poisson_draws(5.0, 200000, rng);
  EXPECT_NEAR(rps(s, 4.0), exact, 0.01);
}

TEST(Simulate, HomogeneousMeanCount) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 4, 4);
  Rng rng(8);
  double total = 0.0;
  const int reps = 400;
  for (int i = 0; i < reps; ++i) {
    const SimulatedPattern s =
        simulate_lgcp(g, Eigen::MatrixXd::Ones(16, 1), Eigen::VectorXd::Constant(1, std::log(100.0)), std::nullopt, rng);
    EXPECT_EQ(static_cast<int>(s.pattern.size()), s.counts.sum());
    total += static_cast<double>(s.pattern.size());
  }
  EXPECT_NEAR(total / reps, 100.0, 3 * std::sqrt(100.0 / reps));
}

TEST(Simulate, LatentFieldOverdisperses) {
  const GridSpec g = build_regular_grid({0, 10, 0, 10}, 10, 10);
  Rng rng(9);
  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, std::log(5000.0));
  const SimulatedPattern flat = simulate_lgcp(g, Eigen::MatrixXd::Ones(100, 1), beta, std::nullopt, rng);
  const SimulatedPattern cox =
      simulate_lgcp(g, Eigen::MatrixXd::Ones(100, 1), beta, CovarianceModel::exponential(1.0, 0.5), rng);
  auto dispersion = [](const Eigen::VectorXi& c) {
    const Eigen::VectorXd v = c.cast<double>();
    const double m = v.mean();
    return (v.array() - m).square().sum() / (v.size() - 1) / m;
  };
  EXPECT_LT(dispersion(flat.counts), 1.5);
  EXPECT_GT(dispersion(cox.counts), 5.0);
}

TEST(Simulate, VeryLowIntensityIsEmpty) {
  const GridSpec g = build_regular_grid({0, 1, 0, 1}, 3, 3);
  Rng rng(10);
  const SimulatedPattern s =
      simulate_lgcp(g, Eigen::MatrixXd::Ones(9, 1), Eigen::VectorXd::Constant(1, -40.0), std::nullopt, rng);
  EXPECT_EQ(s.pattern.size(), 0u);
}

TEST(Simulate, RecoveryDisplacementCovariance) {
  Rng rng(11);
  PointPattern thefts;
  for (int i = 0; i < 20000; ++i) thefts.points.emplace_back(rng.uniform(0, 10), rng.uniform(0, 10));
  const Eigen::Matrix2d sigma = sigma_constant(1.5, 1.0, 0.4);
  const PairedPattern p = simulate_recoveries(thefts, sigma, 1.0, rng);
  Eigen::Matrix2d acc = Eigen::Matrix2d::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Eigen::Vector2d d = *p.recoveries[i] - p.thefts[i];
    acc += d * d.transpose();
  }
  acc /= static_cast<double>(p.size());
  EXPECT_LE((acc - 0.5 * sigma).cwiseAbs().maxCoeff(), 0.05);
  const PairedPattern few = simulate_recoveries(thefts, sigma, 0.1, rng);
  EXPECT_NEAR(static_cast<double>(few.complete_count()), 2000.0, 3 * std::sqrt(1800.0));
  EXPECT_THROW(simulate_recoveries(thefts, sigma, 0.0, rng), ConfigError);
}

TEST(Simulate, NegativeEtaShortensTrips) {
  const GridSpec g = build_regular_grid({0, 6, 0, 6}, 6, 6);
  auto mean_distance = [&](double eta) {
    Rng rng(12);
    JointSimulationSpec spec;
    spec.params.eta = eta;
    spec.params.beta0 = calibrate_beta0(spec.params, g, 3000.0);
    const SimulatedPairs s = simulate_joint(g, spec, rng);
    double d = 0.0;
    for (std::size_t i = 0; i < s.pairs.size(); ++i) d += (*s.pairs.recoveries[i] - s.pairs.thefts[i]).norm();
    return d / static_cast<double>(s.pairs.size());
  };
  EXPECT_LT(mean_distance(-0.5), 0.8 * mean_distance(0.0));
}
