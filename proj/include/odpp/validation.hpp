#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "odpp/grid.hpp"
#include "odpp/rng.hpp"

namespace odpp {

/// p-thinning: each point is kept in `train` independently with probability
/// p, otherwise it goes to `test`. Given lambda, train is a Poisson process
/// with intensity p lambda and test one with (1 - p) lambda.
struct ThinSplit {
  PointPattern train;
  PointPattern test;
  /// Original indices of the train and test points.
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
  double p = 0.5;
  std::uint64_t seed = 0;
};

ThinSplit p_thin(const PointPattern& pattern, double p, Rng& rng);

/// Evaluation regions: each set lists distinct cell indices.
struct EvalRegions {
  std::vector<std::vector<int>> sets;
  int cells_per_set = 0;
};

/// R sets of `w` distinct cells drawn uniformly; sets may overlap.
EvalRegions random_blocks(const GridSpec& grid, int w, int r, Rng& rng);
/// R sets of ceil(q K) cells.
EvalRegions random_blocks_relative(const GridSpec& grid, double q, int r, Rng& rng);

/// N(B_r) for every region: sum of the cell counts in the set.
Eigen::VectorXi region_counts(const Eigen::VectorXi& cell_counts, const EvalRegions& regions);

/// Predictive interval coverage. `predictive` is L x R region counts from
/// the posterior predictive, `test` the held-out region counts. For each
/// region the residuals N_test - N^(l) give an empirical central interval at
/// the nominal level (type-7 quantiles); coverage is the fraction of regions
/// whose interval contains 0. Requires L >= 100.
double pic(const Eigen::MatrixXd& predictive, const Eigen::VectorXd& test, double nominal = 0.90);

/// Ranked probability score
///   (1/L) sum_l |N_l - obs| - 1/(2 L^2) sum_l sum_l' |N_l - N_l'|,
/// with the double sum computed from the sorted sample.
double rps(const Eigen::VectorXd& samples, double observed);

/// The same score by direct double summation; reference for rps().
double rps_naive(const Eigen::VectorXd& samples, double observed);

}  // namespace odpp
