#include "odpp/validation.hpp"

#include <algorithm>
#include <cmath>

#include "odpp/diagnostics.hpp"
#include "odpp/errors.hpp"

namespace odpp {

ThinSplit p_thin(const PointPattern& pattern, double p, Rng& rng) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("thinning probability must lie in (0, 1)");
  ThinSplit split;
  split.p = p;
  split.seed = rng.seed();
  split.train.region_id = pattern.region_id;
  split.test.region_id = pattern.region_id;
  const bool with_cells = !pattern.cell_ids.empty();
  for (std::size_t i = 0; i < pattern.points.size(); ++i) {
    const bool keep = rng.uniform() < p;
    PointPattern& dst = keep ? split.train : split.test;
    dst.points.push_back(pattern.points[i]);
    if (with_cells) dst.cell_ids.push_back(pattern.cell_ids.at(i));
    (keep ? split.train_index : split.test_index).push_back(i);
  }
  return split;
}

EvalRegions random_blocks(const GridSpec& grid, int w, int r, Rng& rng) {
  const int k = grid.size();
  if (w < 1 || w > k) throw ConfigError("cells per evaluation region must lie in [1, K]");
  if (r < 1) throw ConfigError("number of evaluation regions must be positive");
  EvalRegions out;
  out.cells_per_set = w;
  std::vector<int> cells(static_cast<std::size_t>(k));
  for (int s = 0; s < r; ++s) {
    // Partial Fisher-Yates over a fresh identity permutation.
    for (int i = 0; i < k; ++i) cells[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < w; ++i) {
      const auto j = i + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(k - i)));
      std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(j)]);
    }
    std::vector<int> set(cells.begin(), cells.begin() + w);
    std::sort(set.begin(), set.end());
    out.sets.push_back(std::move(set));
  }
  return out;
}

EvalRegions random_blocks_relative(const GridSpec& grid, double q, int r, Rng& rng) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("relative region size must lie in (0, 1)");
  const int w = static_cast<int>(std::ceil(q * grid.size() - 1e-12));
  return random_blocks(grid, std::max(1, w), r, rng);
}

Eigen::VectorXi region_counts(const Eigen::VectorXi& cell_counts, const EvalRegions& regions) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(regions.sets.size()));
  for (std::size_t s = 0; s < regions.sets.size(); ++s) {
    int total = 0;
    for (int c : regions.sets[s]) {
      if (c < 0 || c >= cell_counts.size()) throw DimensionError("region cell index out of range");
      total += cell_counts[c];
    }
    out[static_cast<Eigen::Index>(s)] = total;
  }
  return out;
}

double pic(const Eigen::MatrixXd& predictive, const Eigen::VectorXd& test, double nominal) {
  if (!(nominal > 0.0 && nominal < 1.0)) throw ConfigError("nominal level must lie in (0, 1)");
  if (predictive.rows() < 100) throw DataError("predictive interval coverage needs at least 100 draws");
  if (predictive.cols() != test.size()) throw DimensionError("one test count per region required");
  if (test.size() == 0) throw DataError("no evaluation regions");
  const double lo_q = 0.5 * (1.0 - nominal);
  const double hi_q = 1.0 - lo_q;
  int covered = 0;
  for (Eigen::Index r = 0; r < test.size(); ++r) {
    const Eigen::VectorXd residuals = test[r] - predictive.col(r).array();
    const auto q = quantiles(residuals, {lo_q, hi_q});
    if (q[0] <= 0.0 && 0.0 <= q[1]) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(test.size());
}

double rps(const Eigen::VectorXd& samples, double observed) {
  const Eigen::Index l = samples.size();
  if (l < 1) throw DataError("rps needs at least one sample");
  const double first = (samples.array() - observed).abs().sum();
  Eigen::VectorXd sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  // sum_i sum_j |x_i - x_j| = 2 sum_i (2i - L - 1) x_(i), i = 1..L.
  double pair_sum = 0.0;
  for (Eigen::Index i = 0; i < l; ++i) {
    pair_sum += static_cast<double>(2 * (i + 1) - l - 1) * sorted[i];
  }
  pair_sum *= 2.0;
  const double ld = static_cast<double>(l);
  return first / ld - pair_sum / (2.0 * ld * ld);
}

double rps_naive(const Eigen::VectorXd& samples, double observed) {
  const Eigen::Index l = samples.size();
  if (l < 1) throw DataError("rps needs at least one sample");
  double first = 0.0;
  double pair_sum = 0.0;
  for (Eigen::Index i = 0; i < l; ++i) {
    first += std::abs(samples[i] - observed);
    for (Eigen::Index j = 0; j < l; ++j) pair_sum += std::abs(samples[i] - samples[j]);
  }
  const double ld = static_cast<double>(l);
  return first / ld - pair_sum / (2.0 * ld * ld);
}

}  // namespace odpp
