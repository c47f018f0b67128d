#include "odpp/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "odpp/errors.hpp"

namespace odpp {

namespace {

double sorted_quantile(const Eigen::VectorXd& sorted, double q) {
  const auto n = sorted.size();
  if (n == 0) throw DataError("quantile of an empty sample");
  if (n == 1) return sorted[0];
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(n - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min<Eigen::Index>(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

double quantile(Eigen::VectorXd values, double q) {
  std::sort(values.begin(), values.end());
  return sorted_quantile(values, q);
}

std::vector<double> quantiles(Eigen::VectorXd values, const std::vector<double>& qs) {
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(qs.size());
  for (double q : qs) out.push_back(sorted_quantile(values, q));
  return out;
}

double sample_sd(const Eigen::VectorXd& values) {
  const auto n = values.size();
  if (n < 2) return 0.0;
  const double m = values.mean();
  return std::sqrt((values.array() - m).square().sum() / static_cast<double>(n - 1));
}

double inefficiency_factor(const Eigen::VectorXd& series) {
  const auto n = series.size();
  if (n < 4) return 1.0;
  const Eigen::VectorXd c = series.array() - series.mean();
  const double c0 = c.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0)) return 1.0;
  auto rho = [&](Eigen::Index lag) {
    return c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n) / c0;
  };
  // Gamma_0 = rho_0 + rho_1; IF = -1 + 2 * sum of positive pair sums.
  double total = 0.0;
  for (Eigen::Index m = 0; 2 * m + 1 < n; ++m) {
    const double pair = (m == 0 ? 1.0 : rho(2 * m)) + rho(2 * m + 1);
    if (!(pair > 0.0)) break;
    total += pair;
  }
  return std::max(1.0, -1.0 + 2.0 * total);
}

std::vector<ParameterSummary> summarize(const PosteriorChain& chain) {
  std::vector<ParameterSummary> out;
  if (chain.draws() == 0) return out;
  for (std::size_t j = 0; j < chain.scalar_names.size(); ++j) {
    const Eigen::VectorXd col = chain.scalars.col(static_cast<Eigen::Index>(j));
    ParameterSummary s;
    s.name = chain.scalar_names[j];
    s.mean = col.mean();
    s.sd = sample_sd(col);
    const auto q = quantiles(col, {0.025, 0.5, 0.975});
    s.q025 = q[0];
    s.q50 = q[1];
    s.q975 = q[2];
    s.inefficiency = inefficiency_factor(col);
    out.push_back(s);
  }
  return out;
}

}  // namespace odpp
