#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "odpp/mcmc.hpp"

namespace odpp {

/// Empirical quantile with linear interpolation between order statistics
/// (position q * (n - 1) in the sorted sample).
double quantile(Eigen::VectorXd values, double q);
/// Several quantiles with a single sort.
std::vector<double> quantiles(Eigen::VectorXd values, const std::vector<double>& qs);

double sample_sd(const Eigen::VectorXd& values);

/// Integrated autocorrelation time 1 + 2 sum_t rho_t, truncated with Geyer's
/// initial positive sequence: lag pairs rho_{2m} + rho_{2m+1} are summed while
/// positive. Returns 1 for constant or very short series.
double inefficiency_factor(const Eigen::VectorXd& series);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
  double inefficiency = 1.0;
};

std::vector<ParameterSummary> summarize(const PosteriorChain& chain);

}  // namespace odpp
