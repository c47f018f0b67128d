#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace odpp {

/// Maximum-likelihood log-linear Poisson regression
///   n_k ~ Poisson(exp(offset_k + X_k beta)).
/// With offset log Delta_k this is the gridded NHPP likelihood up to the
/// data constant. `loglik` is the full Poisson log-mass including -log n_k!.
struct GlmFit {
  Eigen::VectorXd coefficients;
  double loglik = 0.0;
  double deviance = 0.0;
  bool converged = false;
  int iterations = 0;
  /// All counts zero: the MLE of the intercept is -inf.
  bool boundary = false;
};

/// IRLS with step halving. Converged when the relative deviance change drops
/// below 1e-10 and the score max-abs is at most 1e-8 (100 iterations max).
/// Throws DataError for a rank-deficient design or p >= K, NumericalError
/// when IRLS fails to converge on a non-boundary problem.
GlmFit poisson_glm(const Eigen::VectorXi& counts, const Eigen::MatrixXd& x,
                   const Eigen::VectorXd& offset);

/// -2 loglik + model_size * log(n).
double bic(const GlmFit& fit, int model_size, double n_points);

struct StepwiseMove {
  /// "start", "+name" or "-name".
  std::string move;
  std::vector<int> columns;
  double bic = 0.0;
};

struct StepwiseResult {
  /// Selected columns of the full design, ascending, always starting with 0.
  std::vector<int> columns;
  std::vector<std::string> names;
  GlmFit fit;
  double bic = 0.0;
  std::vector<StepwiseMove> trace;
};

/// Forward-backward stepwise search from the intercept-only model. Column 0
/// of `x_full` is the intercept and is never dropped. Each step evaluates
/// toggling every other column, takes the lowest BIC (ties to the lowest
/// column index) and stops when no move strictly lowers BIC. The penalty
/// uses n = sum of counts.
StepwiseResult stepwise_bic(const Eigen::VectorXi& counts, const Eigen::MatrixXd& x_full,
                            const std::vector<std::string>& names, const Eigen::VectorXd& offset);

}  // namespace odpp
