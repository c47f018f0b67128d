#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "odpp/gp.hpp"
#include "odpp/grid.hpp"
#include "odpp/mcmc.hpp"
#include "odpp/priors.hpp"
#include "odpp/rng.hpp"

namespace odpp {

/// Gridded Poisson likelihood
///
///   log L = -sum_k lambda_k Delta_k + sum_k n_k log lambda_k,
///   log lambda_k = X_k beta + z_k,
///
/// with standardized areas Delta_k. `z` may be empty (NHPP). Throws
/// NumericalError naming the cell whose intensity overflows.
double loglik_gridded(const Eigen::VectorXd& beta, const Eigen::VectorXd& z,
                      const Eigen::VectorXi& counts, const GridSpec& grid, const Eigen::MatrixXd& x);

/// Same likelihood from a precomputed log-intensity vector.
double loglik_from_log_intensity(const Eigen::VectorXd& log_lambda, const Eigen::VectorXd& counts,
                                 const Eigen::VectorXd& areas);

struct GriddedGradient {
  Eigen::VectorXd beta;  // X^T (n - lambda Delta)
  Eigen::VectorXd z;     // n - lambda Delta
};

/// Analytic gradient of loglik_gridded in (beta, z).
GriddedGradient loglik_gridded_gradient(const Eigen::VectorXd& beta, const Eigen::VectorXd& z,
                                        const Eigen::VectorXi& counts, const GridSpec& grid,
                                        const Eigen::MatrixXd& x);

enum class IntensityKind { NHPP, LGCP };

/// Priors are looked up by name: "beta" (default N(0, 100) per coefficient),
/// "sigma2" (IG(2, 0.1)) and "phi" (U[0, 10]).
struct IntensityModelSpec {
  IntensityKind kind = IntensityKind::NHPP;
  PriorSpec priors;
  /// LGCP starting values; the family must be exponential.
  CovarianceModel initial_gp = CovarianceModel::exponential(0.1, 1.0);
};

/// NHPP posterior over beta by adaptive random-walk MH. Chain scalars:
/// beta[j], loglik (data log-likelihood).
PosteriorChain fit_nhpp(const PointPattern& pattern, const GridSpec& grid, const Eigen::MatrixXd& x,
                        const PriorSpec& priors, const McmcConfig& config);

/// LGCP posterior. Sweep: ESS on z, ARWMH on beta, an exact draw of beta
/// given w = X beta + z when the beta priors are normal, then sigma2 (log scale)
/// and phi (logit scale) each with the GP prior density of z in the target.
/// Chain scalars: beta[j], sigma2, phi, loglik; latent: z.
PosteriorChain fit_lgcp(const PointPattern& pattern, const GridSpec& grid, const Eigen::MatrixXd& x,
                        const PriorSpec& priors, const McmcConfig& config,
                        const CovarianceModel& initial_gp = CovarianceModel::exponential(0.1, 1.0));

PosteriorChain fit_intensity(const PointPattern& pattern, const GridSpec& grid,
                             const Eigen::MatrixXd& x, const IntensityModelSpec& spec,
                             const McmcConfig& config);

/// Per-draw log lambda(u_k): draws x K.
Eigen::MatrixXd log_intensity_draws(const PosteriorChain& chain, const Eigen::MatrixXd& x);

struct IntensitySurface {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  Eigen::VectorXd lo95;
  Eigen::VectorXd hi95;
};

IntensitySurface posterior_intensity(const PosteriorChain& chain, const GridSpec& grid,
                                     const Eigen::MatrixXd& x);

/// Independent Poisson(scale * lambda_k * Delta_k) counts.
Eigen::VectorXi sample_predictive_counts(const Eigen::VectorXd& lambda, const Eigen::VectorXd& areas,
                                         double scale, Rng& rng);

/// Predictive counts for one posterior draw of a fitted chain.
Eigen::VectorXi sample_predictive_counts(const PosteriorChain& chain, std::size_t draw,
                                         const GridSpec& grid, const Eigen::MatrixXd& x,
                                         double scale, Rng& rng);

/// Scale converting a train-intensity draw into a test-intensity draw under
/// p-thinning: (1 - p) / p.
double thinning_scale(double p);

}  // namespace odpp
