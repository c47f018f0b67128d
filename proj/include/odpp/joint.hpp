#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "odpp/conditional.hpp"
#include "odpp/gp.hpp"
#include "odpp/grid.hpp"
#include "odpp/mcmc.hpp"
#include "odpp/pairs.hpp"
#include "odpp/priors.hpp"

namespace odpp {

/// K x K pair counts n_{kk'}: rows are recovery cells, columns theft cells.
using PairCountsMatrix = Eigen::MatrixXi;

/// Complete pairs only. Throws DataError naming a pair with an endpoint
/// outside the grid.
PairCountsMatrix pair_counts(const PairedPattern& pairs, const GridSpec& grid);

/// Parameters of the pair intensity on a K-cell grid
///
///   log lambda(u_k, u_k') = beta0 + X_R,k beta_R + X_T,k' beta_T
///                           + eta Q_kk' + z_R,k + z_T,k',
///   Q_kk' = d^T Sigma(u_k')^{-1} d,  d = u_k - u_k',
///
/// with Sigma the Higdon kernel of (psi_x, psi_y) at theft cell k'. Empty
/// beta_R / beta_T / z / psi vectors are treated as zero.
struct JointParams {
  double beta0 = 0.0;
  Eigen::VectorXd beta_r;
  Eigen::VectorXd beta_t;
  double eta = 0.0;
  Eigen::VectorXd z_r;
  Eigen::VectorXd z_t;
  Eigen::VectorXd psi_x;
  Eigen::VectorXd psi_y;
  double kernel_sigma = 1.0;
  double higdon_a = kHigdonA;
};

/// Optional covariate blocks, K x p_R and K x p_T (zero columns when unused).
struct JointCovariates {
  Eigen::MatrixXd x_r;
  Eigen::MatrixXd x_t;
};

/// Q_kk' for all cell pairs.
Eigen::MatrixXd joint_distance_matrix(const GridSpec& grid, const Eigen::VectorXd& psi_x,
                                      const Eigen::VectorXd& psi_y, double kernel_sigma,
                                      double higdon_a = kHigdonA);

/// K x K matrix of log lambda(u_k, u_k').
Eigen::MatrixXd joint_log_intensity(const JointParams& params, const GridSpec& grid,
                                    const JointCovariates& covariates = {});

/// Gridded double-sum likelihood
///   -sum_k sum_k' lambda_kk' Delta_k Delta_k' + sum_k sum_k' n_kk' log lambda_kk'.
/// Throws NumericalError naming the overflowing cell pair.
double joint_loglik(const JointParams& params, const PairCountsMatrix& counts, const GridSpec& grid,
                    const JointCovariates& covariates = {});

enum class JointVariant {
  /// eta fixed at 0; the kernel fields then drop out and are not sampled.
  Independent,
  Dependent,
};

/// Priors by name: "beta0", "beta_r", "beta_t" (N(0, 100)), "eta" (N(0, 100)),
/// "sigma2_r", "sigma2_t" (IG(2, 0.1)), "phi_r", "phi_t" (U[0, 10]).
struct JointModelSpec {
  JointVariant variant = JointVariant::Dependent;
  double phi_star = 1.0;
  double higdon_a = kHigdonA;
  /// Scale of the kernel inside the distance term. Only eta / sigma^2 enters
  /// the likelihood, so sigma is held fixed.
  double kernel_sigma = 1.0;
  JointCovariates covariates;
  PriorSpec priors;
  CovarianceModel initial_gp_r = CovarianceModel::exponential(0.1, 1.0);
  CovarianceModel initial_gp_t = CovarianceModel::exponential(0.1, 1.0);
};

struct JointFit {
  JointModelSpec spec;
  PosteriorChain chain;
  std::vector<std::string> warnings;

  /// Parameters of posterior draw `draw`.
  JointParams params_at(std::size_t draw) const;
};

/// Chain scalars: beta0, beta_r[j], beta_t[j], eta (dependent only),
/// sigma2_r, phi_r, sigma2_t, phi_t, loglik (data log-likelihood).
/// Latent: z_r, z_t, and psi_x, psi_y for the dependent variant.
/// Sweep: ESS z_r, z_t, psi_x, psi_y; MH beta0, then exact draws of beta0
/// given beta0 + z_r and given beta0 + z_t (normal beta0 prior); MH beta
/// blocks, eta; MH sigma2_r, phi_r, sigma2_t, phi_t against the GP prior
/// densities.
JointFit fit_joint(const PairedPattern& pairs, const GridSpec& grid, const JointModelSpec& spec,
                   const McmcConfig& config);

struct FlowSummary {
  /// draws x |partition| proportions p(B_d | B_o).
  Eigen::MatrixXd draws;
  Eigen::VectorXd mean;
  Eigen::VectorXd lo95;
  Eigen::VectorXd hi95;
};

/// Checks that the partition is disjoint and covers all K cells and that
/// the origin set is nonempty with valid indices. Throws ConfigError.
void validate_flow_sets(const std::vector<int>& origin, const std::vector<std::vector<int>>& partition,
                        int k_cells);

/// lambda(B_d, B_o) / lambda(D, B_o) for one intensity matrix (rows recovery).
Eigen::VectorXd flow_from_intensity(const Eigen::MatrixXd& log_lambda, const Eigen::VectorXd& areas,
                                    const std::vector<int>& origin,
                                    const std::vector<std::vector<int>>& partition);

/// Intensity-mode flow proportions, one row per posterior draw.
FlowSummary flow_proportions(const JointFit& fit, const GridSpec& grid, const std::vector<int>& origin,
                             const std::vector<std::vector<int>>& partition);

struct CountFlow {
  Eigen::VectorXd proportions;
  /// False when no pair originates in B_o; proportions are then NaN.
  bool defined = false;
  int total = 0;
};

/// Count-mode proportions N(B_d, B_o) / N(D, B_o).
CountFlow flow_proportions(const PairCountsMatrix& counts, const std::vector<int>& origin,
                           const std::vector<std::vector<int>>& partition);

}  // namespace odpp
