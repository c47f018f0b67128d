#pragma once

#include <Eigen/Dense>
#include <optional>
#include <variant>
#include <vector>

#include "odpp/conditional.hpp"
#include "odpp/gp.hpp"
#include "odpp/grid.hpp"
#include "odpp/joint.hpp"
#include "odpp/pairs.hpp"
#include "odpp/rng.hpp"

namespace odpp {

struct SimulatedPattern {
  PointPattern pattern;
  /// Latent field at representative points (zeros for an NHPP).
  Eigen::VectorXd z;
  Eigen::VectorXd log_lambda;
  Eigen::VectorXi counts;
};

/// Gridded Cox process: z ~ N(0, C) at representative points when `gp` is
/// given, n_k ~ Poisson(area_scale * lambda_k * Delta_k), points uniform in
/// their cell. Membership cells have no geometry; their points are placed
/// at the representative point and carry the cell id.
SimulatedPattern simulate_lgcp(const GridSpec& grid, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                               const std::optional<CovarianceModel>& gp, Rng& rng,
                               double area_scale = 1.0);

/// Same generator for a given log-intensity vector.
SimulatedPattern simulate_from_log_intensity(const GridSpec& grid, const Eigen::VectorXd& log_lambda,
                                             Rng& rng, double area_scale = 1.0);

/// Higdon kernel inputs at each theft location.
struct HigdonKernelField {
  double sigma = 1.0;
  double higdon_a = kHigdonA;
  Eigen::VectorXd psi_x;
  Eigen::VectorXd psi_y;
};

/// Joint prior draw of (psi_x, psi_y) at `points` from independent
/// unit-variance squared-exponential fields with decay phi_star.
HigdonKernelField sample_higdon_field(const std::vector<Point>& points, double phi_star, double sigma,
                                      Rng& rng, double higdon_a = kHigdonA);

/// Constant Sigma or a per-theft Higdon field.
using RecoveryKernel = std::variant<Eigen::Matrix2d, HigdonKernelField>;

/// Each theft is recovered with probability `recovery_prob`; a recovery is
/// s_t + N(0, Sigma(s_t) / 2).
PairedPattern simulate_recoveries(const PointPattern& thefts, const RecoveryKernel& kernel,
                                  double recovery_prob, Rng& rng);

struct JointSimulationSpec {
  /// Fixed parameters. Empty z / psi vectors are drawn from the priors
  /// below when given, otherwise taken as zero.
  JointParams params;
  JointCovariates covariates;
  std::optional<CovarianceModel> gp_r;
  std::optional<CovarianceModel> gp_t;
  std::optional<double> phi_star;
};

struct SimulatedPairs {
  PairedPattern pairs;
  /// Parameters actually used, including sampled latent fields.
  JointParams truth;
  PairCountsMatrix counts;
};

/// n_kk' ~ Poisson(lambda(u_k, u_k') Delta_k Delta_k') for every cell pair,
/// recovery in cell k and theft in cell k' placed uniformly.
SimulatedPairs simulate_joint(const GridSpec& grid, const JointSimulationSpec& spec, Rng& rng);

/// beta0 making the expected number of pairs equal `expected_pairs` for the
/// other parameters held fixed.
double calibrate_beta0(const JointParams& params, const GridSpec& grid, double expected_pairs,
                       const JointCovariates& covariates = {});

}  // namespace odpp
