#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "odpp/grid.hpp"
#include "odpp/mcmc.hpp"
#include "odpp/pairs.hpp"
#include "odpp/priors.hpp"
#include "odpp/rng.hpp"

namespace odpp {

inline constexpr double kHigdonA = 3.5;

/// Higdon spatially varying kernel. With X = sqrt(4A^2 + |psi|^4 pi^2) / (2 pi),
/// Y = |psi|^2 / 2, a = sqrt(X + Y), b = sqrt(X - Y), alpha = atan2(psi_y, psi_x):
///
///   M = sigma * diag(a, b) * [[cos a, sin a], [-sin a, cos a]],  Sigma = M^T M,
///
/// so the major axis points along alpha and det Sigma = sigma^4 A^2 / pi^2
/// for every psi.
Eigen::Matrix2d sigma_from_psi(double psi_x, double psi_y, double sigma, double a = kHigdonA);

/// [[s1^2, rho s1 s2], [rho s1 s2, s2^2]].
Eigen::Matrix2d sigma_constant(double sigma1, double sigma2, double rho);

/// log[ exp(-d^T Sigma^{-1} d) / (pi sqrt(det Sigma)) ], d = s_r - s_t. This
/// integrates to one, i.e. s_r - s_t ~ N(0, Sigma / 2). Returns -inf when
/// Sigma is not positive definite.
double cond_logdensity(const Point& s_r, const Point& s_t, const Eigen::Matrix2d& sigma);

/// Draw s_t + N(0, Sigma / 2).
Point sample_recovery(const Point& s_t, const Eigen::Matrix2d& sigma, Rng& rng);

enum class KernelKind { Constant, Spatial };

enum class AnchorMode {
  /// Grid anchors when the number of complete pairs exceeds the threshold.
  Auto,
  TheftPoints,
  Grid,
};

struct SpatialKernelSpec {
  double phi_star = 10.0;
  double higdon_a = kHigdonA;
  AnchorMode anchors = AnchorMode::Auto;
  /// Anchor grid for grid mode; built over the pair bounding box with about
  /// `auto_grid_cells` cells when absent.
  std::optional<GridSpec> grid;
  std::size_t auto_threshold = 1000;
  int auto_grid_cells = 305;
};

/// A fitted conditional kernel. Constant fits record scalars sigma1_sq,
/// sigma2_sq, rho, sigma1, sigma2, loglik. Spatial fits record sigma2, sigma,
/// loglik and latent psi_x, psi_y at `anchors`.
struct ConditionalFit {
  KernelKind kind = KernelKind::Constant;
  PosteriorChain chain;
  std::vector<Point> anchors;
  double phi_star = 0.0;
  double higdon_a = kHigdonA;

  /// Kernel of posterior draw `draw` at anchor `anchor` (ignored for constant fits).
  Eigen::Matrix2d sigma_at(std::size_t draw, std::size_t anchor) const;
};

/// Priors: "sigma1_sq", "sigma2_sq" (IG(2, 0.1)), "rho" (U[-1, 1]).
/// Uses complete pairs only; needs at least three.
ConditionalFit fit_conditional_constant(const PairedPattern& pairs, const PriorSpec& priors,
                                        const McmcConfig& config);

/// Priors: "sigma2" (IG(2, 0.1)) for the kernel scale. psi_x, psi_y are
/// unit-variance squared-exponential fields with decay phi_star, updated by
/// elliptical slice sampling; each pair uses the kernel of its anchor (its
/// own theft location, or the nearest grid centroid).
ConditionalFit fit_conditional_spatial(const PairedPattern& pairs, const SpatialKernelSpec& spec,
                                       const PriorSpec& priors, const McmcConfig& config);

/// Log-likelihood sum_j cond_logdensity for fixed kernels.
double conditional_loglik(const PairedPattern& pairs, const std::vector<Eigen::Matrix2d>& kernels);

/// Predictive draws at test theft locations.
struct RecoveryPrediction {
  std::vector<Point> thefts;
  /// Per test point: L x 2 recovery draws.
  std::vector<Eigen::MatrixX2d> samples;
  /// Per test point: L x 3 kernel entries (s11, s12, s22) of each draw.
  std::vector<Eigen::MatrixX3d> kernels;
};

struct PredictOptions {
  /// Use every `stride`-th posterior draw.
  std::size_t stride = 1;
};

/// For each used posterior draw: krige psi to the test thefts (marginal
/// conditional law per test point), form Sigma, and draw s_t + N(0, Sigma/2).
/// Constant fits use the draw's Sigma directly.
RecoveryPrediction predict_recovery(const ConditionalFit& fit, const std::vector<Point>& test_thefts,
                                    Rng& rng, const PredictOptions& options = {});

/// Bivariate energy score
///   (1/L) sum_l |s_l - obs| - 1/(2 L^2) sum_l sum_l' |s_l - s_l'|.
double bicrps(const Eigen::MatrixX2d& samples, const Point& observed);

/// Posterior-mean predictive density of recovery location at `points` given
/// one theft location, averaging the kernels of test point `index`.
Eigen::VectorXd predictive_density(const RecoveryPrediction& prediction, std::size_t index,
                                   const std::vector<Point>& points);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// H complete pairs chosen uniformly without replacement as the test set.
HoldoutSplit holdout_pairs(const PairedPattern& pairs, std::size_t h, Rng& rng);

/// 80 pairs, or half of them when there are more than 1000 complete pairs;
/// never more than half.
std::size_t default_holdout_size(std::size_t complete_pairs);

}  // namespace odpp
