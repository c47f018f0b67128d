#include "odpp/simulate.hpp"

#include <cmath>

#include "odpp/errors.hpp"

namespace odpp {

namespace {

Point place_in_cell(const GridSpec& grid, int k, Rng& rng) {
  if (grid.kind() == GridSpec::Kind::Membership) return grid.cell(k).representative;
  return grid.sample_in_cell(k, rng);
}

}  // namespace

SimulatedPattern simulate_from_log_intensity(const GridSpec& grid, const Eigen::VectorXd& log_lambda,
                                             Rng& rng, double area_scale) {
  const int k = grid.size();
  if (log_lambda.size() != k) throw DimensionError("log intensity needs one entry per cell");
  if (!(area_scale > 0.0)) throw ConfigError("area scale must be positive");
  const Eigen::VectorXd areas = grid.std_areas();
  SimulatedPattern out;
  out.log_lambda = log_lambda;
  out.z = Eigen::VectorXd::Zero(k);
  out.counts.resize(k);
  for (int c = 0; c < k; ++c) {
    const double mean = area_scale * std::exp(log_lambda[c]) * areas[c];
    if (!std::isfinite(mean)) throw NumericalError("intensity overflows in cell " + std::to_string(c));
    out.counts[c] = static_cast<int>(rng.poisson(mean));
  }
  const bool membership = grid.kind() == GridSpec::Kind::Membership;
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < out.counts[c]; ++i) {
      out.pattern.points.push_back(place_in_cell(grid, c, rng));
      if (membership) out.pattern.cell_ids.push_back(c);
    }
  }
  return out;
}

SimulatedPattern simulate_lgcp(const GridSpec& grid, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                               const std::optional<CovarianceModel>& gp, Rng& rng, double area_scale) {
  if (x.rows() != grid.size() || x.cols() != beta.size()) {
    throw DimensionError("design must be K x p with p = length of beta");
  }
  Eigen::VectorXd z = Eigen::VectorXd::Zero(grid.size());
  if (gp) {
    gp->validate();
    z = mvn_sample(chol(cov_matrix(grid.representative_list(), *gp)), rng);
  }
  SimulatedPattern out = simulate_from_log_intensity(grid, x * beta + z, rng, area_scale);
  out.z = z;
  return out;
}

HigdonKernelField sample_higdon_field(const std::vector<Point>& points, double phi_star, double sigma,
                                      Rng& rng, double higdon_a) {
  const CholFactor f = chol(cov_matrix(points, CovarianceModel::squared_exponential(phi_star)));
  HigdonKernelField field;
  field.sigma = sigma;
  field.higdon_a = higdon_a;
  field.psi_x = mvn_sample(f, rng);
  field.psi_y = mvn_sample(f, rng);
  return field;
}

PairedPattern simulate_recoveries(const PointPattern& thefts, const RecoveryKernel& kernel,
                                  double recovery_prob, Rng& rng) {
  if (!(recovery_prob > 0.0 && recovery_prob <= 1.0)) {
    throw ConfigError("recovery probability must lie in (0, 1]");
  }
  const auto* field = std::get_if<HigdonKernelField>(&kernel);
  if (field && (field->psi_x.size() != static_cast<Eigen::Index>(thefts.size()) ||
                field->psi_y.size() != static_cast<Eigen::Index>(thefts.size()))) {
    throw DimensionError("Higdon field needs psi values at every theft");
  }
  PairedPattern out;
  out.region_id = thefts.region_id;
  out.thefts = thefts.points;
  out.recoveries.resize(thefts.size());
  for (std::size_t i = 0; i < thefts.size(); ++i) {
    if (recovery_prob < 1.0 && !rng.bernoulli(recovery_prob)) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const Eigen::Matrix2d sigma =
        field ? sigma_from_psi(field->psi_x[ii], field->psi_y[ii], field->sigma, field->higdon_a)
              : std::get<Eigen::Matrix2d>(kernel);
    out.recoveries[i] = sample_recovery(thefts.points[i], sigma, rng);
  }
  return out;
}

SimulatedPairs simulate_joint(const GridSpec& grid, const JointSimulationSpec& spec, Rng& rng) {
  const int k = grid.size();
  SimulatedPairs out;
  out.truth = spec.params;
  JointParams& p = out.truth;
  const auto reps = grid.representative_list();
  if (p.z_r.size() == 0 && spec.gp_r) p.z_r = mvn_sample(chol(cov_matrix(reps, *spec.gp_r)), rng);
  if (p.z_t.size() == 0 && spec.gp_t) p.z_t = mvn_sample(chol(cov_matrix(reps, *spec.gp_t)), rng);
  if (p.psi_x.size() == 0 && p.psi_y.size() == 0 && spec.phi_star) {
    const HigdonKernelField f = sample_higdon_field(reps, *spec.phi_star, p.kernel_sigma, rng, p.higdon_a);
    p.psi_x = f.psi_x;
    p.psi_y = f.psi_y;
  }
  if (p.z_r.size() == 0) p.z_r = Eigen::VectorXd::Zero(k);
  if (p.z_t.size() == 0) p.z_t = Eigen::VectorXd::Zero(k);
  if (p.psi_x.size() == 0) p.psi_x = Eigen::VectorXd::Zero(k);
  if (p.psi_y.size() == 0) p.psi_y = Eigen::VectorXd::Zero(k);

  const Eigen::MatrixXd log_lambda = joint_log_intensity(p, grid, spec.covariates);
  const Eigen::VectorXd areas = grid.std_areas();
  out.counts = PairCountsMatrix::Zero(k, k);
  for (int r = 0; r < k; ++r) {
    for (int t = 0; t < k; ++t) {
      const double mean = std::exp(log_lambda(r, t)) * areas[r] * areas[t];
      if (!std::isfinite(mean)) {
        throw NumericalError("pair intensity overflows in cell pair (" + std::to_string(r) + ", " +
                             std::to_string(t) + ")");
      }
      out.counts(r, t) = static_cast<int>(rng.poisson(mean));
    }
  }
  for (int r = 0; r < k; ++r) {
    for (int t = 0; t < k; ++t) {
      for (int i = 0; i < out.counts(r, t); ++i) {
        const Point theft = place_in_cell(grid, t, rng);
        const Point recovery = place_in_cell(grid, r, rng);
        out.pairs.thefts.push_back(theft);
        out.pairs.recoveries.emplace_back(recovery);
      }
    }
  }
  return out;
}

double calibrate_beta0(const JointParams& params, const GridSpec& grid, double expected_pairs,
                       const JointCovariates& covariates) {
  if (!(expected_pairs > 0.0)) throw ConfigError("expected number of pairs must be positive");
  JointParams base = params;
  base.beta0 = 0.0;
  const Eigen::MatrixXd log_lambda = joint_log_intensity(base, grid, covariates);
  const Eigen::VectorXd areas = grid.std_areas();
  const double shift = log_lambda.maxCoeff();
  const double mass = (areas.transpose() * (log_lambda.array() - shift).exp().matrix() * areas)(0, 0);
  return std::log(expected_pairs) - shift - std::log(mass);
}

}  // namespace odpp
