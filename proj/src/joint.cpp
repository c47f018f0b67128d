#include "odpp/joint.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "odpp/diagnostics.hpp"
#include "odpp/errors.hpp"

namespace odpp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kMaxLogIntensity = 700.0;

Eigen::VectorXd or_zero(const Eigen::VectorXd& v, Eigen::Index k) {
  return v.size() == 0 ? Eigen::VectorXd::Zero(k) : v;
}

Eigen::VectorXd covariate_term(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta, Eigen::Index k) {
  if (x.cols() == 0 && beta.size() == 0) return Eigen::VectorXd::Zero(k);
  if (x.rows() != k || x.cols() != beta.size()) {
    throw DimensionError("covariate block does not match its coefficients or the grid");
  }
  return x * beta;
}

void check_length(const Eigen::VectorXd& v, Eigen::Index k, const char* name) {
  if (v.size() != 0 && v.size() != k) {
    throw DimensionError(std::string(name) + " must be empty or have one entry per cell");
  }
}

std::string coordinate(const std::string& base, Eigen::Index j, Eigen::Index p) {
  return p == 1 ? base : base + "[" + std::to_string(j) + "]";
}

// Likelihood of the pair intensity with the exp(eta Q) matrix cached, so
// updates of z, beta cost one K x K matrix-vector product.
class JointLikelihood {
 public:
  JointLikelihood(const PairCountsMatrix& counts, const GridSpec& grid, JointCovariates cov,
                  double kernel_sigma, double higdon_a)
      : grid_(grid),
        counts_(counts.cast<double>()),
        areas_(grid.std_areas()),
        cov_(std::move(cov)),
        kernel_sigma_(kernel_sigma),
        higdon_a_(higdon_a) {
    n_r_ = counts_.rowwise().sum();
    n_t_ = counts_.colwise().sum().transpose();
  }

  double operator()(double beta0, const Eigen::VectorXd& beta_r, const Eigen::VectorXd& beta_t,
                    double eta, const Eigen::VectorXd& z_r, const Eigen::VectorXd& z_t,
                    const Eigen::VectorXd& psi_x, const Eigen::VectorXd& psi_y) {
    const Eigen::Index k = areas_.size();
    refresh(eta, psi_x, psi_y);
    Eigen::VectorXd h_r = covariate_term(cov_.x_r, beta_r, k) + z_r;
    h_r.array() += beta0;
    const Eigen::VectorXd h_t = covariate_term(cov_.x_t, beta_t, k) + z_t;
    if (!(h_r.maxCoeff() + h_t.maxCoeff() + max_eta_q_ <= kMaxLogIntensity)) return kNegInf;
    const Eigen::VectorXd a_r = h_r.array().exp() * areas_.array();
    const Eigen::VectorXd a_t = h_t.array().exp() * areas_.array();
    const double integral = a_r.dot(e_ * a_t);
    const double data = eta_sum_q_ + n_r_.dot(h_r) + n_t_.dot(h_t);
    if (!std::isfinite(integral) || !std::isfinite(data)) return kNegInf;
    return data - integral;
  }

 private:
  void refresh(double eta, const Eigen::VectorXd& psi_x, const Eigen::VectorXd& psi_y) {
    const bool psi_changed = !has_q_ || psi_x.size() != psi_x_.size() || psi_x != psi_x_ ||
                             psi_y != psi_y_;
    if (psi_changed && eta != 0.0) {
      q_ = joint_distance_matrix(grid_, or_zero(psi_x, areas_.size()), or_zero(psi_y, areas_.size()),
                                 kernel_sigma_, higdon_a_);
      sum_q_ = counts_.cwiseProduct(q_).sum();
      psi_x_ = psi_x;
      psi_y_ = psi_y;
      has_q_ = true;
      has_e_ = false;
    }
    if (has_e_ && eta == eta_) return;
    const Eigen::Index k = areas_.size();
    if (eta == 0.0) {
      e_ = Eigen::MatrixXd::Ones(k, k);
      max_eta_q_ = 0.0;
      eta_sum_q_ = 0.0;
    } else {
      const Eigen::MatrixXd eq = eta * q_;
      max_eta_q_ = eq.maxCoeff();
      e_ = eq.array().exp();
      eta_sum_q_ = eta * sum_q_;
    }
    eta_ = eta;
    has_e_ = true;
  }

  const GridSpec& grid_;
  Eigen::MatrixXd counts_;
  Eigen::VectorXd areas_;
  JointCovariates cov_;
  double kernel_sigma_;
  double higdon_a_;
  Eigen::VectorXd n_r_;
  Eigen::VectorXd n_t_;

  bool has_q_ = false;
  Eigen::VectorXd psi_x_;
  Eigen::VectorXd psi_y_;
  Eigen::MatrixXd q_;
  double sum_q_ = 0.0;

  bool has_e_ = false;
  double eta_ = 0.0;
  Eigen::MatrixXd e_;
  double max_eta_q_ = 0.0;
  double eta_sum_q_ = 0.0;
};

}  // namespace

PairCountsMatrix pair_counts(const PairedPattern& pairs, const GridSpec& grid) {
  const int k = grid.size();
  PairCountsMatrix n = PairCountsMatrix::Zero(k, k);
  for (std::size_t i : pairs.complete_indices()) {
    const auto t = grid.locate(pairs.thefts[i]);
    const auto r = grid.locate(*pairs.recoveries[i]);
    if (!t || !r) throw DataError("pair " + std::to_string(i) + " has an endpoint outside the grid");
    n(*r, *t) += 1;
  }
  return n;
}

Eigen::MatrixXd joint_distance_matrix(const GridSpec& grid, const Eigen::VectorXd& psi_x,
                                      const Eigen::VectorXd& psi_y, double kernel_sigma,
                                      double higdon_a) {
  const int k = grid.size();
  if (psi_x.size() != k || psi_y.size() != k) throw DimensionError("psi fields need one entry per cell");
  const auto reps = grid.representative_list();
  Eigen::MatrixXd q(k, k);
  for (int t = 0; t < k; ++t) {
    const Eigen::Matrix2d inv = sigma_from_psi(psi_x[t], psi_y[t], kernel_sigma, higdon_a).inverse();
    for (int r = 0; r < k; ++r) {
      const Point d = reps[static_cast<std::size_t>(r)] - reps[static_cast<std::size_t>(t)];
      q(r, t) = d.dot(inv * d);
    }
  }
  return q;
}

Eigen::MatrixXd joint_log_intensity(const JointParams& params, const GridSpec& grid,
                                    const JointCovariates& covariates) {
  const Eigen::Index k = grid.size();
  check_length(params.z_r, k, "z_r");
  check_length(params.z_t, k, "z_t");
  check_length(params.psi_x, k, "psi_x");
  check_length(params.psi_y, k, "psi_y");
  const Eigen::VectorXd h_r = covariate_term(covariates.x_r, params.beta_r, k) + or_zero(params.z_r, k);
  const Eigen::VectorXd h_t = covariate_term(covariates.x_t, params.beta_t, k) + or_zero(params.z_t, k);
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index t = 0; t < k; ++t) out(r, t) = params.beta0 + h_r[r] + h_t[t];
  }
  if (params.eta != 0.0) {
    out += params.eta * joint_distance_matrix(grid, or_zero(params.psi_x, k), or_zero(params.psi_y, k),
                                              params.kernel_sigma, params.higdon_a);
  }
  return out;
}

double joint_loglik(const JointParams& params, const PairCountsMatrix& counts, const GridSpec& grid,
                    const JointCovariates& covariates) {
  const Eigen::Index k = grid.size();
  if (counts.rows() != k || counts.cols() != k) throw DimensionError("pair counts must be K x K");
  const Eigen::MatrixXd log_lambda = joint_log_intensity(params, grid, covariates);
  const Eigen::VectorXd areas = grid.std_areas();
  double integral = 0.0;
  double data = 0.0;
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index t = 0; t < k; ++t) {
      const double l = log_lambda(r, t);
      if (!(l <= kMaxLogIntensity)) {
        throw NumericalError("pair intensity overflows in cell pair (" + std::to_string(r) + ", " +
                             std::to_string(t) + ")");
      }
      integral += std::exp(l) * areas[r] * areas[t];
      if (counts(r, t) != 0) data += counts(r, t) * l;
    }
  }
  return data - integral;
}

JointParams JointFit::params_at(std::size_t draw) const {
  const auto row = static_cast<Eigen::Index>(draw);
  if (draw >= chain.draws()) throw DimensionError("draw index out of range");
  JointParams p;
  p.kernel_sigma = spec.kernel_sigma;
  p.higdon_a = spec.higdon_a;
  p.beta0 = chain.column("beta0")[row];
  const Eigen::Index pr = spec.covariates.x_r.cols();
  const Eigen::Index pt = spec.covariates.x_t.cols();
  p.beta_r.resize(pr);
  p.beta_t.resize(pt);
  for (Eigen::Index j = 0; j < pr; ++j) p.beta_r[j] = chain.column(coordinate("beta_r", j, pr))[row];
  for (Eigen::Index j = 0; j < pt; ++j) p.beta_t[j] = chain.column(coordinate("beta_t", j, pt))[row];
  if (chain.has_scalar("eta")) p.eta = chain.column("eta")[row];
  p.z_r = chain.latent("z_r").row(row).transpose();
  p.z_t = chain.latent("z_t").row(row).transpose();
  if (chain.has_latent("psi_x")) {
    p.psi_x = chain.latent("psi_x").row(row).transpose();
    p.psi_y = chain.latent("psi_y").row(row).transpose();
  }
  return p;
}

JointFit fit_joint(const PairedPattern& pairs, const GridSpec& grid, const JointModelSpec& spec,
                   const McmcConfig& config) {
  if (!(spec.phi_star > 0.0)) throw ConfigError("phi_star must be positive");
  if (!(spec.kernel_sigma > 0.0)) throw ConfigError("kernel sigma must be positive");
  for (const auto* gp : {&spec.initial_gp_r, &spec.initial_gp_t}) {
    if (gp->family != CovarianceModel::Family::Exponential) {
      throw ConfigError("joint latent fields require the exponential covariance family");
    }
    gp->validate();
  }
  const Eigen::Index k = grid.size();
  const auto& cov = spec.covariates;
  if ((cov.x_r.cols() > 0 && cov.x_r.rows() != k) || (cov.x_t.cols() > 0 && cov.x_t.rows() != k)) {
    throw DimensionError("covariate blocks must have one row per grid cell");
  }

  const PairCountsMatrix counts = pair_counts(pairs, grid);
  const int m = counts.sum();
  JointFit fit;
  fit.spec = spec;
  if (m < 500) {
    fit.warnings.push_back("only " + std::to_string(m) +
                           " complete pairs; latent fields will be weakly informed");
  }
  const bool dependent = spec.variant == JointVariant::Dependent;

  auto lik = std::make_shared<JointLikelihood>(counts, grid, cov, spec.kernel_sigma, spec.higdon_a);
  const auto reps = grid.representative_list();
  auto cache_r = std::make_shared<CorrelationFactorCache>(reps, CovarianceModel::Family::Exponential);
  auto cache_t = std::make_shared<CorrelationFactorCache>(reps, CovarianceModel::Family::Exponential);

  PosteriorProgram prog;
  auto& st = prog.state;
  const int i_b0 = st.add("beta0", Eigen::VectorXd::Constant(1, m > 0 ? std::log(m) : 0.0));
  const int i_br = cov.x_r.cols() > 0 ? st.add("beta_r", Eigen::VectorXd::Zero(cov.x_r.cols())) : -1;
  const int i_bt = cov.x_t.cols() > 0 ? st.add("beta_t", Eigen::VectorXd::Zero(cov.x_t.cols())) : -1;
  const int i_eta = dependent ? st.add("eta", Eigen::VectorXd::Zero(1)) : -1;
  const int i_zr = st.add("z_r", Eigen::VectorXd::Zero(k));
  const int i_zt = st.add("z_t", Eigen::VectorXd::Zero(k));
  const int i_px = dependent ? st.add("psi_x", Eigen::VectorXd::Zero(k)) : -1;
  const int i_py = dependent ? st.add("psi_y", Eigen::VectorXd::Zero(k)) : -1;
  const int i_sr = st.add("sigma2_r", Eigen::VectorXd::Constant(1, spec.initial_gp_r.variance));
  const int i_pr = st.add("phi_r", Eigen::VectorXd::Constant(1, spec.initial_gp_r.decay));
  const int i_stt = st.add("sigma2_t", Eigen::VectorXd::Constant(1, spec.initial_gp_t.variance));
  const int i_pt = st.add("phi_t", Eigen::VectorXd::Constant(1, spec.initial_gp_t.decay));

  const Eigen::VectorXd empty;
  auto loglik = [=](const ChainState& s) {
    return (*lik)(s[i_b0][0], i_br >= 0 ? s[i_br] : empty, i_bt >= 0 ? s[i_bt] : empty,
                  i_eta >= 0 ? s[i_eta][0] : 0.0, s[i_zr], s[i_zt], i_px >= 0 ? s[i_px] : empty,
                  i_py >= 0 ? s[i_py] : empty);
  };
  auto gp_draw = [](std::shared_ptr<CorrelationFactorCache> cache, int iv, int id) {
    return [cache, iv, id](const ChainState& s, Rng& rng) {
      return Eigen::VectorXd(std::sqrt(s[iv][0]) * mvn_sample(cache->factor(s[id][0]), rng));
    };
  };
  auto gp_density = [](std::shared_ptr<CorrelationFactorCache> cache, int iz, int iv, int id) {
    return [cache, iz, iv, id](const ChainState& s) {
      return mvn_logpdf(s[iz], cache->factor(s[id][0]), s[iv][0]);
    };
  };

  prog.blocks.push_back(std::make_unique<EssBlock>(i_zr, "z_r", gp_draw(cache_r, i_sr, i_pr), loglik));
  prog.blocks.push_back(std::make_unique<EssBlock>(i_zt, "z_t", gp_draw(cache_t, i_stt, i_pt), loglik));
  if (dependent) {
    auto psi_factor = std::make_shared<const CholFactor>(
        chol(cov_matrix(reps, CovarianceModel::squared_exponential(spec.phi_star))));
    auto psi_draw = [psi_factor](const ChainState&, Rng& rng) { return mvn_sample(*psi_factor, rng); };
    prog.blocks.push_back(std::make_unique<EssBlock>(i_px, "psi_x", psi_draw, loglik));
    prog.blocks.push_back(std::make_unique<EssBlock>(i_py, "psi_y", psi_draw, loglik));
  }

  const Prior normal = Normal{0.0, 100.0};
  const auto& pri = spec.priors;
  const std::vector<Prior> b0_prior{prior_or(pri, "beta0", normal)};
  prog.blocks.push_back(std::make_unique<MhBlock>(i_b0, "beta0", b0_prior, loglik));
  if (CenteredRegressionBlock::applicable(b0_prior)) {
    // beta0 enters only through beta0 + z_r and beta0 + z_t.
    auto factor = [](std::shared_ptr<CorrelationFactorCache> cache, int iv, int id) {
      return [cache, iv, id](const ChainState& s) {
        return std::pair<const CholFactor*, double>(&cache->factor(s[id][0]), s[iv][0]);
      };
    };
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(k, 1);
    prog.blocks.push_back(std::make_unique<CenteredRegressionBlock>(i_b0, i_zr, ones, b0_prior,
                                                                    factor(cache_r, i_sr, i_pr), "beta0|w_r"));
    prog.blocks.push_back(std::make_unique<CenteredRegressionBlock>(i_b0, i_zt, ones, b0_prior,
                                                                    factor(cache_t, i_stt, i_pt), "beta0|w_t"));
  }
  if (i_br >= 0) {
    prog.blocks.push_back(std::make_unique<MhBlock>(
        i_br, "beta_r",
        std::vector<Prior>(static_cast<std::size_t>(cov.x_r.cols()), prior_or(pri, "beta_r", normal)),
        loglik));
  }
  if (i_bt >= 0) {
    prog.blocks.push_back(std::make_unique<MhBlock>(
        i_bt, "beta_t",
        std::vector<Prior>(static_cast<std::size_t>(cov.x_t.cols()), prior_or(pri, "beta_t", normal)),
        loglik));
  }
  if (dependent) {
    prog.blocks.push_back(std::make_unique<MhBlock>(
        i_eta, "eta", std::vector<Prior>{prior_or(pri, "eta", normal)}, loglik, 0.01));
  }
  const Prior ig = InverseGamma{2.0, 0.1};
  const Prior unif = Uniform{0.0, 10.0};
  auto dens_r = gp_density(cache_r, i_zr, i_sr, i_pr);
  auto dens_t = gp_density(cache_t, i_zt, i_stt, i_pt);
  prog.blocks.push_back(std::make_unique<MhBlock>(
      i_sr, "sigma2_r", std::vector<Prior>{prior_or(pri, "sigma2_r", ig)}, dens_r, 0.5));
  prog.blocks.push_back(std::make_unique<MhBlock>(
      i_pr, "phi_r", std::vector<Prior>{prior_or(pri, "phi_r", unif)}, dens_r, 0.5));
  prog.blocks.push_back(std::make_unique<MhBlock>(
      i_stt, "sigma2_t", std::vector<Prior>{prior_or(pri, "sigma2_t", ig)}, dens_t, 0.5));
  prog.blocks.push_back(std::make_unique<MhBlock>(
      i_pt, "phi_t", std::vector<Prior>{prior_or(pri, "phi_t", unif)}, dens_t, 0.5));

  prog.scalar_records = {i_b0};
  for (int i : {i_br, i_bt, i_eta}) {
    if (i >= 0) prog.scalar_records.push_back(i);
  }
  for (int i : {i_sr, i_pr, i_stt, i_pt}) prog.scalar_records.push_back(i);
  prog.latent_records = {i_zr, i_zt};
  if (dependent) {
    prog.latent_records.push_back(i_px);
    prog.latent_records.push_back(i_py);
  }
  prog.derived.push_back({"loglik", loglik});
  fit.chain = run_chain(prog, config);
  return fit;
}

void validate_flow_sets(const std::vector<int>& origin, const std::vector<std::vector<int>>& partition,
                        int k_cells) {
  if (origin.empty()) throw ConfigError("origin set B_o is empty");
  for (int c : origin) {
    if (c < 0 || c >= k_cells) throw ConfigError("origin cell " + std::to_string(c) + " out of range");
  }
  if (partition.empty()) throw ConfigError("partition is empty");
  std::vector<int> owner(static_cast<std::size_t>(k_cells), -1);
  for (std::size_t d = 0; d < partition.size(); ++d) {
    for (int c : partition[d]) {
      if (c < 0 || c >= k_cells) throw ConfigError("partition cell " + std::to_string(c) + " out of range");
      auto& o = owner[static_cast<std::size_t>(c)];
      if (o >= 0) throw ConfigError("cell " + std::to_string(c) + " appears in more than one partition set");
      o = static_cast<int>(d);
    }
  }
  for (int c = 0; c < k_cells; ++c) {
    if (owner[static_cast<std::size_t>(c)] < 0) {
      throw ConfigError("partition does not cover cell " + std::to_string(c));
    }
  }
}

Eigen::VectorXd flow_from_intensity(const Eigen::MatrixXd& log_lambda, const Eigen::VectorXd& areas,
                                    const std::vector<int>& origin,
                                    const std::vector<std::vector<int>>& partition) {
  const Eigen::Index k = areas.size();
  if (log_lambda.rows() != k || log_lambda.cols() != k) throw DimensionError("intensity must be K x K");
  double shift = -std::numeric_limits<double>::infinity();
  for (int t : origin) shift = std::max(shift, log_lambda.col(t).maxCoeff());
  // Mass per recovery cell from B_o, up to the common factor exp(shift).
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(k);
  for (int t : origin) {
    mass += ((log_lambda.col(t).array() - shift).exp() * areas.array()).matrix() * areas[t];
  }
  Eigen::VectorXd per_set(static_cast<Eigen::Index>(partition.size()));
  for (std::size_t d = 0; d < partition.size(); ++d) {
    double s = 0.0;
    for (int r : partition[d]) s += mass[r];
    per_set[static_cast<Eigen::Index>(d)] = s;
  }
  return per_set / per_set.sum();
}

FlowSummary flow_proportions(const JointFit& fit, const GridSpec& grid, const std::vector<int>& origin,
                             const std::vector<std::vector<int>>& partition) {
  validate_flow_sets(origin, partition, grid.size());
  const std::size_t n = fit.chain.draws();
  if (n == 0) throw DataError("flow proportions need at least one posterior draw");
  const Eigen::VectorXd areas = grid.std_areas();
  const auto d = static_cast<Eigen::Index>(partition.size());
  FlowSummary out;
  out.draws.resize(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::MatrixXd ll = joint_log_intensity(fit.params_at(i), grid, fit.spec.covariates);
    out.draws.row(static_cast<Eigen::Index>(i)) = flow_from_intensity(ll, areas, origin, partition).transpose();
  }
  out.mean = out.draws.colwise().mean().transpose();
  out.lo95.resize(d);
  out.hi95.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto q = quantiles(out.draws.col(j), {0.025, 0.975});
    out.lo95[j] = q[0];
    out.hi95[j] = q[1];
  }
  return out;
}

CountFlow flow_proportions(const PairCountsMatrix& counts, const std::vector<int>& origin,
                           const std::vector<std::vector<int>>& partition) {
  if (counts.rows() != counts.cols()) throw DimensionError("pair counts must be square");
  validate_flow_sets(origin, partition, static_cast<int>(counts.rows()));
  CountFlow out;
  Eigen::VectorXd per_set = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(partition.size()));
  for (std::size_t d = 0; d < partition.size(); ++d) {
    for (int r : partition[d]) {
      for (int t : origin) per_set[static_cast<Eigen::Index>(d)] += counts(r, t);
    }
  }
  out.total = static_cast<int>(per_set.sum());
  out.defined = out.total > 0;
  out.proportions = out.defined ? Eigen::VectorXd(per_set / out.total)
                                : Eigen::VectorXd::Constant(per_set.size(),
                                                            std::numeric_limits<double>::quiet_NaN());
  return out;
}

}  // namespace odpp
