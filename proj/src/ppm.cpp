#include "odpp/ppm.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "odpp/diagnostics.hpp"
#include "odpp/errors.hpp"

namespace odpp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// exp() overflows just above this.
constexpr double kMaxLogIntensity = 700.0;

struct Evaluation {
  double value = 0.0;
  int overflow_cell = -1;
};

Evaluation evaluate(const Eigen::VectorXd& log_lambda, const Eigen::VectorXd& counts,
                    const Eigen::VectorXd& areas) {
  Evaluation e;
  double integral = 0.0;
  double data = 0.0;
  for (Eigen::Index k = 0; k < log_lambda.size(); ++k) {
    const double l = log_lambda[k];
    if (!(l <= kMaxLogIntensity)) {
      e.overflow_cell = static_cast<int>(k);
      return e;
    }
    integral += std::exp(l) * areas[k];
    if (counts[k] != 0.0) data += counts[k] * l;
  }
  e.value = data - integral;
  return e;
}

// Sampler-facing likelihood: overflow is an impossible state, not an error.
double sampler_loglik(const Eigen::VectorXd& log_lambda, const Eigen::VectorXd& counts,
                      const Eigen::VectorXd& areas) {
  const Evaluation e = evaluate(log_lambda, counts, areas);
  return e.overflow_cell >= 0 ? kNegInf : e.value;
}

void check_dimensions(const Eigen::VectorXd& beta, const Eigen::VectorXd& z,
                      const Eigen::VectorXi& counts, const GridSpec& grid, const Eigen::MatrixXd& x) {
  const auto k = static_cast<Eigen::Index>(grid.size());
  if (counts.size() != k || x.rows() != k) {
    throw DimensionError("counts and design rows must equal the number of grid cells");
  }
  if (x.cols() != beta.size()) throw DimensionError("beta length must equal design columns");
  if (z.size() != 0 && z.size() != k) throw DimensionError("z must be empty or have one entry per cell");
}

Eigen::VectorXd log_intensity(const Eigen::VectorXd& beta, const Eigen::VectorXd& z,
                              const Eigen::MatrixXd& x) {
  Eigen::VectorXd eta = x * beta;
  if (z.size() != 0) eta += z;
  return eta;
}

struct PpmData {
  Eigen::VectorXd counts;
  Eigen::VectorXd areas;
  Eigen::MatrixXd x;
  std::vector<Point> reps;
};

PpmData make_data(const PointPattern& pattern, const GridSpec& grid, const Eigen::MatrixXd& x) {
  if (x.rows() != grid.size()) throw DimensionError("design rows must equal the number of grid cells");
  if (x.cols() < 1) throw DimensionError("design needs at least one column");
  PpmData d;
  d.counts = assign_counts(pattern, grid).cast<double>();
  d.areas = grid.std_areas();
  d.x = x;
  d.reps = grid.representative_list();
  return d;
}

Eigen::VectorXd initial_beta(const PpmData& d) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d.x.cols());
  const bool intercept_first = (d.x.col(0).array() == 1.0).all();
  const double n = d.counts.sum();
  if (intercept_first && n > 0.0) beta[0] = std::log(n / d.areas.sum());
  return beta;
}

std::vector<Prior> beta_priors(const PriorSpec& priors, Eigen::Index p) {
  const Prior beta = prior_or(priors, "beta", Normal{0.0, 100.0});
  return std::vector<Prior>(static_cast<std::size_t>(p), beta);
}

std::string beta_name(Eigen::Index j, Eigen::Index p) {
  return p == 1 ? "beta" : "beta[" + std::to_string(j) + "]";
}

}  // namespace

double loglik_from_log_intensity(const Eigen::VectorXd& log_lambda, const Eigen::VectorXd& counts,
                                 const Eigen::VectorXd& areas) {
  if (counts.size() != log_lambda.size() || areas.size() != log_lambda.size()) {
    throw DimensionError("log intensity, counts and areas differ in length");
  }
  const Evaluation e = evaluate(log_lambda, counts, areas);
  if (e.overflow_cell >= 0) {
    throw NumericalError("intensity overflows in cell " + std::to_string(e.overflow_cell));
  }
  return e.value;
}

double loglik_gridded(const Eigen::VectorXd& beta, const Eigen::VectorXd& z,
                      const Eigen::VectorXi& counts, const GridSpec& grid, const Eigen::MatrixXd& x) {
  check_dimensions(beta, z, counts, grid, x);
  return loglik_from_log_intensity(log_intensity(beta, z, x), counts.cast<double>(), grid.std_areas());
}

GriddedGradient loglik_gridded_gradient(const Eigen::VectorXd& beta, const Eigen::VectorXd& z,
                                        const Eigen::VectorXi& counts, const GridSpec& grid,
                                        const Eigen::MatrixXd& x) {
  check_dimensions(beta, z, counts, grid, x);
  const Eigen::VectorXd lambda = log_intensity(beta, z, x).array().exp();
  GriddedGradient g;
  g.z = counts.cast<double>().array() - lambda.array() * grid.std_areas().array();
  g.beta = x.transpose() * g.z;
  return g;
}

PosteriorChain fit_nhpp(const PointPattern& pattern, const GridSpec& grid, const Eigen::MatrixXd& x,
                        const PriorSpec& priors, const McmcConfig& config) {
  auto data = std::make_shared<const PpmData>(make_data(pattern, grid, x));
  PosteriorProgram prog;
  const int ib = prog.state.add("beta", initial_beta(*data));

  auto loglik = [data, ib](const ChainState& s) {
    return sampler_loglik(data->x * s[ib], data->counts, data->areas);
  };
  prog.blocks.push_back(
      std::make_unique<MhBlock>(ib, "beta", beta_priors(priors, x.cols()), loglik));
  prog.scalar_records = {ib};
  prog.derived.push_back({"loglik", loglik});
  return run_chain(prog, config);
}

PosteriorChain fit_lgcp(const PointPattern& pattern, const GridSpec& grid, const Eigen::MatrixXd& x,
                        const PriorSpec& priors, const McmcConfig& config,
                        const CovarianceModel& initial_gp) {
  if (initial_gp.family != CovarianceModel::Family::Exponential) {
    throw ConfigError("LGCP latent field requires the exponential covariance family");
  }
  initial_gp.validate();
  auto data = std::make_shared<const PpmData>(make_data(pattern, grid, x));
  auto cache = std::make_shared<CorrelationFactorCache>(data->reps, CovarianceModel::Family::Exponential);
  const Eigen::Index k = grid.size();

  PosteriorProgram prog;
  const int ib = prog.state.add("beta", initial_beta(*data));
  const int iz = prog.state.add("z", Eigen::VectorXd::Zero(k));
  const int is = prog.state.add("sigma2", Eigen::VectorXd::Constant(1, initial_gp.variance));
  const int ip = prog.state.add("phi", Eigen::VectorXd::Constant(1, initial_gp.decay));

  auto data_loglik = [data, ib, iz](const ChainState& s) {
    return sampler_loglik(data->x * s[ib] + s[iz], data->counts, data->areas);
  };
  auto gp_logprior = [cache, iz, is, ip](const ChainState& s) {
    const CholFactor& f = cache->factor(s[ip][0]);
    return mvn_logpdf(s[iz], f, s[is][0]);
  };
  auto prior_draw = [cache, is, ip](const ChainState& s, Rng& rng) {
    const CholFactor& f = cache->factor(s[ip][0]);
    return Eigen::VectorXd(std::sqrt(s[is][0]) * mvn_sample(f, rng));
  };

  prog.blocks.push_back(std::make_unique<EssBlock>(iz, "z", prior_draw, data_loglik));
  const std::vector<Prior> bp = beta_priors(priors, x.cols());
  prog.blocks.push_back(std::make_unique<MhBlock>(ib, "beta", bp, data_loglik));
  if (CenteredRegressionBlock::applicable(bp)) {
    auto factor = [cache, is, ip](const ChainState& s) {
      return std::pair<const CholFactor*, double>(&cache->factor(s[ip][0]), s[is][0]);
    };
    prog.blocks.push_back(std::make_unique<CenteredRegressionBlock>(ib, iz, x, bp, factor));
  }
  prog.blocks.push_back(std::make_unique<MhBlock>(
      is, "sigma2", std::vector<Prior>{prior_or(priors, "sigma2", InverseGamma{2.0, 0.1})},
      gp_logprior, 0.5));
  prog.blocks.push_back(std::make_unique<MhBlock>(
      ip, "phi", std::vector<Prior>{prior_or(priors, "phi", Uniform{0.0, 10.0})}, gp_logprior,
      0.5));
  prog.scalar_records = {ib, is, ip};
  prog.latent_records = {iz};
  prog.derived.push_back({"loglik", data_loglik});
  return run_chain(prog, config);
}

PosteriorChain fit_intensity(const PointPattern& pattern, const GridSpec& grid,
                             const Eigen::MatrixXd& x, const IntensityModelSpec& spec,
                             const McmcConfig& config) {
  if (spec.kind == IntensityKind::NHPP) return fit_nhpp(pattern, grid, x, spec.priors, config);
  return fit_lgcp(pattern, grid, x, spec.priors, config, spec.initial_gp);
}

Eigen::MatrixXd log_intensity_draws(const PosteriorChain& chain, const Eigen::MatrixXd& x) {
  const auto n = static_cast<Eigen::Index>(chain.draws());
  Eigen::MatrixXd beta(n, x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) beta.col(j) = chain.column(beta_name(j, x.cols()));
  Eigen::MatrixXd out = beta * x.transpose();
  if (chain.has_latent("z")) {
    const auto& z = chain.latent("z");
    if (z.cols() != x.rows()) throw DimensionError("latent z length does not match design rows");
    out += z;
  }
  return out;
}

IntensitySurface posterior_intensity(const PosteriorChain& chain, const GridSpec& grid,
                                     const Eigen::MatrixXd& x) {
  if (x.rows() != grid.size()) throw DimensionError("design rows must equal the number of grid cells");
  if (chain.draws() == 0) throw DataError("posterior intensity needs at least one draw");
  const Eigen::MatrixXd lambda = log_intensity_draws(chain, x).array().exp();
  const Eigen::Index k = lambda.cols();
  IntensitySurface s;
  s.mean.resize(k);
  s.sd.resize(k);
  s.lo95.resize(k);
  s.hi95.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::VectorXd col = lambda.col(c);
    s.mean[c] = col.mean();
    s.sd[c] = sample_sd(col);
    const auto q = quantiles(col, {0.025, 0.975});
    s.lo95[c] = q[0];
    s.hi95[c] = q[1];
  }
  return s;
}

Eigen::VectorXi sample_predictive_counts(const Eigen::VectorXd& lambda, const Eigen::VectorXd& areas,
                                         double scale, Rng& rng) {
  if (!(scale > 0.0)) throw ConfigError("predictive scale must be positive");
  if (lambda.size() != areas.size()) throw DimensionError("lambda and areas differ in length");
  Eigen::VectorXi counts(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    counts[k] = static_cast<int>(rng.poisson(scale * lambda[k] * areas[k]));
  }
  return counts;
}

Eigen::VectorXi sample_predictive_counts(const PosteriorChain& chain, std::size_t draw,
                                         const GridSpec& grid, const Eigen::MatrixXd& x,
                                         double scale, Rng& rng) {
  const auto row = static_cast<Eigen::Index>(draw);
  if (draw >= chain.draws()) throw DimensionError("draw index out of range");
  if (x.rows() != grid.size()) throw DimensionError("design rows must equal the number of grid cells");
  Eigen::VectorXd beta(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) beta[j] = chain.column(beta_name(j, x.cols()))[row];
  Eigen::VectorXd eta = x * beta;
  if (chain.has_latent("z")) eta += chain.latent("z").row(row).transpose();
  return sample_predictive_counts(Eigen::VectorXd(eta.array().exp()), grid.std_areas(), scale, rng);
}

double thinning_scale(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("retention probability must lie in (0, 1)");
  return (1.0 - p) / p;
}

}  // namespace odpp
