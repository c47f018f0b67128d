#include "odpp/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <variant>

#include "odpp/errors.hpp"

namespace odpp {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

ArwmhResult arwmh_step(const Eigen::VectorXd& current, const LogTarget& log_target,
                       AdaptiveRWState state, Rng& rng, std::optional<double> current_log_target) {
  ++state.iteration;
  const double cur = current_log_target ? *current_log_target : log_target(current);
  if (std::isnan(cur)) throw NumericalError("log target is NaN at the current state");

  Eigen::VectorXd proposal(current.size());
  const double step = std::exp(state.log_step);
  for (Eigen::Index i = 0; i < current.size(); ++i) proposal[i] = current[i] + step * rng.normal();
  const double log_u = std::log(rng.uniform());

  const double prop = log_target(proposal);
  if (std::isnan(prop)) throw NumericalError("log target is NaN at the proposed state");

  const bool accepted = prop > kNegInf && (cur == kNegInf || log_u < prop - cur);
  if (accepted) ++state.accept_count;
  if (state.adapt) {
    const double gain = std::pow(static_cast<double>(state.iteration), -0.6);
    state.log_step += gain * ((accepted ? 1.0 : 0.0) - state.target_accept);
  }
  ArwmhResult r;
  r.accepted = accepted;
  r.next = accepted ? proposal : current;
  r.log_target = accepted ? prop : cur;
  r.state = state;
  return r;
}

EssResult ess_step(const Eigen::VectorXd& current, const Eigen::VectorXd& prior_draw,
                   const LogTarget& log_lik, Rng& rng, std::optional<double> current_log_lik,
                   int max_shrinks) {
  const double ll0 = current_log_lik ? *current_log_lik : log_lik(current);
  if (std::isnan(ll0)) throw NumericalError("log likelihood is NaN at the current latent state");
  const double threshold = ll0 + std::log(rng.uniform());

  double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double lo = theta - 2.0 * std::numbers::pi;
  double hi = theta;
  EssResult r;
  for (;;) {
    Eigen::VectorXd proposal = current * std::cos(theta) + prior_draw * std::sin(theta);
    const double ll = log_lik(proposal);
    if (std::isnan(ll)) throw NumericalError("log likelihood is NaN on the slice ellipse");
    if (ll > threshold) {
      r.next = std::move(proposal);
      r.log_lik = ll;
      return r;
    }
    if (++r.shrinks > max_shrinks) {
      r.next = current;
      r.log_lik = ll0;
      return r;
    }
    if (theta < 0.0) {
      lo = theta;
    } else {
      hi = theta;
    }
    theta = rng.uniform(lo, hi);
  }
}

Eigen::VectorXd ess_step(const Eigen::VectorXd& current, const CholFactor& prior_factor,
                         const LogTarget& log_lik, Rng& rng) {
  const Eigen::VectorXd nu = mvn_sample(prior_factor, rng);
  return ess_step(current, nu, log_lik, rng).next;
}

int ChainState::add(std::string name, Eigen::VectorXd initial,
                    std::vector<std::string> coordinate_names) {
  for (const auto& n : names_) {
    if (n == name) throw ConfigError("duplicate chain state block '" + name + "'");
  }
  if (!coordinate_names.empty() &&
      static_cast<Eigen::Index>(coordinate_names.size()) != initial.size()) {
    throw DimensionError("coordinate names for '" + name + "' do not match its length");
  }
  names_.push_back(std::move(name));
  values_.push_back(std::move(initial));
  coordinate_names_.push_back(std::move(coordinate_names));
  return static_cast<int>(values_.size()) - 1;
}

int ChainState::index(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("no chain state block named '" + name + "'");
}

std::vector<std::string> ChainState::coordinate_names(int index) const {
  const auto i = static_cast<std::size_t>(index);
  if (!coordinate_names_[i].empty()) return coordinate_names_[i];
  const auto n = values_[i].size();
  if (n == 1) return {names_[i]};
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) out.push_back(names_[i] + "[" + std::to_string(j) + "]");
  return out;
}

MhBlock::MhBlock(int state_index, std::string label, std::vector<Prior> priors,
                 StateLogDensity log_lik, double initial_step, std::optional<double> target_accept)
    : index_(state_index),
      label_(std::move(label)),
      priors_(std::move(priors)),
      log_lik_(std::move(log_lik)) {
  if (priors_.empty()) throw ConfigError("MH block '" + label_ + "' has no coordinates");
  transforms_.reserve(priors_.size());
  for (const auto& p : priors_) {
    validate(p);
    transforms_.push_back(default_transform(p));
  }
  rw_.log_step = std::log(initial_step);
  rw_.target_accept =
      target_accept.value_or(priors_.size() > 1 ? kVectorTargetAccept : kScalarTargetAccept);
}

void MhBlock::update(ChainState& state, Rng& rng) {
  const Eigen::VectorXd saved = state[index_];
  if (saved.size() != static_cast<Eigen::Index>(priors_.size())) {
    throw DimensionError("MH block '" + label_ + "' dimension does not match its state");
  }
  Eigen::VectorXd u(saved.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) u[j] = transforms_[j].to_unconstrained(saved[j]);

  auto target = [&](const Eigen::VectorXd& uu) {
    Eigen::VectorXd x(uu.size());
    double lp = 0.0;
    for (Eigen::Index j = 0; j < uu.size(); ++j) {
      x[j] = transforms_[j].to_natural(uu[j]);
      if (!std::isfinite(x[j])) return kNegInf;
      lp += log_density(priors_[j], x[j]) + transforms_[j].log_jacobian(uu[j]);
    }
    if (lp == kNegInf) return kNegInf;
    state[index_] = x;
    return log_lik_(state) + lp;
  };
  const ArwmhResult r = arwmh_step(u, target, rw_, rng);
  rw_ = r.state;
  if (r.accepted) {
    Eigen::VectorXd x(u.size());
    for (Eigen::Index j = 0; j < u.size(); ++j) x[j] = transforms_[j].to_natural(r.next[j]);
    state[index_] = x;
  } else {
    state[index_] = saved;
  }
}

EssBlock::EssBlock(int state_index, std::string label, PriorDraw prior_draw,
                   StateLogDensity log_lik)
    : index_(state_index),
      label_(std::move(label)),
      prior_draw_(std::move(prior_draw)),
      log_lik_(std::move(log_lik)) {}

void EssBlock::update(ChainState& state, Rng& rng) {
  const Eigen::VectorXd current = state[index_];
  const Eigen::VectorXd nu = prior_draw_(state, rng);
  if (nu.size() != current.size()) {
    throw DimensionError("ESS block '" + label_ + "' prior draw has the wrong length");
  }
  auto ll = [&](const Eigen::VectorXd& z) {
    state[index_] = z;
    return log_lik_(state);
  };
  EssResult r = ess_step(current, nu, ll, rng);
  state[index_] = std::move(r.next);
  ++updates_;
  shrinks_ += static_cast<std::uint64_t>(r.shrinks);
}

double EssBlock::acceptance_rate() const {
  // Fraction of first proposals accepted is not tracked; report 1/(1 + mean shrinks).
  if (updates_ == 0) return 1.0;
  return 1.0 / (1.0 + static_cast<double>(shrinks_) / static_cast<double>(updates_));
}

CenteredRegressionBlock::CenteredRegressionBlock(int beta_index, int z_index, Eigen::MatrixXd x,
                                                 const std::vector<Prior>& priors, FactorFn factor,
                                                 std::string label)
    : beta_index_(beta_index),
      z_index_(z_index),
      x_(std::move(x)),
      prior_mean_(Eigen::VectorXd::Zero(x_.cols())),
      prior_precision_(Eigen::VectorXd::Zero(x_.cols())),
      factor_(std::move(factor)),
      label_(std::move(label)) {
  if (static_cast<Eigen::Index>(priors.size()) != x_.cols()) {
    throw DimensionError("one prior per regression coefficient required");
  }
  if (!applicable(priors)) throw ConfigError("centered regression update needs normal or flat priors");
  for (Eigen::Index j = 0; j < x_.cols(); ++j) {
    if (const auto* n = std::get_if<Normal>(&priors[static_cast<std::size_t>(j)])) {
      prior_mean_[j] = n->mean;
      prior_precision_[j] = 1.0 / n->variance;
    }
  }
}

bool CenteredRegressionBlock::applicable(const std::vector<Prior>& priors) {
  return std::all_of(priors.begin(), priors.end(), [](const Prior& p) {
    return std::holds_alternative<Normal>(p) || std::holds_alternative<Flat>(p);
  });
}

void CenteredRegressionBlock::update(ChainState& state, Rng& rng) {
  const auto [factor, scale] = factor_(state);
  const Eigen::VectorXd w = x_ * state[beta_index_] + state[z_index_];
  // Whitened design and response: L^{-1} X / sqrt(scale), L^{-1} w / sqrt(scale).
  const double inv_sd = 1.0 / std::sqrt(scale);
  const Eigen::MatrixXd a = factor->lower.triangularView<Eigen::Lower>().solve(x_) * inv_sd;
  const Eigen::VectorXd b = factor->half_solve(w) * inv_sd;
  Eigen::MatrixXd precision = a.transpose() * a;
  precision.diagonal() += prior_precision_;
  const Eigen::VectorXd rhs = a.transpose() * b + prior_precision_.cwiseProduct(prior_mean_);
  const Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericalError("centered regression precision is not positive definite");
  Eigen::VectorXd eps(x_.cols());
  for (Eigen::Index j = 0; j < eps.size(); ++j) eps[j] = rng.normal();
  // precision = U^T U with U = L^T, so U^{-1} eps ~ N(0, precision^{-1}).
  const Eigen::VectorXd beta = llt.solve(rhs) + llt.matrixU().solve(eps);
  state[beta_index_] = beta;
  state[z_index_] = w - x_ * beta;
}

bool PosteriorChain::has_scalar(const std::string& name) const {
  for (const auto& n : scalar_names) {
    if (n == name) return true;
  }
  return false;
}

Eigen::VectorXd PosteriorChain::column(const std::string& name) const {
  for (std::size_t j = 0; j < scalar_names.size(); ++j) {
    if (scalar_names[j] == name) return scalars.col(static_cast<Eigen::Index>(j));
  }
  throw ConfigError("chain has no scalar '" + name + "'");
}

bool PosteriorChain::has_latent(const std::string& name) const {
  for (const auto& n : latent_names) {
    if (n == name) return true;
  }
  return false;
}

const Eigen::MatrixXd& PosteriorChain::latent(const std::string& name) const {
  for (std::size_t j = 0; j < latent_names.size(); ++j) {
    if (latent_names[j] == name) return latents[j];
  }
  throw ConfigError("chain has no latent field '" + name + "'");
}

double PosteriorChain::mean(const std::string& name) const { return column(name).mean(); }

PosteriorChain run_chain(PosteriorProgram& program, const McmcConfig& config) {
  Rng rng(config.seed, config.stream);
  auto& state = program.state;

  PosteriorChain chain;
  chain.burn_in = config.burn_in;
  chain.seed = config.seed;
  for (int idx : program.scalar_records) {
    for (auto& n : state.coordinate_names(idx)) chain.scalar_names.push_back(std::move(n));
  }
  for (const auto& d : program.derived) chain.scalar_names.push_back(d.name);
  for (int idx : program.latent_records) {
    chain.latent_names.push_back(state.name(idx));
    chain.latents.emplace_back(static_cast<Eigen::Index>(config.keep), state[idx].size());
  }
  chain.scalars.resize(static_cast<Eigen::Index>(config.keep),
                       static_cast<Eigen::Index>(chain.scalar_names.size()));

  const std::size_t total = config.burn_in + config.keep;
  for (std::size_t iter = 0; iter < total; ++iter) {
    if (iter == config.burn_in && !config.adapt_after_burn_in) {
      for (auto& b : program.blocks) b->set_adapting(false);
    }
    for (auto& block : program.blocks) {
      try {
        block->update(state, rng);
      } catch (const Error& e) {
        throw Error(e.category(), "iteration " + std::to_string(iter) + ", block '" +
                                      block->label() + "': " + e.what());
      }
    }
    if (iter < config.burn_in) continue;
    const auto row = static_cast<Eigen::Index>(iter - config.burn_in);
    Eigen::Index col = 0;
    for (int idx : program.scalar_records) {
      const auto& v = state[idx];
      for (Eigen::Index j = 0; j < v.size(); ++j) chain.scalars(row, col++) = v[j];
    }
    for (const auto& d : program.derived) chain.scalars(row, col++) = d.value(state);
    for (std::size_t l = 0; l < program.latent_records.size(); ++l) {
      chain.latents[l].row(row) = state[program.latent_records[l]].transpose();
    }
  }
  for (const auto& b : program.blocks) {
    chain.blocks.push_back({b->label(), b->acceptance_rate(), b->step_size()});
  }
  return chain;
}

}  // namespace odpp
