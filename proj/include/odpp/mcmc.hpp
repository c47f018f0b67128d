#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "odpp/gp.hpp"
#include "odpp/priors.hpp"
#include "odpp/rng.hpp"

namespace odpp {

// ---------------------------------------------------------------------------
// Transition kernels
// ---------------------------------------------------------------------------

inline constexpr double kVectorTargetAccept = 0.234;
inline constexpr double kScalarTargetAccept = 0.44;

/// Robbins-Monro tuned random-walk scale. After each step
///   log_step += t^{-0.6} * (accepted - target_accept),   t = iteration,
/// so adaptation diminishes and |change| <= t^{-0.6}.
struct AdaptiveRWState {
  double log_step = -1.0;
  double target_accept = kVectorTargetAccept;
  std::uint64_t iteration = 0;
  std::uint64_t accept_count = 0;
  bool adapt = true;

  double acceptance_rate() const {
    return iteration == 0 ? 0.0 : static_cast<double>(accept_count) / static_cast<double>(iteration);
  }
};

using LogTarget = std::function<double(const Eigen::VectorXd&)>;

struct ArwmhResult {
  Eigen::VectorXd next;
  AdaptiveRWState state;
  bool accepted = false;
  double log_target = 0.0;
};

/// One adaptive random-walk Metropolis step with proposal
/// current + exp(log_step) * N(0, I). A NaN target raises NumericalError;
/// -inf proposals are rejected.
ArwmhResult arwmh_step(const Eigen::VectorXd& current, const LogTarget& log_target,
                       AdaptiveRWState state, Rng& rng,
                       std::optional<double> current_log_target = std::nullopt);

struct EssResult {
  Eigen::VectorXd next;
  double log_lik = 0.0;
  int shrinks = 0;
};

/// Elliptical slice sampling step (Murray, Adams & MacKay) given a draw
/// `prior_draw` from the zero-mean Gaussian prior. Leaves
/// N(z; 0, C) exp(log_lik(z)) invariant. The bracket shrinks toward the
/// current state, so the step terminates; after `max_shrinks` it returns the
/// current state unchanged.
EssResult ess_step(const Eigen::VectorXd& current, const Eigen::VectorXd& prior_draw,
                   const LogTarget& log_lik, Rng& rng,
                   std::optional<double> current_log_lik = std::nullopt, int max_shrinks = 10000);

/// Convenience overload drawing the prior auxiliary from `prior_factor`.
Eigen::VectorXd ess_step(const Eigen::VectorXd& current, const CholFactor& prior_factor,
                         const LogTarget& log_lik, Rng& rng);

// ---------------------------------------------------------------------------
// Chain driver
// ---------------------------------------------------------------------------

/// Named parameter blocks of a posterior program, each a vector. Values are
/// kept on their natural scale.
class ChainState {
 public:
  int add(std::string name, Eigen::VectorXd initial, std::vector<std::string> coordinate_names = {});

  Eigen::VectorXd& operator[](int index) { return values_.at(static_cast<std::size_t>(index)); }
  const Eigen::VectorXd& operator[](int index) const {
    return values_.at(static_cast<std::size_t>(index));
  }
  int index(const std::string& name) const;
  const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
  /// Scalar labels of a block: `name` for length-1 blocks, else `name[j]`
  /// unless explicit coordinate names were given.
  std::vector<std::string> coordinate_names(int index) const;
  int size() const { return static_cast<int>(values_.size()); }

 private:
  std::vector<std::string> names_;
  std::vector<Eigen::VectorXd> values_;
  std::vector<std::vector<std::string>> coordinate_names_;
};

using StateLogDensity = std::function<double(const ChainState&)>;
using PriorDraw = std::function<Eigen::VectorXd(const ChainState&, Rng&)>;

class UpdateBlock {
 public:
  virtual ~UpdateBlock() = default;
  virtual void update(ChainState& state, Rng& rng) = 0;
  virtual const std::string& label() const = 0;
  /// Acceptance rate for MH blocks, mean shrink count for ESS blocks.
  virtual double acceptance_rate() const { return 1.0; }
  virtual double step_size() const { return 0.0; }
  virtual void set_adapting(bool) {}
};

/// Adaptive random-walk MH on one state block. Each coordinate has its own
/// prior; proposals act on the transformed scale given by
/// default_transform(prior), with the log-Jacobian added to the target.
/// The target is log_lik(state) + sum_j log prior_j(x_j) + log |J|.
class MhBlock final : public UpdateBlock {
 public:
  MhBlock(int state_index, std::string label, std::vector<Prior> priors, StateLogDensity log_lik,
          double initial_step = 0.1, std::optional<double> target_accept = std::nullopt);

  void update(ChainState& state, Rng& rng) override;
  const std::string& label() const override { return label_; }
  double acceptance_rate() const override { return rw_.acceptance_rate(); }
  double step_size() const override { return std::exp(rw_.log_step); }
  void set_adapting(bool on) override { rw_.adapt = on; }
  const AdaptiveRWState& rw_state() const { return rw_; }

 private:
  int index_;
  std::string label_;
  std::vector<Prior> priors_;
  std::vector<Transform> transforms_;
  StateLogDensity log_lik_;
  AdaptiveRWState rw_;
};

/// Elliptical slice update of one latent state block.
class EssBlock final : public UpdateBlock {
 public:
  EssBlock(int state_index, std::string label, PriorDraw prior_draw, StateLogDensity log_lik);

  void update(ChainState& state, Rng& rng) override;
  const std::string& label() const override { return label_; }
  double acceptance_rate() const override;

 private:
  int index_;
  std::string label_;
  PriorDraw prior_draw_;
  StateLogDensity log_lik_;
  std::uint64_t updates_ = 0;
  std::uint64_t shrinks_ = 0;
};

/// Exact Gibbs draw of regression coefficients in the centered
/// parameterization. With w = X beta + z, z ~ N(0, scale * L L^T) and
/// independent normal (or flat) priors on beta, the data depend on (beta, z)
/// only through w, so beta | w is Gaussian. The block draws it and resets
/// z = w - X beta. Alternating this with updates in the (beta, z)
/// parameterization removes most of the beta / z confounding.
class CenteredRegressionBlock final : public UpdateBlock {
 public:
  /// Covariance factor of z at the current state, and its scale.
  using FactorFn = std::function<std::pair<const CholFactor*, double>(const ChainState&)>;

  /// `priors` must be Normal or Flat, one per column of `x`.
  CenteredRegressionBlock(int beta_index, int z_index, Eigen::MatrixXd x, const std::vector<Prior>& priors,
                          FactorFn factor, std::string label = "beta|w");

  void update(ChainState& state, Rng& rng) override;
  const std::string& label() const override { return label_; }

  /// True when every prior is Normal or Flat.
  static bool applicable(const std::vector<Prior>& priors);

 private:
  int beta_index_;
  int z_index_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd prior_mean_;
  Eigen::VectorXd prior_precision_;
  FactorFn factor_;
  std::string label_;
};

struct DerivedQuantity {
  std::string name;
  std::function<double(const ChainState&)> value;
};

/// A posterior as a list of update blocks swept in order each iteration.
struct PosteriorProgram {
  ChainState state;
  std::vector<std::unique_ptr<UpdateBlock>> blocks;
  /// State blocks recorded coordinate-wise as scalars.
  std::vector<int> scalar_records;
  /// State blocks recorded whole as latent vectors.
  std::vector<int> latent_records;
  std::vector<DerivedQuantity> derived;
};

struct McmcConfig {
  std::size_t burn_in = 20000;
  std::size_t keep = 20000;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  /// Keep adapting step sizes after burn-in (off: steps freeze at burn-in end).
  bool adapt_after_burn_in = false;
};

struct BlockSummary {
  std::string label;
  double acceptance_rate = 0.0;
  double step_size = 0.0;
};

/// Kept draws of a chain: scalars row-per-draw plus latent vectors.
struct PosteriorChain {
  std::vector<std::string> scalar_names;
  Eigen::MatrixXd scalars;
  std::vector<std::string> latent_names;
  std::vector<Eigen::MatrixXd> latents;
  std::size_t burn_in = 0;
  std::uint64_t seed = 0;
  std::vector<BlockSummary> blocks;

  std::size_t draws() const { return static_cast<std::size_t>(scalars.rows()); }
  bool has_scalar(const std::string& name) const;
  Eigen::VectorXd column(const std::string& name) const;
  bool has_latent(const std::string& name) const;
  const Eigen::MatrixXd& latent(const std::string& name) const;
  double mean(const std::string& name) const;
};

/// Runs burn_in + keep sweeps and records the kept ones. A pure function of
/// (program, config): the only randomness is Rng(config.seed, config.stream).
/// Block failures are rethrown with the iteration index.
PosteriorChain run_chain(PosteriorProgram& program, const McmcConfig& config);

}  // namespace odpp
