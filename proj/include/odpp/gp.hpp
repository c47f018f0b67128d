#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "odpp/grid.hpp"
#include "odpp/rng.hpp"

namespace odpp {

/// Isotropic stationary covariance.
///
///   exponential:          variance * exp(-decay * d)
///   squared-exponential:  variance * exp(-decay * d^2)
///
/// The Higdon kernel fields use the squared-exponential family with unit
/// variance.
struct CovarianceModel {
  enum class Family { Exponential, SquaredExponential };

  Family family = Family::Exponential;
  double variance = 1.0;
  double decay = 1.0;

  static CovarianceModel exponential(double variance, double decay) {
    return {Family::Exponential, variance, decay};
  }
  static CovarianceModel squared_exponential(double decay, double variance = 1.0) {
    return {Family::SquaredExponential, variance, decay};
  }

  double operator()(double distance) const;
  void validate() const;
};

Eigen::MatrixXd cov_matrix(std::span<const Point> points, const CovarianceModel& model);
/// |a| x |b| cross covariance.
Eigen::MatrixXd cross_cov(std::span<const Point> a, std::span<const Point> b,
                          const CovarianceModel& model);

/// Lower Cholesky factor, possibly of a jittered matrix C + jitter * I.
struct CholFactor {
  Eigen::MatrixXd lower;
  double jitter_used = 0.0;

  int size() const { return static_cast<int>(lower.rows()); }
  /// log det(L L^T).
  double log_det() const;
  /// L^{-1} v.
  Eigen::VectorXd half_solve(const Eigen::VectorXd& v) const;
  /// (L L^T)^{-1} v.
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
  /// Factor of s * (L L^T): sqrt(s) * L.
  CholFactor scaled(double s) const;
  Eigen::MatrixXd reconstruct() const { return lower * lower.transpose(); }
};

/// Diagonal jitter multipliers tried in order. The base scale is the mean
/// diagonal of the matrix unless `jitter_scale` is supplied.
struct JitterPolicy {
  std::vector<double> ladder{0.0, 1e-10, 1e-8, 1e-6, 1e-4};
  double jitter_scale = -1.0;
};

/// Throws NumericalError when the matrix is not positive definite even at
/// the largest jitter.
CholFactor chol(const Eigen::MatrixXd& matrix, const JitterPolicy& policy = {});

/// L * eps with eps iid standard normal drawn from `rng`.
Eigen::VectorXd mvn_sample(const CholFactor& factor, Rng& rng);

/// log N(value; 0, scale * L L^T).
double mvn_logpdf(const Eigen::VectorXd& value, const CholFactor& factor, double scale = 1.0);

/// Precomputed simple-kriging operator from fixed training locations to fixed
/// test locations under a fixed covariance model. Applying it to new training
/// values costs O(H m).
class KrigingPredictor {
 public:
  KrigingPredictor(std::span<const Point> train, std::span<const Point> test,
                   const CovarianceModel& model);

  Eigen::VectorXd mean(const Eigen::VectorXd& train_values) const;
  const CholFactor& conditional_factor() const { return cond_factor_; }
  /// Draw from the conditional law given the training values.
  Eigen::VectorXd sample(const Eigen::VectorXd& train_values, Rng& rng) const;

 private:
  CholFactor train_factor_;
  Eigen::MatrixXd weights_;  // H x m
  CholFactor cond_factor_;
};

/// Cholesky factors of the unit-variance correlation matrix over a fixed
/// point set, keyed by decay. Holds the two most recently used decays, which
/// covers the current value and one pending MH proposal. The covariance
/// factor for variance s2 is factor(decay).scaled(s2).
class CorrelationFactorCache {
 public:
  CorrelationFactorCache(std::vector<Point> points, CovarianceModel::Family family);

  /// Reference stays valid until the next call with a third distinct decay.
  const CholFactor& factor(double decay);
  int size() const { return static_cast<int>(points_.size()); }

 private:
  struct Entry {
    double decay = 0.0;
    CholFactor factor;
    std::uint64_t used = 0;
  };
  std::vector<Point> points_;
  CovarianceModel::Family family_;
  std::vector<Entry> entries_;
  std::uint64_t clock_ = 0;
};

struct GpConditional {
  Eigen::VectorXd mean;
  CholFactor cond_factor;
};

GpConditional gp_conditional(std::span<const Point> train, const Eigen::VectorXd& train_values,
                             std::span<const Point> test, const CovarianceModel& model);

}  // namespace odpp
