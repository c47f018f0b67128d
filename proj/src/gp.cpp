#include "odpp/gp.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "odpp/errors.hpp"

namespace odpp {

double CovarianceModel::operator()(double distance) const {
  switch (family) {
    case Family::Exponential:
      return variance * std::exp(-decay * distance);
    case Family::SquaredExponential:
      return variance * std::exp(-decay * distance * distance);
  }
  return 0.0;
}

void CovarianceModel::validate() const {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw NumericalError("covariance variance must be positive");
  }
  if (!(decay > 0.0) || !std::isfinite(decay)) {
    throw NumericalError("covariance decay must be positive");
  }
}

Eigen::MatrixXd cov_matrix(std::span<const Point> points, const CovarianceModel& model) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!points[i].allFinite()) throw NumericalError("nonfinite point in covariance input");
    c(i, i) = model.variance;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = model((points[i] - points[j]).norm());
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

Eigen::MatrixXd cross_cov(std::span<const Point> a, std::span<const Point> b,
                          const CovarianceModel& model) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = model((a[i] - b[j]).norm());
    }
  }
  return c;
}

double CholFactor::log_det() const { return 2.0 * lower.diagonal().array().log().sum(); }

Eigen::VectorXd CholFactor::half_solve(const Eigen::VectorXd& v) const {
  return lower.triangularView<Eigen::Lower>().solve(v);
}

Eigen::VectorXd CholFactor::solve(const Eigen::VectorXd& v) const {
  Eigen::VectorXd w = half_solve(v);
  return lower.transpose().triangularView<Eigen::Upper>().solve(w);
}

CholFactor CholFactor::scaled(double s) const { return {std::sqrt(s) * lower, jitter_used * s}; }

CholFactor chol(const Eigen::MatrixXd& matrix, const JitterPolicy& policy) {
  if (matrix.rows() != matrix.cols()) throw DimensionError("chol: matrix is not square");
  const auto n = matrix.rows();
  if (n == 0) return {Eigen::MatrixXd(0, 0), 0.0};
  if (!matrix.allFinite()) throw NumericalError("chol: matrix has nonfinite entries");
  double scale = policy.jitter_scale;
  if (!(scale > 0.0)) scale = std::abs(matrix.diagonal().mean());
  if (!(scale > 0.0)) scale = 1.0;
  for (double rung : policy.ladder) {
    const double jitter = rung * scale;
    Eigen::MatrixXd work = matrix;
    work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd l = llt.matrixL();
    if (!l.allFinite() || !(l.diagonal().minCoeff() > 0.0)) continue;
    return {std::move(l), jitter};
  }
  throw NumericalError("chol: matrix of size " + std::to_string(n) +
                       " is not positive definite at the largest jitter");
}

Eigen::VectorXd mvn_sample(const CholFactor& factor, Rng& rng) {
  Eigen::VectorXd eps(factor.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  return factor.lower.triangularView<Eigen::Lower>() * eps;
}

double mvn_logpdf(const Eigen::VectorXd& value, const CholFactor& factor, double scale) {
  if (value.size() != factor.size()) throw DimensionError("mvn_logpdf: dimension mismatch");
  const double k = static_cast<double>(value.size());
  const Eigen::VectorXd w = factor.half_solve(value);
  return -0.5 * k * std::log(2.0 * std::numbers::pi * scale) - 0.5 * factor.log_det() -
         0.5 * w.squaredNorm() / scale;
}

KrigingPredictor::KrigingPredictor(std::span<const Point> train, std::span<const Point> test,
                                   const CovarianceModel& model) {
  model.validate();
  train_factor_ = chol(cov_matrix(train, model));
  const Eigen::MatrixXd cross = cross_cov(train, test, model);  // m x H
  // V = L^{-1} K_*, conditional covariance K_** - V^T V.
  const Eigen::MatrixXd v = train_factor_.lower.triangularView<Eigen::Lower>().solve(cross);
  weights_ = train_factor_.lower.transpose()
                 .triangularView<Eigen::Upper>()
                 .solve(v)
                 .transpose();
  Eigen::MatrixXd cond = cov_matrix(test, model) - v.transpose() * v;
  cond = 0.5 * (cond + cond.transpose());
  JitterPolicy policy;
  policy.jitter_scale = model.variance;
  cond_factor_ = chol(cond, policy);
}

Eigen::VectorXd KrigingPredictor::mean(const Eigen::VectorXd& train_values) const {
  if (train_values.size() != weights_.cols()) {
    throw DimensionError("kriging: training value count does not match training points");
  }
  return weights_ * train_values;
}

Eigen::VectorXd KrigingPredictor::sample(const Eigen::VectorXd& train_values, Rng& rng) const {
  return mean(train_values) + mvn_sample(cond_factor_, rng);
}

GpConditional gp_conditional(std::span<const Point> train, const Eigen::VectorXd& train_values,
                             std::span<const Point> test, const CovarianceModel& model) {
  KrigingPredictor predictor(train, test, model);
  return {predictor.mean(train_values), predictor.conditional_factor()};
}

CorrelationFactorCache::CorrelationFactorCache(std::vector<Point> points,
                                               CovarianceModel::Family family)
    : points_(std::move(points)), family_(family) {
  entries_.reserve(2);
}

const CholFactor& CorrelationFactorCache::factor(double decay) {
  ++clock_;
  for (auto& e : entries_) {
    if (e.decay == decay) {
      e.used = clock_;
      return e.factor;
    }
  }
  CovarianceModel model{family_, 1.0, decay};
  model.validate();
  Entry fresh{decay, chol(cov_matrix(points_, model)), clock_};
  if (entries_.size() < 2) {
    entries_.push_back(std::move(fresh));
    return entries_.back().factor;
  }
  auto& victim = entries_[0].used <= entries_[1].used ? entries_[0] : entries_[1];
  victim = std::move(fresh);
  return victim.factor;
}

}  // namespace odpp
