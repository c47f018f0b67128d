#include "odpp/model_select.hpp"

#include <cmath>
#include <algorithm>
#include <limits>
#include <tuple>

#include "odpp/errors.hpp"

namespace odpp {

namespace {

constexpr int kMaxIterations = 100;
constexpr double kDevianceTol = 1e-10;
constexpr double kScoreTol = 1e-8;

double poisson_deviance(const Eigen::VectorXd& n, const Eigen::VectorXd& mu) {
  double d = 0.0;
  for (Eigen::Index k = 0; k < n.size(); ++k) {
    if (n[k] > 0.0) d += n[k] * std::log(n[k] / mu[k]);
    d -= n[k] - mu[k];
  }
  return 2.0 * d;
}

double poisson_loglik(const Eigen::VectorXd& n, const Eigen::VectorXd& eta) {
  double ll = 0.0;
  for (Eigen::Index k = 0; k < n.size(); ++k) {
    ll += n[k] * eta[k] - std::exp(eta[k]) - std::lgamma(n[k] + 1.0);
  }
  return ll;
}

Eigen::VectorXd weighted_ls(const Eigen::MatrixXd& x, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& z) {
  const Eigen::VectorXd sw = w.array().sqrt();
  const Eigen::MatrixXd xw = sw.asDiagonal() * x;
  return xw.householderQr().solve(Eigen::VectorXd(sw.cwiseProduct(z)));
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, const std::vector<int>& cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(cols[j]);
  return out;
}

}  // namespace

GlmFit poisson_glm(const Eigen::VectorXi& counts, const Eigen::MatrixXd& x,
                   const Eigen::VectorXd& offset) {
  const Eigen::Index k = x.rows();
  const Eigen::Index p = x.cols();
  if (counts.size() != k || offset.size() != k) {
    throw DimensionError("counts, design rows and offset must have equal length");
  }
  if (p < 1 || p >= k) throw DataError("Poisson GLM needs 1 <= p < K");
  if ((counts.array() < 0).any()) throw DataError("counts must be nonnegative");
  if (!x.allFinite() || !offset.allFinite()) throw DataError("design and offset must be finite");
  if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(x).rank() < p) {
    throw DataError("design matrix is rank deficient");
  }

  const Eigen::VectorXd n = counts.cast<double>();
  GlmFit fit;
  if (n.sum() == 0.0) {
    fit.coefficients = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    fit.loglik = 0.0;
    fit.deviance = 0.0;
    fit.boundary = true;
    return fit;
  }

  // Standard start: mu = n + 0.1, one weighted LS solve for beta.
  Eigen::VectorXd mu = n.array() + 0.1;
  Eigen::VectorXd eta = mu.array().log();
  Eigen::VectorXd beta = weighted_ls(x, mu, Eigen::VectorXd(eta - offset));
  eta = offset + x * beta;
  mu = eta.array().exp();
  double dev = poisson_deviance(n, mu);

  for (int it = 1; it <= kMaxIterations; ++it) {
    const Eigen::VectorXd z = (eta - offset).array() + (n - mu).array() / mu.array();
    Eigen::VectorXd next = weighted_ls(x, mu, z);
    Eigen::VectorXd next_eta = offset + x * next;
    Eigen::VectorXd next_mu = next_eta.array().exp();
    double next_dev = poisson_deviance(n, next_mu);
    for (int half = 0; half < 30 && !(std::isfinite(next_dev) && next_dev <= dev * (1.0 + 1e-12) + 1e-12);
         ++half) {
      next = 0.5 * (next + beta);
      next_eta = offset + x * next;
      next_mu = next_eta.array().exp();
      next_dev = poisson_deviance(n, next_mu);
    }
    if (!std::isfinite(next_dev)) break;
    const double change = std::abs(next_dev - dev) / (std::abs(next_dev) + 0.1);
    beta = next;
    eta = next_eta;
    mu = next_mu;
    dev = next_dev;
    fit.iterations = it;
    const double score = (x.transpose() * (n - mu)).cwiseAbs().maxCoeff();
    if (change < kDevianceTol && score <= kScoreTol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    throw NumericalError("Poisson IRLS did not converge in " + std::to_string(kMaxIterations) +
                         " iterations");
  }
  fit.coefficients = beta;
  fit.deviance = dev;
  fit.loglik = poisson_loglik(n, eta);
  return fit;
}

double bic(const GlmFit& fit, int model_size, double n_points) {
  return -2.0 * fit.loglik + static_cast<double>(model_size) * std::log(n_points);
}

StepwiseResult stepwise_bic(const Eigen::VectorXi& counts, const Eigen::MatrixXd& x_full,
                            const std::vector<std::string>& names, const Eigen::VectorXd& offset) {
  const auto p = static_cast<int>(x_full.cols());
  if (p < 1) throw DimensionError("design needs an intercept column");
  if (static_cast<int>(names.size()) != p) throw DimensionError("one name per design column required");
  const double n_points = counts.cast<double>().sum();
  if (!(n_points > 0.0)) throw DataError("stepwise selection needs at least one point");

  auto evaluate = [&](const std::vector<int>& cols) {
    GlmFit f = poisson_glm(counts, select_columns(x_full, cols), offset);
    return std::make_pair(f, bic(f, static_cast<int>(cols.size()), n_points));
  };

  StepwiseResult result;
  result.columns = {0};
  std::tie(result.fit, result.bic) = evaluate(result.columns);
  result.trace.push_back({"start", result.columns, result.bic});

  for (;;) {
    int best_col = -1;
    double best_bic = result.bic;
    GlmFit best_fit;
    std::vector<int> best_cols;
    for (int j = 1; j < p; ++j) {
      std::vector<int> cols;
      bool present = false;
      for (int c : result.columns) {
        if (c == j) {
          present = true;
        } else {
          cols.push_back(c);
        }
      }
      if (!present) {
        cols.push_back(j);
        std::sort(cols.begin(), cols.end());
      }
      auto [f, b] = evaluate(cols);
      if (b < best_bic) {
        best_bic = b;
        best_col = j;
        best_fit = f;
        best_cols = cols;
      }
    }
    if (best_col < 0) break;
    const bool added = best_cols.size() > result.columns.size();
    result.columns = best_cols;
    result.fit = best_fit;
    result.bic = best_bic;
    result.trace.push_back({(added ? "+" : "-") + names[static_cast<std::size_t>(best_col)],
                            result.columns, result.bic});
  }
  for (int c : result.columns) result.names.push_back(names[static_cast<std::size_t>(c)]);
  return result;
}

}  // namespace odpp
