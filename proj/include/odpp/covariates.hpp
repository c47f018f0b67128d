#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace odpp {

/// Per-cell covariate matrix (K x p) with column names.
///
/// Columns flagged as intercept are left untouched by standardization. After
/// `standardize_covariates` every other column has mean 0 and sample standard
/// deviation 1 (divisor K - 1); `means`/`scales` hold the inverse transform.
struct CovariateTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
  std::vector<bool> intercept;
  bool standardized = false;
  Eigen::VectorXd means;
  Eigen::VectorXd scales;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  /// Index of a named column; throws ConfigError when absent.
  int column(const std::string& name) const;
};

inline const std::string kInterceptName = "(Intercept)";

CovariateTable make_covariate_table(std::vector<std::string> names, Eigen::MatrixXd values);

CovariateTable standardize_covariates(const CovariateTable& table);
Eigen::MatrixXd destandardize(const CovariateTable& table);

/// K x (1 + |columns|) design matrix: an intercept column followed by the
/// named columns in the given order.
Eigen::MatrixXd design_matrix(const CovariateTable& table, const std::vector<std::string>& columns);

/// Intercept-only design for K cells.
Eigen::MatrixXd intercept_design(int k_cells);

}  // namespace odpp
