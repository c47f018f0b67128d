#include "odpp/covariates.hpp"

#include <cmath>

#include "odpp/errors.hpp"

namespace odpp {

int CovariateTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return static_cast<int>(j);
  }
  throw ConfigError("unknown covariate '" + name + "'");
}

CovariateTable make_covariate_table(std::vector<std::string> names, Eigen::MatrixXd values) {
  if (static_cast<Eigen::Index>(names.size()) != values.cols()) {
    throw DimensionError("covariate names and columns differ in count");
  }
  CovariateTable t;
  t.intercept.resize(names.size());
  for (std::size_t j = 0; j < names.size(); ++j) t.intercept[j] = names[j] == kInterceptName;
  t.names = std::move(names);
  t.values = std::move(values);
  t.means = Eigen::VectorXd::Zero(t.values.cols());
  t.scales = Eigen::VectorXd::Ones(t.values.cols());
  return t;
}

CovariateTable standardize_covariates(const CovariateTable& table) {
  CovariateTable out = table;
  const Eigen::Index k = table.values.rows();
  out.means = Eigen::VectorXd::Zero(table.values.cols());
  out.scales = Eigen::VectorXd::Ones(table.values.cols());
  for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
    if (table.intercept[j]) continue;
    if (k < 2) throw DataError("standardization needs at least two cells");
    const auto col = table.values.col(j);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / static_cast<double>(k - 1);
    if (!(var > 0.0)) {
      throw DataError("covariate '" + table.names[j] + "' has zero variance");
    }
    const double sd = std::sqrt(var);
    out.values.col(j) = (col.array() - mean) / sd;
    out.means[j] = mean;
    out.scales[j] = sd;
  }
  out.standardized = true;
  return out;
}

Eigen::MatrixXd destandardize(const CovariateTable& table) {
  Eigen::MatrixXd raw = table.values;
  if (!table.standardized) return raw;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    raw.col(j) = raw.col(j).array() * table.scales[j] + table.means[j];
  }
  return raw;
}

Eigen::MatrixXd design_matrix(const CovariateTable& table, const std::vector<std::string>& columns) {
  Eigen::MatrixXd x(table.rows(), static_cast<Eigen::Index>(columns.size()) + 1);
  x.col(0).setOnes();
  for (std::size_t j = 0; j < columns.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j) + 1) = table.values.col(table.column(columns[j]));
  }
  return x;
}

Eigen::MatrixXd intercept_design(int k_cells) { return Eigen::MatrixXd::Ones(k_cells, 1); }

}  // namespace odpp
