#include "odpp/conditional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <string>

#include "odpp/errors.hpp"
#include "odpp/gp.hpp"

namespace odpp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogPi = std::log(std::numbers::pi);

// Second moments of d = s_r - s_t for a group of pairs.
struct Moments {
  double count = 0.0;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;

  void add(const Point& d) {
    count += 1.0;
    sxx += d.x() * d.x();
    sxy += d.x() * d.y();
    syy += d.y() * d.y();
  }
};

// sum over the group of cond_logdensity under one kernel.
double group_loglik(const Moments& m, const Eigen::Matrix2d& s) {
  if (m.count == 0.0) return 0.0;
  const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  if (!(s(0, 0) > 0.0) || !(det > 0.0) || !std::isfinite(det)) return kNegInf;
  const double trace = (s(1, 1) * m.sxx - 2.0 * s(0, 1) * m.sxy + s(0, 0) * m.syy) / det;
  return -m.count * kLogPi - 0.5 * m.count * std::log(det) - trace;
}

struct CompletePairs {
  std::vector<Point> thefts;
  std::vector<Point> deltas;
};

CompletePairs complete_pairs(const PairedPattern& pairs) {
  CompletePairs c;
  for (std::size_t i : pairs.complete_indices()) {
    const Point& t = pairs.thefts[i];
    const Point& r = *pairs.recoveries[i];
    if (!t.allFinite() || !r.allFinite()) {
      throw DataError("pair " + std::to_string(i) + " has a nonfinite coordinate");
    }
    c.thefts.push_back(t);
    c.deltas.push_back(r - t);
  }
  return c;
}

GridSpec auto_anchor_grid(const PairedPattern& pairs, int cells) {
  BBox b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
         std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  auto extend = [&b](const Point& p) {
    b.xmin = std::min(b.xmin, p.x());
    b.xmax = std::max(b.xmax, p.x());
    b.ymin = std::min(b.ymin, p.y());
    b.ymax = std::max(b.ymax, p.y());
  };
  for (const auto& t : pairs.thefts) extend(t);
  for (const auto& r : pairs.recoveries) {
    if (r) extend(*r);
  }
  const double w = std::max(b.width(), 1e-9);
  const double h = std::max(b.height(), 1e-9);
  const int nx = std::max(1, static_cast<int>(std::lround(std::sqrt(cells * w / h))));
  const int ny = std::max(1, (cells + nx - 1) / nx);
  b.xmax = b.xmin + w;
  b.ymax = b.ymin + h;
  return build_regular_grid(b, nx, ny);
}

Eigen::Matrix2d cholesky_half(const Eigen::Matrix2d& sigma) {
  const double l11 = std::sqrt(0.5 * sigma(0, 0));
  const double l21 = 0.5 * sigma(1, 0) / l11;
  const double l22 = std::sqrt(std::max(0.0, 0.5 * sigma(1, 1) - l21 * l21));
  Eigen::Matrix2d l;
  l << l11, 0.0, l21, l22;
  return l;
}

}  // namespace

Eigen::Matrix2d sigma_from_psi(double psi_x, double psi_y, double sigma, double a) {
  const double r2 = psi_x * psi_x + psi_y * psi_y;
  const double pi = std::numbers::pi;
  const double x = std::sqrt(4.0 * a * a + r2 * r2 * pi * pi) / (2.0 * pi);
  const double y = 0.5 * r2;
  // X - Y = (A / pi)^2 / (X + Y), avoiding cancellation for large |psi|.
  const double major = x + y;
  const double minor = (a / pi) * (a / pi) / major;
  const double alpha = std::atan2(psi_y, psi_x);
  const double c = std::cos(alpha);
  const double s = std::sin(alpha);
  // M = sigma diag(sqrt(major), sqrt(minor)) R(alpha); Sigma = M^T M puts the
  // major axis along direction alpha.
  const double s2 = sigma * sigma;
  Eigen::Matrix2d out;
  out(0, 0) = s2 * (major * c * c + minor * s * s);
  out(1, 1) = s2 * (major * s * s + minor * c * c);
  out(0, 1) = s2 * (major - minor) * c * s;
  out(1, 0) = out(0, 1);
  return out;
}

Eigen::Matrix2d sigma_constant(double sigma1, double sigma2, double rho) {
  Eigen::Matrix2d s;
  s << sigma1 * sigma1, rho * sigma1 * sigma2, rho * sigma1 * sigma2, sigma2 * sigma2;
  return s;
}

double cond_logdensity(const Point& s_r, const Point& s_t, const Eigen::Matrix2d& sigma) {
  Moments m;
  m.add(s_r - s_t);
  return group_loglik(m, sigma);
}

Point sample_recovery(const Point& s_t, const Eigen::Matrix2d& sigma, Rng& rng) {
  const Eigen::Matrix2d l = cholesky_half(sigma);
  const double e1 = rng.normal();
  const double e2 = rng.normal();
  return s_t + l * Point(e1, e2);
}

Eigen::Matrix2d ConditionalFit::sigma_at(std::size_t draw, std::size_t anchor) const {
  const auto row = static_cast<Eigen::Index>(draw);
  if (kind == KernelKind::Constant) {
    const double s1 = chain.column("sigma1")[row];
    const double s2 = chain.column("sigma2")[row];
    return sigma_constant(s1, s2, chain.column("rho")[row]);
  }
  const auto col = static_cast<Eigen::Index>(anchor);
  return sigma_from_psi(chain.latent("psi_x")(row, col), chain.latent("psi_y")(row, col),
                        chain.column("sigma")[row], higdon_a);
}

double conditional_loglik(const PairedPattern& pairs, const std::vector<Eigen::Matrix2d>& kernels) {
  const auto idx = pairs.complete_indices();
  if (kernels.size() != idx.size()) throw DimensionError("one kernel per complete pair required");
  double total = 0.0;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    total += cond_logdensity(*pairs.recoveries[idx[j]], pairs.thefts[idx[j]], kernels[j]);
  }
  return total;
}

ConditionalFit fit_conditional_constant(const PairedPattern& pairs, const PriorSpec& priors,
                                        const McmcConfig& config) {
  const CompletePairs data = complete_pairs(pairs);
  if (data.deltas.size() < 3) throw DataError("constant kernel fit needs at least 3 complete pairs");
  auto moments = std::make_shared<Moments>();
  for (const auto& d : data.deltas) moments->add(d);

  // Moment start: Sigma = 2 E[d d^T].
  const double vx = std::max(2.0 * moments->sxx / moments->count, 1e-6);
  const double vy = std::max(2.0 * moments->syy / moments->count, 1e-6);
  const double r0 = std::clamp(2.0 * moments->sxy / moments->count / std::sqrt(vx * vy), -0.9, 0.9);

  PosteriorProgram prog;
  const int i1 = prog.state.add("sigma1_sq", Eigen::VectorXd::Constant(1, vx));
  const int i2 = prog.state.add("sigma2_sq", Eigen::VectorXd::Constant(1, vy));
  const int ir = prog.state.add("rho", Eigen::VectorXd::Constant(1, r0));

  auto loglik = [moments, i1, i2, ir](const ChainState& s) {
    return group_loglik(*moments,
                        sigma_constant(std::sqrt(s[i1][0]), std::sqrt(s[i2][0]), s[ir][0]));
  };
  const Prior ig = InverseGamma{2.0, 0.1};
  prog.blocks.push_back(std::make_unique<MhBlock>(
      i1, "sigma1_sq", std::vector<Prior>{prior_or(priors, "sigma1_sq", ig)}, loglik, 0.5));
  prog.blocks.push_back(std::make_unique<MhBlock>(
      i2, "sigma2_sq", std::vector<Prior>{prior_or(priors, "sigma2_sq", ig)}, loglik, 0.5));
  prog.blocks.push_back(std::make_unique<MhBlock>(
      ir, "rho", std::vector<Prior>{prior_or(priors, "rho", Uniform{-1.0, 1.0})}, loglik, 0.5));
  prog.scalar_records = {i1, i2, ir};
  prog.derived.push_back({"sigma1", [i1](const ChainState& s) { return std::sqrt(s[i1][0]); }});
  prog.derived.push_back({"sigma2", [i2](const ChainState& s) { return std::sqrt(s[i2][0]); }});
  prog.derived.push_back({"loglik", loglik});

  ConditionalFit fit;
  fit.kind = KernelKind::Constant;
  fit.chain = run_chain(prog, config);
  return fit;
}

ConditionalFit fit_conditional_spatial(const PairedPattern& pairs, const SpatialKernelSpec& spec,
                                       const PriorSpec& priors, const McmcConfig& config) {
  if (!(spec.phi_star > 0.0)) throw ConfigError("phi_star must be positive");
  if (!(spec.higdon_a > 0.0)) throw ConfigError("Higdon A must be positive");
  const CompletePairs data = complete_pairs(pairs);
  const std::size_t m = data.deltas.size();
  if (m < 3) throw DataError("spatial kernel fit needs at least 3 complete pairs");

  AnchorMode mode = spec.anchors;
  if (mode == AnchorMode::Auto) mode = m > spec.auto_threshold ? AnchorMode::Grid : AnchorMode::TheftPoints;

  std::vector<Point> anchors;
  std::vector<int> anchor_of(m);
  if (mode == AnchorMode::TheftPoints) {
    std::map<std::pair<double, double>, int> seen;
    for (std::size_t j = 0; j < m; ++j) {
      const auto key = std::make_pair(data.thefts[j].x(), data.thefts[j].y());
      auto it = seen.find(key);
      if (it == seen.end()) {
        it = seen.emplace(key, static_cast<int>(anchors.size())).first;
        anchors.push_back(data.thefts[j]);
      }
      anchor_of[j] = it->second;
    }
  } else {
    const GridSpec grid = spec.grid ? *spec.grid : auto_anchor_grid(pairs, spec.auto_grid_cells);
    anchors = grid.representative_list();
    for (std::size_t j = 0; j < m; ++j) anchor_of[j] = grid.nearest_cell(data.thefts[j]);
  }

  auto groups = std::make_shared<std::vector<Moments>>(anchors.size());
  Moments all;
  for (std::size_t j = 0; j < m; ++j) {
    (*groups)[static_cast<std::size_t>(anchor_of[j])].add(data.deltas[j]);
    all.add(data.deltas[j]);
  }

  const auto factor = std::make_shared<const CholFactor>(
      chol(cov_matrix(anchors, CovarianceModel::squared_exponential(spec.phi_star))));

  // det Cov(d) = det(Sigma) / 4 = sigma^4 A^2 / (4 pi^2).
  const double cxx = all.sxx / all.count;
  const double cyy = all.syy / all.count;
  const double cxy = all.sxy / all.count;
  const double det_d = std::max(cxx * cyy - cxy * cxy, 1e-12);
  const double sigma2_start =
      std::sqrt(4.0 * det_d) * std::numbers::pi / spec.higdon_a;

  const auto n_anchor = static_cast<Eigen::Index>(anchors.size());
  PosteriorProgram prog;
  const int ix = prog.state.add("psi_x", Eigen::VectorXd::Zero(n_anchor));
  const int iy = prog.state.add("psi_y", Eigen::VectorXd::Zero(n_anchor));
  const int is = prog.state.add("sigma2", Eigen::VectorXd::Constant(1, sigma2_start));

  const double a = spec.higdon_a;
  auto loglik = [groups, ix, iy, is, a](const ChainState& s) {
    const double sigma = std::sqrt(s[is][0]);
    const Eigen::VectorXd& px = s[ix];
    const Eigen::VectorXd& py = s[iy];
    double total = 0.0;
    for (std::size_t g = 0; g < groups->size(); ++g) {
      const Moments& mom = (*groups)[g];
      if (mom.count == 0.0) continue;
      const auto k = static_cast<Eigen::Index>(g);
      total += group_loglik(mom, sigma_from_psi(px[k], py[k], sigma, a));
    }
    return total;
  };
  auto prior_draw = [factor](const ChainState&, Rng& rng) { return mvn_sample(*factor, rng); };

  prog.blocks.push_back(std::make_unique<EssBlock>(ix, "psi_x", prior_draw, loglik));
  prog.blocks.push_back(std::make_unique<EssBlock>(iy, "psi_y", prior_draw, loglik));
  prog.blocks.push_back(std::make_unique<MhBlock>(
      is, "sigma2", std::vector<Prior>{prior_or(priors, "sigma2", InverseGamma{2.0, 0.1})}, loglik,
      0.5));
  prog.scalar_records = {is};
  prog.latent_records = {ix, iy};
  prog.derived.push_back({"sigma", [is](const ChainState& s) { return std::sqrt(s[is][0]); }});
  prog.derived.push_back({"loglik", loglik});

  ConditionalFit fit;
  fit.kind = KernelKind::Spatial;
  fit.anchors = std::move(anchors);
  fit.phi_star = spec.phi_star;
  fit.higdon_a = spec.higdon_a;
  fit.chain = run_chain(prog, config);
  return fit;
}

RecoveryPrediction predict_recovery(const ConditionalFit& fit, const std::vector<Point>& test_thefts,
                                    Rng& rng, const PredictOptions& options) {
  if (options.stride < 1) throw ConfigError("prediction stride must be at least 1");
  const std::size_t draws = fit.chain.draws();
  if (draws == 0) throw DataError("prediction needs at least one posterior draw");
  std::vector<std::size_t> used;
  for (std::size_t d = 0; d < draws; d += options.stride) used.push_back(d);
  const auto n_used = static_cast<Eigen::Index>(used.size());
  const std::size_t h = test_thefts.size();

  RecoveryPrediction out;
  out.thefts = test_thefts;
  out.samples.assign(h, Eigen::MatrixX2d(n_used, 2));
  out.kernels.assign(h, Eigen::MatrixX3d(n_used, 3));

  auto record = [&](std::size_t t, Eigen::Index l, const Eigen::Matrix2d& sigma) {
    out.kernels[t].row(l) << sigma(0, 0), sigma(0, 1), sigma(1, 1);
    out.samples[t].row(l) = sample_recovery(test_thefts[t], sigma, rng).transpose();
  };

  if (fit.kind == KernelKind::Constant) {
    const Eigen::VectorXd s1 = fit.chain.column("sigma1");
    const Eigen::VectorXd s2 = fit.chain.column("sigma2");
    const Eigen::VectorXd rho = fit.chain.column("rho");
    for (Eigen::Index l = 0; l < n_used; ++l) {
      const auto d = static_cast<Eigen::Index>(used[static_cast<std::size_t>(l)]);
      const Eigen::Matrix2d sigma = sigma_constant(s1[d], s2[d], rho[d]);
      for (std::size_t t = 0; t < h; ++t) record(t, l, sigma);
    }
    return out;
  }

  // Marginal kriging weights and conditional sds, unit-variance field.
  const auto model = CovarianceModel::squared_exponential(fit.phi_star);
  const CholFactor train = chol(cov_matrix(fit.anchors, model));
  const Eigen::MatrixXd cross = cross_cov(fit.anchors, test_thefts, model);
  const Eigen::MatrixXd v = train.lower.triangularView<Eigen::Lower>().solve(cross);
  const Eigen::MatrixXd weights =
      train.lower.transpose().triangularView<Eigen::Upper>().solve(v).transpose();
  Eigen::VectorXd cond_sd(static_cast<Eigen::Index>(h));
  for (Eigen::Index t = 0; t < cond_sd.size(); ++t) {
    cond_sd[t] = std::sqrt(std::max(0.0, 1.0 - v.col(t).squaredNorm()));
  }

  const Eigen::MatrixXd& psi_x = fit.chain.latent("psi_x");
  const Eigen::MatrixXd& psi_y = fit.chain.latent("psi_y");
  const Eigen::VectorXd sigma = fit.chain.column("sigma");
  for (Eigen::Index l = 0; l < n_used; ++l) {
    const auto d = static_cast<Eigen::Index>(used[static_cast<std::size_t>(l)]);
    const Eigen::VectorXd mx = weights * psi_x.row(d).transpose();
    const Eigen::VectorXd my = weights * psi_y.row(d).transpose();
    for (std::size_t t = 0; t < h; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      const double px = mx[ti] + cond_sd[ti] * rng.normal();
      const double py = my[ti] + cond_sd[ti] * rng.normal();
      record(t, l, sigma_from_psi(px, py, sigma[d], fit.higdon_a));
    }
  }
  return out;
}

double bicrps(const Eigen::MatrixX2d& samples, const Point& observed) {
  const Eigen::Index l = samples.rows();
  if (l < 1) throw DataError("bicrps needs at least one sample");
  double first = 0.0;
  for (Eigen::Index i = 0; i < l; ++i) first += (samples.row(i).transpose() - observed).norm();
  double pair_sum = 0.0;
  for (Eigen::Index i = 0; i < l; ++i) {
    for (Eigen::Index j = i + 1; j < l; ++j) pair_sum += (samples.row(i) - samples.row(j)).norm();
  }
  const double ld = static_cast<double>(l);
  // The full double sum counts every unordered pair twice.
  return first / ld - pair_sum / (ld * ld);
}

Eigen::VectorXd predictive_density(const RecoveryPrediction& prediction, std::size_t index,
                                   const std::vector<Point>& points) {
  if (index >= prediction.kernels.size()) throw DimensionError("test point index out of range");
  const Eigen::MatrixX3d& k = prediction.kernels[index];
  const Point& theft = prediction.thefts[index];
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(points.size()));
  if (k.rows() == 0) return out;
  for (Eigen::Index l = 0; l < k.rows(); ++l) {
    Eigen::Matrix2d sigma;
    sigma << k(l, 0), k(l, 1), k(l, 1), k(l, 2);
    for (std::size_t p = 0; p < points.size(); ++p) {
      out[static_cast<Eigen::Index>(p)] += std::exp(cond_logdensity(points[p], theft, sigma));
    }
  }
  return out / static_cast<double>(k.rows());
}

HoldoutSplit holdout_pairs(const PairedPattern& pairs, std::size_t h, Rng& rng) {
  std::vector<std::size_t> idx = pairs.complete_indices();
  if (h >= idx.size()) throw ConfigError("holdout size must be smaller than the number of complete pairs");
  for (std::size_t i = 0; i < h; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  HoldoutSplit split;
  split.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(h));
  split.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(h), idx.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::size_t default_holdout_size(std::size_t complete_pairs) {
  if (complete_pairs > 1000) return complete_pairs / 2;
  return std::min<std::size_t>(80, complete_pairs / 2);
}

}  // namespace odpp
