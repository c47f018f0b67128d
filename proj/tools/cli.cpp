#include "cli.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "odpp/conditional.hpp"
#include "odpp/covariates.hpp"
#include "odpp/diagnostics.hpp"
#include "odpp/errors.hpp"
#include "odpp/gp.hpp"
#include "odpp/grid.hpp"
#include "odpp/io.hpp"
#include "odpp/joint.hpp"
#include "odpp/mcmc.hpp"
#include "odpp/model_select.hpp"
#include "odpp/ppm.hpp"
#include "odpp/priors.hpp"
#include "odpp/rng.hpp"
#include "odpp/simulate.hpp"
#include "odpp/validation.hpp"

namespace odpp::cli {

namespace fs = std::filesystem;

namespace {

// Rng streams, one per purpose, so adding a step elsewhere never shifts the
// random numbers a given step sees.
constexpr std::uint64_t kStreamSplit = 1;
constexpr std::uint64_t kStreamPredict = 2;
constexpr std::uint64_t kStreamRegions = 3;
constexpr std::uint64_t kStreamSimulate = 4;
constexpr std::uint64_t kStreamChain = 100;

Config prior_json(const Prior& p) {
  return std::visit(
      [](const auto& v) -> Config {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, InverseGamma>) {
          return {{"type", "inverse_gamma"}, {"shape", v.shape}, {"scale", v.scale}};
        } else if constexpr (std::is_same_v<T, Normal>) {
          return {{"type", "normal"}, {"mean", v.mean}, {"variance", v.variance}};
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return {{"type", "uniform"}, {"lo", v.lo}, {"hi", v.hi}};
        } else {
          return {{"type", "flat"}};
        }
      },
      p);
}

bool same_kind(const Config& a, const Config& b) {
  if (a.is_null() || b.is_null()) return true;
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

void merge_into(Config& base, const Config& user, const std::string& path, bool free_keys) {
  for (const auto& [key, value] : user.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) {
      if (!free_keys) throw ConfigError("unknown configuration key '" + here + "'");
      base[key] = value;
      continue;
    }
    Config& slot = base[key];
    if (!same_kind(slot, value)) {
      throw ConfigError("configuration key '" + here + "' expects a " + std::string(slot.type_name()) +
                        ", got a " + std::string(value.type_name()));
    }
    if (slot.is_object() && value.is_object()) {
      merge_into(slot, value, here, free_keys || key == "priors");
    } else {
      slot = value;
    }
  }
}

// --- typed config access -----------------------------------------------------

const Config& node(const Config& cfg, const std::string& path) {
  const Config* cur = &cfg;
  std::istringstream in(path);
  std::string part;
  while (std::getline(in, part, '.')) {
    if (!cur->is_object() || !cur->contains(part)) throw ConfigError("missing configuration key '" + path + "'");
    cur = &(*cur)[part];
  }
  return *cur;
}

double num(const Config& cfg, const std::string& path) {
  const Config& v = node(cfg, path);
  if (!v.is_number()) throw ConfigError("'" + path + "' must be a number");
  return v.get<double>();
}

long long integer(const Config& cfg, const std::string& path) {
  const Config& v = node(cfg, path);
  if (!v.is_number_integer()) throw ConfigError("'" + path + "' must be an integer");
  return v.get<long long>();
}

std::size_t count(const Config& cfg, const std::string& path) {
  const long long v = integer(cfg, path);
  if (v < 0) throw ConfigError("'" + path + "' must be nonnegative");
  return static_cast<std::size_t>(v);
}

std::string str(const Config& cfg, const std::string& path) {
  const Config& v = node(cfg, path);
  if (!v.is_string()) throw ConfigError("'" + path + "' must be a string");
  return v.get<std::string>();
}

bool boolean(const Config& cfg, const std::string& path) {
  const Config& v = node(cfg, path);
  if (!v.is_boolean()) throw ConfigError("'" + path + "' must be true or false");
  return v.get<bool>();
}

std::vector<std::string> strings(const Config& cfg, const std::string& path) {
  const Config& v = node(cfg, path);
  std::vector<std::string> out;
  if (!v.is_array()) throw ConfigError("'" + path + "' must be an array of strings");
  for (const auto& e : v) {
    if (!e.is_string()) throw ConfigError("'" + path + "' must be an array of strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::vector<double> numbers(const Config& cfg, const std::string& path) {
  const Config& v = node(cfg, path);
  std::vector<double> out;
  if (!v.is_array()) throw ConfigError("'" + path + "' must be an array of numbers");
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError("'" + path + "' must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> ints(const Config& v, const std::string& path) {
  std::vector<int> out;
  if (!v.is_array()) throw ConfigError("'" + path + "' must be an array of integers");
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw ConfigError("'" + path + "' must be an array of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

std::string choice(const Config& cfg, const std::string& path, const std::vector<std::string>& allowed) {
  const std::string v = str(cfg, path);
  if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw ConfigError("'" + path + "' must be one of " + list + "; got '" + v + "'");
  }
  return v;
}

Prior parse_prior(const Config& j, const std::string& path) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw ConfigError("prior '" + path + "' needs a string 'type'");
  }
  const std::string type = j["type"].get<std::string>();
  auto field = [&](const char* name) {
    if (!j.contains(name) || !j[name].is_number()) {
      throw ConfigError("prior '" + path + "' needs a numeric '" + name + "'");
    }
    return j[name].get<double>();
  };
  Prior p;
  if (type == "inverse_gamma") {
    p = InverseGamma{field("shape"), field("scale")};
  } else if (type == "normal") {
    p = Normal{field("mean"), field("variance")};
  } else if (type == "uniform") {
    p = Uniform{field("lo"), field("hi")};
  } else if (type == "flat") {
    p = Flat{};
  } else {
    throw ConfigError("prior '" + path + "' has unknown type '" + type + "'");
  }
  try {
    validate(p);
  } catch (const Error& e) {
    throw ConfigError("prior '" + path + "': " + e.what());
  }
  return p;
}

PriorSpec parse_priors(const Config& cfg, const std::string& path) {
  PriorSpec spec;
  for (const auto& [name, value] : node(cfg, path).items()) spec[name] = parse_prior(value, path + "." + name);
  return spec;
}

std::string hex(std::uint64_t v) {
  std::ostringstream h;
  h << std::hex << std::setw(16) << std::setfill('0') << v;
  return h.str();
}

// --- run context ---------------------------------------------------------------

struct Context {
  std::string command;
  Config config;
  fs::path out_dir;
  Config inputs = Config::object();
  std::uint64_t seed = 1;
  Units units = Units::Kilometres;

  fs::path input(const std::string& key) {
    const std::string p = str(config, key);
    if (p.empty()) throw ConfigError("'" + key + "' must name an input file");
    return record(p);
  }

  fs::path record(const fs::path& p) {
    if (!fs::exists(p)) throw IoError("input file '" + p.string() + "' does not exist");
    inputs[p.string()] = hex(fnv1a_file(p));
    return p;
  }

  fs::path out(const std::string& name) const { return out_dir / name; }

  McmcConfig mcmc(std::uint64_t stream) const {
    McmcConfig m;
    m.burn_in = count(config, "mcmc.burn_in");
    m.keep = count(config, "mcmc.keep");
    m.adapt_after_burn_in = boolean(config, "mcmc.adapt_after_burn_in");
    if (m.keep == 0) throw ConfigError("'mcmc.keep' must be positive");
    m.seed = seed;
    m.stream = stream;
    return m;
  }
};

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

void write_json(const fs::path& path, const Config& j) { write_text(path, j.dump(2) + "\n"); }

Config read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return Config::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Config vec_json(const Eigen::VectorXd& v) {
  Config a = Config::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

/// Posterior summary of one scalar, for reports.
Config scalar_summary(const PosteriorChain& chain, const std::string& name) {
  const Eigen::VectorXd c = chain.column(name);
  const auto q = quantiles(c, {0.025, 0.5, 0.975});
  return {{"mean", c.mean()}, {"q2.5", q[0]}, {"q50", q[1]}, {"q97.5", q[2]}};
}

// --- data loading --------------------------------------------------------------

BBox config_bbox(const Context& ctx) {
  const auto b = numbers(ctx.config, "grid.bbox");
  if (b.size() != 4) throw ConfigError("'grid.bbox' must be [xmin, xmax, ymin, ymax]");
  const double f = ctx.units == Units::Metres ? 1e-3 : 1.0;
  BBox box{b[0] * f, b[1] * f, b[2] * f, b[3] * f};
  if (!(box.xmax > box.xmin && box.ymax > box.ymin)) throw ConfigError("'grid.bbox' is empty");
  return box;
}

/// Dense K x K covariances: larger grids are refused up front.
constexpr long long kMaxGridCells = 1024;

void check_grid_size(long long k) {
  if (k > kMaxGridCells) {
    throw ConfigError("grid has " + std::to_string(k) + " cells; at most " + std::to_string(kMaxGridCells) +
                      " are supported");
  }
}

GridSpec regular_grid(const Context& ctx) {
  const long long nx = integer(ctx.config, "grid.nx");
  const long long ny = integer(ctx.config, "grid.ny");
  if (nx <= 0 || ny <= 0) throw ConfigError("'grid.nx' and 'grid.ny' must be positive");
  check_grid_size(nx * ny);
  return build_regular_grid(config_bbox(ctx), static_cast<int>(nx), static_cast<int>(ny));
}

AreasTable membership_areas(Context& ctx) {
  AreasTable areas = read_areas_csv(ctx.input("grid.areas_csv"), ctx.units);
  check_grid_size(static_cast<long long>(areas.areas.size()));
  return areas;
}

bool membership(const Context& ctx) {
  return choice(ctx.config, "grid.kind", {"regular", "membership"}) == "membership";
}

/// Grid for a point pattern: regular from the config, or a membership grid
/// from the areas table and the points' cell ids.
GridSpec pattern_grid(Context& ctx, const PointPattern& pattern) {
  if (!membership(ctx)) return regular_grid(ctx);
  const AreasTable areas = membership_areas(ctx);
  if (pattern.cell_ids.size() != pattern.size()) {
    throw DataError("membership grids need a cell_id column in the points file");
  }
  return grid_from_membership(pattern.cell_ids, pattern.points, areas.areas, areas.representatives);
}

GridSpec pairs_grid(Context& ctx) {
  if (membership(ctx)) throw GeometryError("pair models need a regular grid");
  return regular_grid(ctx);
}

struct TheftData {
  PointPattern pattern;
  GridSpec grid;
  CovariateTable covariates;
  std::vector<std::string> columns;
  Eigen::MatrixXd x;
};

std::vector<std::string> selected_columns(Context& ctx) {
  const std::string sel = str(ctx.config, "theft.selection_json");
  if (sel.empty()) return strings(ctx.config, "theft.covariates");
  const Config j = read_json(ctx.record(sel));
  if (!j.contains("selected")) throw DataError(sel + ": missing 'selected'");
  return strings(j, "selected");
}

TheftData load_thefts(Context& ctx) {
  TheftData d;
  d.pattern = read_points_csv(ctx.input("data.points_csv"), ctx.units);
  d.grid = pattern_grid(ctx, d.pattern);
  const std::string cov = str(ctx.config, "data.covariates_csv");
  if (!cov.empty()) {
    d.covariates = read_covariates_csv(ctx.record(cov), d.grid.size());
    if (boolean(ctx.config, "theft.standardize")) d.covariates = standardize_covariates(d.covariates);
  }
  d.columns = selected_columns(ctx);
  if (d.columns.empty()) {
    d.x = intercept_design(d.grid.size());
  } else {
    if (cov.empty()) throw ConfigError("covariates are selected but 'data.covariates_csv' is empty");
    d.x = design_matrix(d.covariates, d.columns);
  }
  return d;
}

Config design_info(const TheftData& d) {
  Config names = Config::array({kInterceptName});
  for (const auto& c : d.columns) names.push_back(c);
  Config info = {{"coefficients", names}};
  if (d.covariates.standardized) {
    Config s = Config::object();
    for (int j = 0; j < d.covariates.cols(); ++j) {
      if (d.covariates.intercept[static_cast<std::size_t>(j)]) continue;
      s[d.covariates.names[static_cast<std::size_t>(j)]] = {{"mean", d.covariates.means[j]},
                                                             {"scale", d.covariates.scales[j]}};
    }
    info["standardization"] = s;
  }
  return info;
}

IntensityKind intensity_kind(const std::string& model) {
  if (model == "nhpp") return IntensityKind::NHPP;
  if (model == "lgcp") return IntensityKind::LGCP;
  throw ConfigError("unknown intensity model '" + model + "' (expected nhpp or lgcp)");
}

void write_split(const fs::path& path, std::size_t n, const std::vector<std::size_t>& test) {
  std::ostringstream s;
  s << "id,set\n";
  std::vector<bool> is_test(n, false);
  for (auto i : test) is_test[i] = true;
  for (std::size_t i = 0; i < n; ++i) s << i << ',' << (is_test[i] ? "test" : "train") << '\n';
  write_text(path, s.str());
}

/// Train/test ids from split.csv; ids must match the pairs file.
void read_split(const fs::path& path, std::size_t n, std::vector<std::size_t>& train,
                std::vector<std::size_t>& test) {
  const CsvTable t = read_csv(path);
  const int cid = t.column("id");
  const int cset = t.column("set");
  if (t.rows.size() != n) throw DimensionError(path.string() + " does not match the pairs file");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int id = t.integer(r, cid);
    if (id < 0 || static_cast<std::size_t>(id) >= n) throw DataError(path.string() + ": id out of range");
    const std::string& s = t.rows[r][static_cast<std::size_t>(cset)];
    if (s == "test") {
      test.push_back(static_cast<std::size_t>(id));
    } else if (s == "train") {
      train.push_back(static_cast<std::size_t>(id));
    } else {
      throw DataError(path.string() + ": set must be train or test");
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

/// Effective configuration of an earlier fit, with its chain.
struct FitDir {
  fs::path dir;
  Config config;
  PosteriorChain chain;
};

FitDir load_fit_dir(Context& ctx, const std::string& key, const std::string& command) {
  FitDir f;
  f.dir = str(ctx.config, key);
  if (f.dir.empty()) throw ConfigError("'" + key + "' must name the output directory of " + command);
  // The manifest carries a timestamp, so it is read but not hashed; the
  // chain and split files identify the fit.
  const Config manifest = read_json(f.dir / "manifest.json");
  if (!manifest.contains("command") || manifest["command"] != command) {
    throw DataError((f.dir / "manifest.json").string() + " is not a " + command + " manifest");
  }
  f.config = manifest.at("config");
  f.chain = read_chain_jsonl(ctx.record(f.dir / "chain.jsonl"));
  if (f.chain.draws() == 0) throw DataError((f.dir / "chain.jsonl").string() + " has no draws");
  return f;
}

// --- commands ----------------------------------------------------------------------

void cmd_fit_theft(Context& ctx) {
  const TheftData d = load_thefts(ctx);
  IntensityModelSpec spec;
  const std::string model = choice(ctx.config, "theft.model", {"nhpp", "lgcp"});
  spec.kind = intensity_kind(model);
  spec.priors = parse_priors(ctx.config, "theft.priors");
  const PosteriorChain chain = fit_intensity(d.pattern, d.grid, d.x, spec, ctx.mcmc(kStreamChain));
  write_chain_jsonl(ctx.out("chain.jsonl"), chain);
  write_summary_json(ctx.out("summary.json"), chain);
  write_surface_csv(ctx.out("surface.csv"), posterior_intensity(chain, d.grid, d.x));
  Config info = {{"model", model}, {"cells", d.grid.size()}, {"points", d.pattern.size()}};
  info.update(design_info(d));
  info["loglik"] = scalar_summary(chain, "loglik");
  write_json(ctx.out("fit_info.json"), info);
}

void cmd_select_covariates(Context& ctx) {
  const PointPattern pattern = read_points_csv(ctx.input("data.points_csv"), ctx.units);
  const GridSpec grid = pattern_grid(ctx, pattern);
  CovariateTable table = read_covariates_csv(ctx.input("data.covariates_csv"), grid.size());
  if (boolean(ctx.config, "theft.standardize")) table = standardize_covariates(table);
  std::vector<std::string> candidates;
  for (int j = 0; j < table.cols(); ++j) {
    if (!table.intercept[static_cast<std::size_t>(j)]) candidates.push_back(table.names[static_cast<std::size_t>(j)]);
  }
  const Eigen::MatrixXd x = design_matrix(table, candidates);
  std::vector<std::string> names{kInterceptName};
  names.insert(names.end(), candidates.begin(), candidates.end());
  const Eigen::VectorXi counts = assign_counts(pattern, grid);
  const Eigen::VectorXd offset = grid.std_areas().array().log();
  const StepwiseResult res = stepwise_bic(counts, x, names, offset);

  Config selected = Config::array();
  for (int c : res.columns) {
    if (c != 0) selected.push_back(names[static_cast<std::size_t>(c)]);
  }
  Config trace = Config::array();
  for (const auto& m : res.trace) {
    Config cols = Config::array();
    for (int c : m.columns) cols.push_back(names[static_cast<std::size_t>(c)]);
    trace.push_back({{"move", m.move}, {"columns", cols}, {"bic", m.bic}});
  }
  write_json(ctx.out("selection.json"), {{"selected", selected},
                                         {"coefficients", vec_json(res.fit.coefficients)},
                                         {"bic", res.bic},
                                         {"loglik", res.fit.loglik},
                                         {"points", counts.sum()},
                                         {"trace", trace}});
}

void cmd_validate(Context& ctx) {
  const TheftData d = load_thefts(ctx);
  const double p = num(ctx.config, "validate.p");
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("'validate.p' must lie in (0, 1)");
  const double nominal = num(ctx.config, "validate.nominal");
  const int regions_per_w = static_cast<int>(integer(ctx.config, "validate.regions_per_w"));
  const std::size_t wanted = count(ctx.config, "validate.predictive_draws");
  std::vector<int> ws = ints(node(ctx.config, "validate.w"), "validate.w");
  const std::vector<std::string> models = strings(ctx.config, "validate.models");
  if (models.empty()) throw ConfigError("'validate.models' is empty");

  Rng split_rng(ctx.seed, kStreamSplit);
  const ThinSplit split = p_thin(d.pattern, p, split_rng);
  const Eigen::VectorXi test_cells = assign_counts(split.test, d.grid);

  std::vector<EvalRegions> regions;
  Rng region_rng(ctx.seed, kStreamRegions);
  for (int w : ws) regions.push_back(random_blocks(d.grid, w, regions_per_w, region_rng));

  Config report = {{"p", p},
                   {"nominal", nominal},
                   {"train_points", split.train.size()},
                   {"test_points", split.test.size()},
                   {"regions_per_w", regions_per_w}};
  Config per_model = Config::object();
  std::ostringstream scores;
  scores << "model,w,pic,rps\n";
  for (std::size_t m = 0; m < models.size(); ++m) {
    IntensityModelSpec spec;
    spec.kind = intensity_kind(models[m]);
    spec.priors = parse_priors(ctx.config, "theft.priors");
    const PosteriorChain chain = fit_intensity(split.train, d.grid, d.x, spec, ctx.mcmc(kStreamChain + m));
    const std::size_t draws = std::min(wanted, chain.draws());
    if (draws == 0) throw ConfigError("'validate.predictive_draws' must be positive");
    Rng pred_rng(ctx.seed, kStreamPredict + 10 * (m + 1));
    Eigen::MatrixXi cell_draws(static_cast<Eigen::Index>(draws), d.grid.size());
    for (std::size_t l = 0; l < draws; ++l) {
      const std::size_t idx = l * chain.draws() / draws;
      cell_draws.row(static_cast<Eigen::Index>(l)) =
          sample_predictive_counts(chain, idx, d.grid, d.x, thinning_scale(p), pred_rng).transpose();
    }
    Config rows = Config::array();
    for (std::size_t wi = 0; wi < ws.size(); ++wi) {
      const EvalRegions& reg = regions[wi];
      Eigen::MatrixXd pred(static_cast<Eigen::Index>(draws), static_cast<Eigen::Index>(reg.sets.size()));
      for (std::size_t l = 0; l < draws; ++l) {
        const Eigen::VectorXi row = cell_draws.row(static_cast<Eigen::Index>(l)).transpose();
        pred.row(static_cast<Eigen::Index>(l)) = region_counts(row, reg).cast<double>().transpose();
      }
      const Eigen::VectorXd test = region_counts(test_cells, reg).cast<double>();
      const double coverage = pic(pred, test, nominal);
      double score = 0.0;
      for (Eigen::Index r = 0; r < test.size(); ++r) score += rps(pred.col(r), test[r]);
      score /= static_cast<double>(test.size());
      rows.push_back({{"w", ws[wi]}, {"pic", coverage}, {"rps", score}});
      scores << models[m] << ',' << ws[wi] << ',' << format_double(coverage) << ',' << format_double(score) << '\n';
    }
    per_model[models[m]] = {{"loglik", scalar_summary(chain, "loglik")}, {"scores", rows}};
  }
  report["models"] = per_model;
  write_json(ctx.out("report.json"), report);
  write_text(ctx.out("scores.csv"), scores.str());
}

KernelKind kernel_kind(const Config& cfg) {
  return choice(cfg, "conditional.kernel", {"constant", "spatial"}) == "constant" ? KernelKind::Constant
                                                                               : KernelKind::Spatial;
}

void cmd_fit_conditional(Context& ctx) {
  const PairedPattern pairs = read_pairs_csv(ctx.input("data.pairs_csv"), ctx.units);
  const long long h_cfg = integer(ctx.config, "conditional.holdout");
  const std::size_t h = h_cfg < 0 ? default_holdout_size(pairs.complete_count()) : static_cast<std::size_t>(h_cfg);
  HoldoutSplit split;
  if (h > 0) {
    Rng rng(ctx.seed, kStreamSplit);
    split = holdout_pairs(pairs, h, rng);
  } else {
    split.train = pairs.complete_indices();
  }
  const PairedPattern train = pairs.subset(split.train);
  const PriorSpec priors = parse_priors(ctx.config, "conditional.priors");
  const KernelKind kind = kernel_kind(ctx.config);
  ConditionalFit fit;
  if (kind == KernelKind::Constant) {
    fit = fit_conditional_constant(train, priors, ctx.mcmc(kStreamChain));
  } else {
    SpatialKernelSpec spec;
    spec.phi_star = num(ctx.config, "conditional.phi_star");
    spec.higdon_a = num(ctx.config, "conditional.higdon_a");
    const std::string mode = choice(ctx.config, "conditional.anchors", {"auto", "thefts", "grid"});
    spec.anchors = mode == "auto" ? AnchorMode::Auto : mode == "thefts" ? AnchorMode::TheftPoints : AnchorMode::Grid;
    spec.auto_threshold = count(ctx.config, "conditional.anchor_threshold");
    spec.auto_grid_cells = static_cast<int>(integer(ctx.config, "conditional.anchor_grid_cells"));
    if (choice(ctx.config, "conditional.anchor_grid", {"auto", "config"}) == "config") spec.grid = pairs_grid(ctx);
    fit = fit_conditional_spatial(train, spec, priors, ctx.mcmc(kStreamChain));
  }
  write_chain_jsonl(ctx.out("chain.jsonl"), fit.chain);
  write_summary_json(ctx.out("summary.json"), fit.chain);
  write_split(ctx.out("split.csv"), pairs.size(), split.test);
  PointPattern anchors;
  anchors.points = fit.anchors;
  write_points_csv(ctx.out("anchors.csv"), anchors, ctx.units);
  write_json(ctx.out("fit_info.json"), {{"kernel", str(ctx.config, "conditional.kernel")},
                                        {"pairs", pairs.size()},
                                        {"complete_pairs", pairs.complete_count()},
                                        {"train_pairs", split.train.size()},
                                        {"test_pairs", split.test.size()},
                                        {"anchors", fit.anchors.size()},
                                        {"loglik", scalar_summary(fit.chain, "loglik")}});
}

void cmd_predict_recovery(Context& ctx) {
  const FitDir f = load_fit_dir(ctx, "conditional.fit_dir", "fit-conditional");
  const Units units = parse_units(str(f.config, "units"));
  const PairedPattern pairs = read_pairs_csv(ctx.record(str(f.config, "data.pairs_csv")), units);
  std::vector<std::size_t> train, test;
  read_split(ctx.record(f.dir / "split.csv"), pairs.size(), train, test);
  if (test.empty()) throw ConfigError("the fit has no held-out pairs to predict");

  ConditionalFit fit;
  fit.kind = kernel_kind(f.config);
  fit.chain = f.chain;
  fit.phi_star = num(f.config, "conditional.phi_star");
  fit.higdon_a = num(f.config, "conditional.higdon_a");
  if (fit.kind == KernelKind::Spatial) fit.anchors = read_points_csv(ctx.record(f.dir / "anchors.csv"), units).points;

  std::vector<Point> thefts;
  for (auto i : test) thefts.push_back(pairs.thefts[i]);
  PredictOptions opt;
  opt.stride = count(ctx.config, "conditional.predict_stride");
  if (opt.stride == 0) throw ConfigError("'conditional.predict_stride' must be positive");
  Rng rng(ctx.seed, kStreamPredict);
  const RecoveryPrediction pred = predict_recovery(fit, thefts, rng, opt);

  const double f_out = units == Units::Metres ? 1e3 : 1.0;
  std::ostringstream csv;
  csv << "id,theft_x,theft_y,recovery_x,recovery_y,pred_mean_x,pred_mean_y,bicrps\n";
  double total = 0.0;
  for (std::size_t j = 0; j < test.size(); ++j) {
    const Point& obs = *pairs.recoveries[test[j]];
    const double score = bicrps(pred.samples[j], obs) * f_out;
    total += score;
    const Eigen::RowVector2d mean = pred.samples[j].colwise().mean();
    csv << test[j] << ',' << format_double(thefts[j].x() * f_out) << ',' << format_double(thefts[j].y() * f_out)
        << ',' << format_double(obs.x() * f_out) << ',' << format_double(obs.y() * f_out) << ','
        << format_double(mean.x() * f_out) << ',' << format_double(mean.y() * f_out) << ','
        << format_double(score) << '\n';
  }
  write_text(ctx.out("predictions.csv"), csv.str());

  const std::size_t n_density = std::min(count(ctx.config, "conditional.density.points"), test.size());
  const int res = static_cast<int>(integer(ctx.config, "conditional.density.resolution"));
  if (n_density > 0 && res < 2) throw ConfigError("'conditional.density.resolution' must be at least 2");
  const double hw_cfg = num(ctx.config, "conditional.density.half_width");
  for (std::size_t j = 0; j < n_density; ++j) {
    const Eigen::RowVector3d k = pred.kernels[j].colwise().mean();
    // Four standard deviations of the larger coordinate of N(0, Sigma / 2).
    const double hw = hw_cfg > 0.0 ? hw_cfg / f_out : 4.0 * std::sqrt(std::max(k[0], k[2]) / 2.0);
    std::vector<Point> pts;
    for (int iy = 0; iy < res; ++iy) {
      for (int ix = 0; ix < res; ++ix) {
        pts.emplace_back(thefts[j].x() - hw + 2.0 * hw * ix / (res - 1), thefts[j].y() - hw + 2.0 * hw * iy / (res - 1));
      }
    }
    const Eigen::VectorXd dens = predictive_density(pred, j, pts);
    std::ostringstream s;
    s << "x,y,density\n";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      s << format_double(pts[i].x() * f_out) << ',' << format_double(pts[i].y() * f_out) << ','
        << format_double(dens[static_cast<Eigen::Index>(i)] / (f_out * f_out)) << '\n';
    }
    write_text(ctx.out("density") / ("pair_" + std::to_string(test[j]) + ".csv"), s.str());
  }
  write_json(ctx.out("report.json"), {{"kernel", str(f.config, "conditional.kernel")},
                                      {"test_pairs", test.size()},
                                      {"draws_used", pred.samples.empty() ? 0 : pred.samples[0].rows()},
                                      {"mean_bicrps", total / static_cast<double>(test.size())},
                                      {"density_files", n_density}});
}

JointModelSpec joint_spec(const Config& cfg) {
  JointModelSpec spec;
  spec.variant = choice(cfg, "joint.variant", {"independent", "dependent"}) == "independent"
                     ? JointVariant::Independent
                     : JointVariant::Dependent;
  spec.phi_star = num(cfg, "joint.phi_star");
  spec.higdon_a = num(cfg, "joint.higdon_a");
  spec.kernel_sigma = num(cfg, "joint.kernel_sigma");
  spec.priors = parse_priors(cfg, "joint.priors");
  return spec;
}

void cmd_fit_joint(Context& ctx) {
  const PairedPattern pairs = read_pairs_csv(ctx.input("data.pairs_csv"), ctx.units);
  const GridSpec grid = pairs_grid(ctx);
  const double hp = num(ctx.config, "joint.holdout_p");
  if (!(hp >= 0.0 && hp < 1.0)) throw ConfigError("'joint.holdout_p' must lie in [0, 1)");
  std::vector<std::size_t> train, test;
  Rng rng(ctx.seed, kStreamSplit);
  for (auto i : pairs.complete_indices()) (rng.uniform() < hp ? test : train).push_back(i);
  const JointModelSpec spec = joint_spec(ctx.config);
  const JointFit fit = fit_joint(pairs.subset(train), grid, spec, ctx.mcmc(kStreamChain));
  write_chain_jsonl(ctx.out("chain.jsonl"), fit.chain);
  write_summary_json(ctx.out("summary.json"), fit.chain);
  write_split(ctx.out("split.csv"), pairs.size(), test);
  Config info = {{"variant", str(ctx.config, "joint.variant")},
                 {"cells", grid.size()},
                 {"train_pairs", train.size()},
                 {"test_pairs", test.size()},
                 {"loglik", scalar_summary(fit.chain, "loglik")},
                 {"warnings", fit.warnings}};
  if (fit.chain.has_scalar("eta")) info["eta"] = scalar_summary(fit.chain, "eta");
  write_json(ctx.out("fit_info.json"), info);
}

std::vector<std::vector<int>> flow_partition(const Config& cfg, const GridSpec& grid) {
  const Config& p = node(cfg, "flow.partition");
  std::vector<std::vector<int>> out;
  if (p.is_string()) {
    const std::string kind = p.get<std::string>();
    if (kind == "quadrants") {
      const BBox& b = grid.bbox();
      const double mx = 0.5 * (b.xmin + b.xmax);
      const double my = 0.5 * (b.ymin + b.ymax);
      out.resize(4);
      for (const auto& c : grid.cells()) {
        const int q = (c.representative.x() >= mx ? 1 : 0) + (c.representative.y() >= my ? 2 : 0);
        out[static_cast<std::size_t>(q)].push_back(c.id);
      }
      out.erase(std::remove_if(out.begin(), out.end(), [](const auto& s) { return s.empty(); }), out.end());
    } else if (kind == "cells") {
      for (int k = 0; k < grid.size(); ++k) out.push_back({k});
    } else {
      throw ConfigError("'flow.partition' must be \"quadrants\", \"cells\" or a list of cell lists");
    }
  } else if (p.is_array()) {
    for (const auto& s : p) out.push_back(ints(s, "flow.partition"));
  } else {
    throw ConfigError("'flow.partition' must be \"quadrants\", \"cells\" or a list of cell lists");
  }
  return out;
}

void cmd_predict_flow(Context& ctx) {
  const FitDir f = load_fit_dir(ctx, "flow.fit_dir", "fit-joint");
  Context fit_ctx;
  fit_ctx.config = f.config;
  fit_ctx.units = parse_units(str(f.config, "units"));
  const GridSpec grid = pairs_grid(fit_ctx);
  const PairedPattern pairs = read_pairs_csv(ctx.record(str(f.config, "data.pairs_csv")), fit_ctx.units);
  std::vector<std::size_t> train, test;
  read_split(ctx.record(f.dir / "split.csv"), pairs.size(), train, test);

  std::vector<int> origin = ints(node(ctx.config, "flow.origin"), "flow.origin");
  if (origin.empty()) {
    // Default origin: the theft cell with the most training pairs.
    const PairCountsMatrix c = pair_counts(pairs.subset(train), grid);
    Eigen::Index best = 0;
    c.colwise().sum().maxCoeff(&best);
    origin.push_back(static_cast<int>(best));
  }
  const auto partition = flow_partition(ctx.config, grid);
  validate_flow_sets(origin, partition, grid.size());

  JointFit fit;
  fit.spec = joint_spec(f.config);
  fit.chain = f.chain;
  const FlowSummary flow = flow_proportions(fit, grid, origin, partition);
  const CountFlow held = flow_proportions(pair_counts(pairs.subset(test), grid), origin, partition);

  std::ostringstream csv;
  csv << "partition_id,post_mean,post_lo95,post_hi95,heldout_count_prop\n";
  for (std::size_t d = 0; d < partition.size(); ++d) {
    const auto i = static_cast<Eigen::Index>(d);
    csv << d << ',' << format_double(flow.mean[i]) << ',' << format_double(flow.lo95[i]) << ','
        << format_double(flow.hi95[i]) << ',' << (held.defined ? format_double(held.proportions[i]) : "") << '\n';
  }
  write_text(ctx.out("flow.csv"), csv.str());
  Config sets = Config::array();
  for (const auto& s : partition) sets.push_back(s);
  write_json(ctx.out("report.json"), {{"origin", origin},
                                      {"partition", sets},
                                      {"draws", flow.draws.rows()},
                                      {"heldout_pairs_from_origin", held.total},
                                      {"heldout_defined", held.defined}});
}

CovariateTable simulated_covariates(const GridSpec& grid, int p, Rng& rng) {
  std::vector<std::string> names;
  Eigen::MatrixXd v(grid.size(), p);
  for (int j = 0; j < p; ++j) {
    names.push_back("x" + std::to_string(j + 1));
    for (int k = 0; k < grid.size(); ++k) v(k, j) = rng.normal();
  }
  return standardize_covariates(make_covariate_table(names, v));
}

void cmd_simulate(Context& ctx) {
  const Config& cfg = ctx.config;
  const std::string model = choice(cfg, "simulate.model", {"nhpp", "lgcp", "pairs", "joint"});
  Rng rng(ctx.seed, kStreamSimulate);
  Config truth = {{"model", model}, {"seed", ctx.seed}};

  if (model == "joint") {
    const GridSpec grid = pairs_grid(ctx);
    const auto reps = grid.representative_list();
    JointParams p;
    p.eta = num(cfg, "simulate.joint.eta");
    p.kernel_sigma = num(cfg, "simulate.joint.kernel_sigma");
    p.higdon_a = num(cfg, "joint.higdon_a");
    const auto gp_r = CovarianceModel::exponential(num(cfg, "simulate.joint.sigma2_r"), num(cfg, "simulate.joint.phi_r"));
    const auto gp_t = CovarianceModel::exponential(num(cfg, "simulate.joint.sigma2_t"), num(cfg, "simulate.joint.phi_t"));
    p.z_r = mvn_sample(chol(cov_matrix(reps, gp_r)), rng);
    p.z_t = mvn_sample(chol(cov_matrix(reps, gp_t)), rng);
    const HigdonKernelField field = sample_higdon_field(reps, num(cfg, "simulate.joint.phi_star"), p.kernel_sigma, rng, p.higdon_a);
    p.psi_x = field.psi_x;
    p.psi_y = field.psi_y;
    p.beta0 = calibrate_beta0(p, grid, num(cfg, "simulate.joint.expected_pairs"));
    JointSimulationSpec spec;
    spec.params = p;
    const SimulatedPairs sim = simulate_joint(grid, spec, rng);
    write_pairs_csv(ctx.out("pairs.csv"), sim.pairs, ctx.units);
    truth["pairs"] = sim.pairs.size();
    truth["beta0"] = p.beta0;
    truth["eta"] = p.eta;
    truth["kernel_sigma"] = p.kernel_sigma;
    truth["z_r"] = vec_json(p.z_r);
    truth["z_t"] = vec_json(p.z_t);
    truth["psi_x"] = vec_json(p.psi_x);
    truth["psi_y"] = vec_json(p.psi_y);
    write_json(ctx.out("truth.json"), truth);
    return;
  }

  GridSpec grid;
  if (membership(ctx)) {
    const AreasTable areas = membership_areas(ctx);
    if (!areas.representatives) throw DataError("simulating on a membership grid needs x,y in the areas file");
    grid = grid_from_membership({}, {}, areas.areas, areas.representatives);
  } else {
    grid = regular_grid(ctx);
  }
  const int n_cov = static_cast<int>(integer(cfg, "simulate.n_covariates"));
  if (n_cov < 0) throw ConfigError("'simulate.n_covariates' must be nonnegative");
  const std::vector<double> beta_v = numbers(cfg, "simulate.beta");
  if (static_cast<int>(beta_v.size()) != n_cov + 1) {
    throw ConfigError("'simulate.beta' needs one intercept plus one entry per covariate");
  }
  const CovariateTable cov = simulated_covariates(grid, n_cov, rng);
  const Eigen::MatrixXd x = n_cov > 0 ? design_matrix(cov, cov.names) : intercept_design(grid.size());
  const Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(beta_v.data(), static_cast<Eigen::Index>(beta_v.size()));
  std::optional<CovarianceModel> gp;
  if (model != "nhpp") gp = CovarianceModel::exponential(num(cfg, "simulate.gp.sigma2"), num(cfg, "simulate.gp.phi"));
  const SimulatedPattern sim = simulate_lgcp(grid, x, beta, gp, rng, num(cfg, "simulate.area_scale"));

  write_points_csv(ctx.out("points.csv"), sim.pattern, ctx.units);
  if (n_cov > 0) write_covariates_csv(ctx.out("covariates.csv"), cov);
  truth["beta"] = beta_v;
  truth["covariates"] = cov.names;
  truth["points"] = sim.pattern.size();
  if (gp) {
    truth["sigma2"] = gp->variance;
    truth["phi"] = gp->decay;
    truth["z"] = vec_json(sim.z);
  }

  if (model == "pairs") {
    const double prob = num(cfg, "simulate.recovery.prob");
    RecoveryKernel kernel;
    if (choice(cfg, "simulate.recovery.kernel", {"constant", "spatial"}) == "constant") {
      kernel = sigma_constant(num(cfg, "simulate.recovery.sigma1"), num(cfg, "simulate.recovery.sigma2"),
                              num(cfg, "simulate.recovery.rho"));
    } else {
      kernel = sample_higdon_field(sim.pattern.points, num(cfg, "simulate.recovery.phi_star"),
                                   num(cfg, "simulate.recovery.sigma"), rng, num(cfg, "conditional.higdon_a"));
    }
    const PairedPattern pairs = simulate_recoveries(sim.pattern, kernel, prob, rng);
    write_pairs_csv(ctx.out("pairs.csv"), pairs, ctx.units);
    truth["recovery"] = node(cfg, "simulate.recovery");
    truth["complete_pairs"] = pairs.complete_count();
    if (const auto* f = std::get_if<HigdonKernelField>(&kernel)) {
      truth["psi_x"] = vec_json(f->psi_x);
      truth["psi_y"] = vec_json(f->psi_y);
    }
  }
  write_json(ctx.out("truth.json"), truth);
}

using Command = void (*)(Context&);

const std::map<std::string, std::pair<Command, const char*>>& commands() {
  static const std::map<std::string, std::pair<Command, const char*>> table = {
      {"simulate", {cmd_simulate, "Simulate point patterns, recovery pairs or joint pairs"}},
      {"select-covariates", {cmd_select_covariates, "Stepwise BIC covariate selection"}},
      {"fit-theft", {cmd_fit_theft, "Fit an NHPP or LGCP intensity"}},
      {"validate", {cmd_validate, "p-thinning validation: PIC and RPS"}},
      {"fit-conditional", {cmd_fit_conditional, "Fit the recovery-given-theft kernel"}},
      {"predict-recovery", {cmd_predict_recovery, "Predict held-out recovery locations"}},
      {"fit-joint", {cmd_fit_joint, "Fit the joint origin-destination model"}},
      {"predict-flow", {cmd_predict_flow, "Predictive flow proportions from a joint fit"}},
  };
  return table;
}

}  // namespace

Config default_config() {
  const Config ig = prior_json(InverseGamma{2.0, 0.1});
  const Config n100 = prior_json(Normal{0.0, 100.0});
  const Config u010 = prior_json(Uniform{0.0, 10.0});
  Config c;
  c["seed"] = 1;
  c["threads"] = 1;
  c["units"] = "km";
  c["grid"] = {{"kind", "regular"}, {"bbox", {0.0, 10.0, 0.0, 10.0}}, {"nx", 10}, {"ny", 10}, {"areas_csv", ""}};
  c["data"] = {{"points_csv", ""}, {"covariates_csv", ""}, {"pairs_csv", ""}};
  c["mcmc"] = {{"burn_in", 20000}, {"keep", 20000}, {"adapt_after_burn_in", false}};
  c["theft"] = {{"model", "lgcp"},
                {"covariates", Config::array()},
                {"selection_json", ""},
                {"standardize", true},
                {"priors", {{"beta", n100}, {"sigma2", ig}, {"phi", u010}}}};
  c["validate"] = {{"p", 0.5},
                   {"models", {"nhpp", "lgcp"}},
                   {"w", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}},
                   {"regions_per_w", 100},
                   {"nominal", 0.9},
                   {"predictive_draws", 1000}};
  c["conditional"] = {
      {"kernel", "spatial"},
      {"phi_star", 10.0},
      {"higdon_a", kHigdonA},
      {"anchors", "auto"},
      {"anchor_threshold", 1000},
      {"anchor_grid", "auto"},
      {"anchor_grid_cells", 305},
      {"holdout", -1},
      {"priors",
       {{"sigma1_sq", ig}, {"sigma2_sq", ig}, {"rho", prior_json(Uniform{-1.0, 1.0})}, {"sigma2", ig}}},
      {"fit_dir", ""},
      {"predict_stride", 1},
      {"density", {{"points", 5}, {"resolution", 50}, {"half_width", 0.0}}}};
  c["joint"] = {{"variant", "dependent"},
                {"phi_star", 1.0},
                {"higdon_a", kHigdonA},
                {"kernel_sigma", 1.0},
                {"holdout_p", 0.2},
                {"priors",
                 {{"beta0", n100}, {"eta", n100}, {"sigma2_r", ig}, {"phi_r", u010}, {"sigma2_t", ig}, {"phi_t", u010}}}};
  c["flow"] = {{"fit_dir", ""}, {"origin", Config::array()}, {"partition", "quadrants"}};
  c["simulate"] = {
      {"model", "lgcp"},
      {"n_covariates", 1},
      {"beta", {7.5, 1.0}},
      {"gp", {{"sigma2", 0.5}, {"phi", 1.0}}},
      {"area_scale", 1.0},
      {"recovery",
       {{"kernel", "spatial"}, {"prob", 1.0}, {"sigma1", 1.0}, {"sigma2", 1.0}, {"rho", 0.0}, {"sigma", 1.0}, {"phi_star", 10.0}}},
      {"joint",
       {{"expected_pairs", 5000.0},
        {"eta", -0.05},
        {"sigma2_r", 0.5},
        {"phi_r", 1.0},
        {"sigma2_t", 0.5},
        {"phi_t", 1.0},
        {"phi_star", 1.0},
        {"kernel_sigma", 1.0}}}};
  return c;
}

Config merge_config(const Config& defaults, const Config& user) {
  if (!user.is_object()) throw ConfigError("configuration must be a JSON object");
  Config out = defaults;
  merge_into(out, user, "", false);
  return out;
}

void apply_override(Config& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Config value;
  try {
    value = Config::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  Config* cur = &tree;
  std::istringstream in(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(in, part, '.')) {
    if (part.empty()) throw ConfigError("malformed key '" + key + "'");
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    Config& next = (*cur)[parts[i]];
    if (next.is_null()) next = Config::object();
    if (!next.is_object()) throw ConfigError("'" + key + "' descends into a non-table value");
    cur = &next;
  }
  (*cur)[parts.back()] = value;
}

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->category()) {
      case Error::Category::Config: return 2;
      case Error::Category::Io: return 3;
      case Error::Category::Data: return 4;
      case Error::Category::Dimension: return 5;
      case Error::Category::Numerical:
      case Error::Category::Geometry: return 6;
    }
  }
  return 1;
}

namespace {

const char* category_name(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->category()) {
      case Error::Category::Config: return "config";
      case Error::Category::Io: return "io";
      case Error::Category::Data: return "data";
      case Error::Category::Dimension: return "dimension";
      case Error::Category::Numerical: return "numerical";
      case Error::Category::Geometry: return "geometry";
    }
  }
  return "internal";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Origin-destination point pattern models"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "Override a configuration key: a.b.c=value");
  app.add_option("--seed", seed, "Random seed (overrides the configuration)");
  app.add_option("--threads", threads, "Upper bound on worker threads");
  app.add_option("--out-dir", out_dir, "Directory for the artifacts");
  app.add_flag_callback(
      "--print-defaults", [&out] { out << default_config().dump(2) << '\n'; throw CLI::Success(); },
      "Print the default configuration and exit");
  for (const auto& [name, entry] : commands()) app.add_subcommand(name, entry.second)->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return e.get_exit_code() == 0 ? code : 2;
  }

  std::string command;
  for (const auto* sub : app.get_subcommands()) command = sub->get_name();
  try {
    Config user = Config::object();
    if (!config_path.empty()) user = read_json(config_path);
    if (!user.is_object()) throw ConfigError(config_path + ": configuration must be a JSON object");
    for (const auto& s : sets) apply_override(user, s);
    if (seed) user["seed"] = *seed;
    if (threads) user["threads"] = *threads;

    Context ctx;
    ctx.command = command;
    ctx.config = merge_config(default_config(), user);
    ctx.out_dir = out_dir;
    const long long s = integer(ctx.config, "seed");
    if (s < 0) throw ConfigError("'seed' must be nonnegative");
    ctx.seed = static_cast<std::uint64_t>(s);
    ctx.units = parse_units(str(ctx.config, "units"));
    const long long t = integer(ctx.config, "threads");
    if (t < 1) throw ConfigError("'threads' must be at least 1");
    Eigen::setNbThreads(static_cast<int>(t));
    if (!config_path.empty()) ctx.record(config_path);

    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());

    commands().at(command).first(ctx);

    write_json(ctx.out("manifest.json"), {{"command", command},
                                          {"version", kVersion},
                                          {"seed", ctx.seed},
                                          {"inputs", ctx.inputs},
                                          {"config", ctx.config},
                                          {"created", timestamp_utc()}});
    out << command << ": wrote " << ctx.out_dir.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error [" << category_name(e) << "]: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace odpp::cli
