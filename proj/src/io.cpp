#include "odpp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "odpp/errors.hpp"

namespace odpp {

namespace {

using ojson = nlohmann::ordered_json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double length_factor(Units u) { return u == Units::Metres ? 1e-3 : 1.0; }

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string location(const CsvTable& t, std::size_t row) {
  return t.path + ":" + std::to_string(t.lines.at(row));
}

}  // namespace

Units parse_units(const std::string& text) {
  if (text == "km") return Units::Kilometres;
  if (text == "m") return Units::Metres;
  throw ConfigError("units must be 'km' or 'm', got '" + text + "'");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int CsvTable::column(const std::string& name) const {
  if (auto c = find_column(name)) return *c;
  throw DataError(path + ": missing column '" + name + "'");
}

std::optional<int> CsvTable::find_column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return static_cast<int>(j);
  }
  return std::nullopt;
}

double CsvTable::number(std::size_t row, int col, bool allow_empty) const {
  const std::string& f = rows.at(row).at(static_cast<std::size_t>(col));
  if (f.empty()) {
    if (allow_empty) return std::numeric_limits<double>::quiet_NaN();
    throw DataError(location(*this, row) + ": empty field '" + header[static_cast<std::size_t>(col)] + "'");
  }
  double v = 0.0;
  const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v)) {
    throw DataError(location(*this, row) + ": '" + f + "' is not a finite number");
  }
  return v;
}

int CsvTable::integer(std::size_t row, int col) const {
  const std::string& f = rows.at(row).at(static_cast<std::size_t>(col));
  int v = 0;
  const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size()) {
    throw DataError(location(*this, row) + ": '" + f + "' is not an integer");
  }
  return v;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  CsvTable t;
  t.path = path.string();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError(t.path + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) throw DataError(t.path + ": missing header");
  return t;
}

PointPattern read_points_csv(const std::filesystem::path& path, Units units) {
  const CsvTable t = read_csv(path);
  const int cx = t.column("x");
  const int cy = t.column("y");
  t.column("id");
  const auto cc = t.find_column("cell_id");
  const double f = length_factor(units);
  PointPattern p;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    p.points.emplace_back(t.number(r, cx) * f, t.number(r, cy) * f);
    if (cc) p.cell_ids.push_back(t.integer(r, *cc));
  }
  return p;
}

void write_points_csv(const std::filesystem::path& path, const PointPattern& pattern, Units units) {
  auto out = open_out(path);
  const double f = 1.0 / length_factor(units);
  const bool cells = !pattern.cell_ids.empty();
  out << "id,x,y" << (cells ? ",cell_id" : "") << '\n';
  for (std::size_t i = 0; i < pattern.points.size(); ++i) {
    out << i << ',' << format_double(pattern.points[i].x() * f) << ','
        << format_double(pattern.points[i].y() * f);
    if (cells) out << ',' << pattern.cell_ids[i];
    out << '\n';
  }
}

CovariateTable read_covariates_csv(const std::filesystem::path& path, int k_cells) {
  const CsvTable t = read_csv(path);
  const int cid = t.column("cell_id");
  std::vector<std::string> names;
  std::vector<int> cols;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (static_cast<int>(j) == cid) continue;
    names.push_back(t.header[j]);
    cols.push_back(static_cast<int>(j));
  }
  if (static_cast<int>(t.rows.size()) != k_cells) {
    throw DimensionError(t.path + ": expected " + std::to_string(k_cells) + " cell rows, found " +
                         std::to_string(t.rows.size()));
  }
  Eigen::MatrixXd values(k_cells, static_cast<Eigen::Index>(names.size()));
  std::vector<bool> seen(static_cast<std::size_t>(k_cells), false);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int c = t.integer(r, cid);
    if (c < 0 || c >= k_cells) throw DataError(location(t, r) + ": cell_id " + std::to_string(c) + " out of range");
    if (seen[static_cast<std::size_t>(c)]) throw DataError(location(t, r) + ": duplicate cell_id " + std::to_string(c));
    seen[static_cast<std::size_t>(c)] = true;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      values(c, static_cast<Eigen::Index>(j)) = t.number(r, cols[j]);
    }
  }
  return make_covariate_table(std::move(names), std::move(values));
}

void write_covariates_csv(const std::filesystem::path& path, const CovariateTable& table) {
  auto out = open_out(path);
  out << "cell_id";
  for (const auto& n : table.names) out << ',' << n;
  out << '\n';
  for (Eigen::Index k = 0; k < table.values.rows(); ++k) {
    out << k;
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) out << ',' << format_double(table.values(k, j));
    out << '\n';
  }
}

AreasTable read_areas_csv(const std::filesystem::path& path, Units units) {
  const CsvTable t = read_csv(path);
  const int cid = t.column("cell_id");
  const int ca = t.column("area");
  const auto cx = t.find_column("x");
  const auto cy = t.find_column("y");
  if (cx.has_value() != cy.has_value()) throw DataError(t.path + ": x and y must appear together");
  const auto k = t.rows.size();
  const double f = length_factor(units);
  AreasTable a;
  a.areas.assign(k, 0.0);
  std::vector<bool> seen(k, false);
  if (cx) a.representatives = std::vector<Point>(k, Point::Zero());
  for (std::size_t r = 0; r < k; ++r) {
    const int c = t.integer(r, cid);
    if (c < 0 || static_cast<std::size_t>(c) >= k) {
      throw DataError(location(t, r) + ": cell_id " + std::to_string(c) + " is not in 0..K-1");
    }
    if (seen[static_cast<std::size_t>(c)]) throw DataError(location(t, r) + ": duplicate cell_id");
    seen[static_cast<std::size_t>(c)] = true;
    a.areas[static_cast<std::size_t>(c)] = t.number(r, ca) * f * f;
    if (cx) (*a.representatives)[static_cast<std::size_t>(c)] = Point(t.number(r, *cx) * f, t.number(r, *cy) * f);
  }
  return a;
}

PairedPattern read_pairs_csv(const std::filesystem::path& path, Units units) {
  const CsvTable t = read_csv(path);
  t.column("id");
  const int tx = t.column("theft_x");
  const int ty = t.column("theft_y");
  const int rx = t.column("recovery_x");
  const int ry = t.column("recovery_y");
  const double f = length_factor(units);
  PairedPattern p;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    p.thefts.emplace_back(t.number(r, tx) * f, t.number(r, ty) * f);
    const double x = t.number(r, rx, true);
    const double y = t.number(r, ry, true);
    if (std::isnan(x) != std::isnan(y)) {
      throw DataError(location(t, r) + ": recovery coordinates must both be present or both empty");
    }
    if (std::isnan(x)) {
      p.recoveries.emplace_back(std::nullopt);
    } else {
      p.recoveries.emplace_back(Point(x * f, y * f));
    }
  }
  return p;
}

void write_pairs_csv(const std::filesystem::path& path, const PairedPattern& pairs, Units units) {
  auto out = open_out(path);
  const double f = 1.0 / length_factor(units);
  out << "id,theft_x,theft_y,recovery_x,recovery_y\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out << i << ',' << format_double(pairs.thefts[i].x() * f) << ',' << format_double(pairs.thefts[i].y() * f)
        << ',';
    if (pairs.recoveries[i]) {
      out << format_double(pairs.recoveries[i]->x() * f) << ',' << format_double(pairs.recoveries[i]->y() * f);
    } else {
      out << ',';
    }
    out << '\n';
  }
}

void write_chain_jsonl(const std::filesystem::path& path, const PosteriorChain& chain) {
  auto out = open_out(path);
  for (std::size_t d = 0; d < chain.draws(); ++d) {
    const auto row = static_cast<Eigen::Index>(d);
    ojson rec;
    rec["draw"] = d;
    ojson params = ojson::object();
    for (std::size_t j = 0; j < chain.scalar_names.size(); ++j) {
      params[chain.scalar_names[j]] = chain.scalars(row, static_cast<Eigen::Index>(j));
    }
    rec["params"] = std::move(params);
    ojson latent = ojson::object();
    for (std::size_t j = 0; j < chain.latent_names.size(); ++j) {
      const auto& m = chain.latents[j];
      std::vector<double> v(static_cast<std::size_t>(m.cols()));
      for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(row, c);
      latent[chain.latent_names[j]] = v;
    }
    rec["latent"] = std::move(latent);
    out << rec.dump() << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

PosteriorChain read_chain_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<ojson> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      records.push_back(ojson::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  PosteriorChain chain;
  if (records.empty()) return chain;
  for (const auto& [k, v] : records[0].at("params").items()) chain.scalar_names.push_back(k);
  for (const auto& [k, v] : records[0].at("latent").items()) {
    chain.latent_names.push_back(k);
    chain.latents.emplace_back(static_cast<Eigen::Index>(records.size()),
                               static_cast<Eigen::Index>(v.size()));
  }
  chain.scalars.resize(static_cast<Eigen::Index>(records.size()),
                       static_cast<Eigen::Index>(chain.scalar_names.size()));
  try {
    for (std::size_t d = 0; d < records.size(); ++d) {
      const auto row = static_cast<Eigen::Index>(d);
      const auto& params = records[d].at("params");
      for (std::size_t j = 0; j < chain.scalar_names.size(); ++j) {
        chain.scalars(row, static_cast<Eigen::Index>(j)) = params.at(chain.scalar_names[j]).get<double>();
      }
      const auto& latent = records[d].at("latent");
      for (std::size_t j = 0; j < chain.latent_names.size(); ++j) {
        const auto v = latent.at(chain.latent_names[j]).get<std::vector<double>>();
        auto& m = chain.latents[j];
        if (static_cast<Eigen::Index>(v.size()) != m.cols()) {
          throw DataError(path.string() + ": latent '" + chain.latent_names[j] + "' changes length");
        }
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(row, c) = v[static_cast<std::size_t>(c)];
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return chain;
}

void write_summary_json(const std::filesystem::path& path, const PosteriorChain& chain) {
  ojson j;
  j["burn_in"] = chain.burn_in;
  j["keep"] = chain.draws();
  j["seed"] = chain.seed;
  ojson params = ojson::object();
  for (const auto& s : summarize(chain)) {
    params[s.name] = {{"mean", s.mean},   {"sd", s.sd},   {"q2.5", s.q025},
                      {"q50", s.q50},     {"q97.5", s.q975}, {"inefficiency_factor", s.inefficiency}};
  }
  j["parameters"] = std::move(params);
  ojson blocks = ojson::array();
  for (const auto& b : chain.blocks) {
    blocks.push_back({{"block", b.label}, {"acceptance_rate", b.acceptance_rate}, {"step_size", b.step_size}});
  }
  j["blocks"] = std::move(blocks);
  write_text(path, j.dump(2) + "\n");
}

void write_surface_csv(const std::filesystem::path& path, const IntensitySurface& surface) {
  auto out = open_out(path);
  out << "cell_id,mean,sd,lo95,hi95\n";
  for (Eigen::Index k = 0; k < surface.mean.size(); ++k) {
    out << k << ',' << format_double(surface.mean[k]) << ',' << format_double(surface.sd[k]) << ','
        << format_double(surface.lo95[k]) << ',' << format_double(surface.hi95[k]) << '\n';
  }
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const auto n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace odpp
