#include "odpp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "odpp/errors.hpp"

namespace odpp {

namespace {

// Index of the half-open interval [e_j, e_{j+1}) holding v; the last interval
// is closed. Edges are the stored ones so boundary points land consistently.
std::optional<int> interval_index(const std::vector<double>& edges, double v) {
  const int n = static_cast<int>(edges.size()) - 1;
  if (!(v >= edges.front() && v <= edges.back())) return std::nullopt;
  const double span = edges.back() - edges.front();
  int j = static_cast<int>(std::floor((v - edges.front()) / span * n));
  j = std::clamp(j, 0, n - 1);
  while (j > 0 && v < edges[j]) --j;
  while (j < n - 1 && v >= edges[j + 1]) ++j;
  return j;
}

std::vector<double> edges(double lo, double hi, int n) {
  std::vector<double> e(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) e[j] = lo + (hi - lo) * static_cast<double>(j) / n;
  e.back() = hi;
  return e;
}

void normalize_areas(std::vector<GridCell>& cells) {
  double total = 0.0;
  for (const auto& c : cells) total += c.raw_area;
  for (auto& c : cells) c.std_area = c.raw_area / total;
}

}  // namespace

GridSpec build_regular_grid(const BBox& bbox, int nx, int ny) {
  if (nx < 1 || ny < 1) throw GeometryError("grid dimensions must be at least 1x1");
  if (!(std::isfinite(bbox.xmin) && std::isfinite(bbox.xmax) && std::isfinite(bbox.ymin) &&
        std::isfinite(bbox.ymax))) {
    throw GeometryError("bounding box must be finite");
  }
  if (!(bbox.width() > 0.0) || !(bbox.height() > 0.0)) {
    throw GeometryError("degenerate bounding box (zero width or height)");
  }
  GridSpec g;
  g.kind_ = GridSpec::Kind::Regular;
  g.bbox_ = bbox;
  g.nx_ = nx;
  g.ny_ = ny;
  g.x_edges_ = edges(bbox.xmin, bbox.xmax, nx);
  g.y_edges_ = edges(bbox.ymin, bbox.ymax, ny);
  const double area = bbox.width() * bbox.height() / (static_cast<double>(nx) * ny);
  g.cells_.reserve(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      GridCell c;
      c.id = iy * nx + ix;
      BBox b{g.x_edges_[ix], g.x_edges_[ix + 1], g.y_edges_[iy], g.y_edges_[iy + 1]};
      c.representative = Point(0.5 * (b.xmin + b.xmax), 0.5 * (b.ymin + b.ymax));
      c.raw_area = area;
      c.bounds = b;
      g.cells_.push_back(c);
    }
  }
  // Equal cells: assign 1/K directly rather than dividing accumulated sums.
  for (auto& c : g.cells_) c.std_area = 1.0 / static_cast<double>(g.cells_.size());
  return g;
}

GridSpec grid_from_membership(std::span<const int> cell_ids, std::span<const Point> points,
                              std::span<const double> areas,
                              std::optional<std::vector<Point>> representatives) {
  const int k_cells = static_cast<int>(areas.size());
  if (k_cells == 0) throw GeometryError("membership grid needs at least one cell");
  if (cell_ids.size() != points.size()) {
    throw DimensionError("membership table and point list differ in length");
  }
  for (int k = 0; k < k_cells; ++k) {
    if (!(areas[k] > 0.0) || !std::isfinite(areas[k])) {
      throw GeometryError("cell " + std::to_string(k) + " has nonpositive area");
    }
  }
  std::vector<Point> sums(static_cast<std::size_t>(k_cells), Point::Zero());
  std::vector<int> members(static_cast<std::size_t>(k_cells), 0);
  for (std::size_t i = 0; i < cell_ids.size(); ++i) {
    const int id = cell_ids[i];
    if (id < 0 || id >= k_cells) {
      throw DataError("point " + std::to_string(i) + " refers to missing cell id " +
                      std::to_string(id));
    }
    sums[id] += points[i];
    ++members[id];
  }
  if (representatives && static_cast<int>(representatives->size()) != k_cells) {
    throw DimensionError("representative point list must have one entry per cell");
  }

  GridSpec g;
  g.kind_ = GridSpec::Kind::Membership;
  g.cells_.resize(static_cast<std::size_t>(k_cells));
  for (int k = 0; k < k_cells; ++k) {
    auto& c = g.cells_[k];
    c.id = k;
    c.raw_area = areas[k];
    if (representatives) {
      c.representative = (*representatives)[k];
    } else if (members[k] > 0) {
      c.representative = sums[k] / members[k];
    } else {
      throw GeometryError("cell " + std::to_string(k) +
                          " has no member points and no representative point");
    }
  }
  normalize_areas(g.cells_);

  for (int a = 0; a < k_cells; ++a) {
    for (int b = a + 1; b < k_cells; ++b) {
      if (g.cells_[a].representative == g.cells_[b].representative) {
        throw GeometryError("cells " + std::to_string(a) + " and " + std::to_string(b) +
                            " share a representative point");
      }
    }
  }
  BBox box{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
           std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  auto grow = [&box](const Point& p) {
    box.xmin = std::min(box.xmin, p.x());
    box.xmax = std::max(box.xmax, p.x());
    box.ymin = std::min(box.ymin, p.y());
    box.ymax = std::max(box.ymax, p.y());
  };
  for (const auto& c : g.cells_) grow(c.representative);
  for (const auto& p : points) grow(p);
  g.bbox_ = box;
  return g;
}

std::optional<int> GridSpec::locate(const Point& p) const {
  if (kind_ != Kind::Regular) return std::nullopt;
  const auto ix = interval_index(x_edges_, p.x());
  const auto iy = interval_index(y_edges_, p.y());
  if (!ix || !iy) return std::nullopt;
  return *iy * nx_ + *ix;
}

int GridSpec::nearest_cell(const Point& p) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int k = 0; k < size(); ++k) {
    const double d = (cells_[k].representative - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

Eigen::MatrixX2d GridSpec::representative_points() const {
  Eigen::MatrixX2d m(size(), 2);
  for (int k = 0; k < size(); ++k) m.row(k) = cells_[k].representative.transpose();
  return m;
}

std::vector<Point> GridSpec::representative_list() const {
  std::vector<Point> out;
  out.reserve(cells_.size());
  for (const auto& c : cells_) out.push_back(c.representative);
  return out;
}

Eigen::VectorXd GridSpec::std_areas() const {
  Eigen::VectorXd a(size());
  for (int k = 0; k < size(); ++k) a[k] = cells_[k].std_area;
  return a;
}

std::vector<int> assign_cells(const PointPattern& pattern, const GridSpec& grid) {
  std::vector<int> out(pattern.size());
  if (grid.kind() == GridSpec::Kind::Membership) {
    if (pattern.cell_ids.size() != pattern.size()) {
      throw DataError("membership grid requires a cell id for every point (" +
                      std::to_string(pattern.cell_ids.size()) + " ids for " +
                      std::to_string(pattern.size()) + " points)");
    }
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      const int id = pattern.cell_ids[i];
      if (id < 0 || id >= grid.size()) {
        throw DataError("point " + std::to_string(i) + " has cell id " + std::to_string(id) +
                        " outside the grid");
      }
      out[i] = id;
    }
    return out;
  }
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const Point& p = pattern.points[i];
    const auto k = grid.locate(p);
    if (!k) {
      throw DataError("point " + std::to_string(i) + " at (" + std::to_string(p.x()) + ", " +
                      std::to_string(p.y()) + ") lies outside the grid");
    }
    out[i] = *k;
  }
  return out;
}

Eigen::VectorXi assign_counts(const PointPattern& pattern, const GridSpec& grid) {
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(grid.size());
  for (int k : assign_cells(pattern, grid)) ++counts[k];
  return counts;
}

}  // namespace odpp
