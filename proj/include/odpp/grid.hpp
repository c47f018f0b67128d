#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "odpp/errors.hpp"

namespace odpp {

/// Planar location in kilometres.
using Point = Eigen::Vector2d;

struct BBox {
  double xmin = 0.0;
  double xmax = 1.0;
  double ymin = 0.0;
  double ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  bool contains(const Point& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }
};

/// Ordered point locations. `cell_ids` is filled only for patterns whose
/// cells come from a membership table; it is then parallel to `points`.
struct PointPattern {
  std::vector<Point> points;
  std::string region_id;
  std::vector<int> cell_ids;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct GridCell {
  int id = 0;
  Point representative = Point::Zero();
  double raw_area = 0.0;
  /// raw_area / sum(raw_area); the standardized areas sum to one.
  double std_area = 0.0;
  /// Cell rectangle; present for regular grids only.
  std::optional<BBox> bounds;
};

/// K disjoint cells over the study region together with the lookup that maps
/// points to cells. Immutable after construction.
class GridSpec {
 public:
  enum class Kind { Regular, Membership };

  GridSpec() = default;

  Kind kind() const { return kind_; }
  int size() const { return static_cast<int>(cells_.size()); }
  const std::vector<GridCell>& cells() const { return cells_; }
  const GridCell& cell(int k) const { return cells_.at(static_cast<std::size_t>(k)); }
  const BBox& bbox() const { return bbox_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }

  /// Regular grids: cell containing p under the half-open tie rule, or
  /// nullopt when p is outside the bounding box.
  std::optional<int> locate(const Point& p) const;
  /// Cell whose representative point is closest to p (lowest index on ties).
  int nearest_cell(const Point& p) const;

  /// K x 2 matrix of representative points.
  Eigen::MatrixX2d representative_points() const;
  std::vector<Point> representative_list() const;
  Eigen::VectorXd std_areas() const;

  /// Uniform location inside cell k. Membership cells carry no geometry and throw.
  template <class Rng>
  Point sample_in_cell(int k, Rng& rng) const;

  friend GridSpec build_regular_grid(const BBox& bbox, int nx, int ny);
  friend GridSpec grid_from_membership(std::span<const int> cell_ids,
                                       std::span<const Point> points,
                                       std::span<const double> areas,
                                       std::optional<std::vector<Point>> representatives);

 private:
  Kind kind_ = Kind::Regular;
  std::vector<GridCell> cells_;
  BBox bbox_;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<double> x_edges_;
  std::vector<double> y_edges_;
};

/// nx * ny equal rectangles, cell index k = iy * nx + ix.
GridSpec build_regular_grid(const BBox& bbox, int nx, int ny);

/// Grid whose cells are administrative blocks given as a point -> cell
/// membership table. Representative points default to the centroid of the
/// member points of each cell.
GridSpec grid_from_membership(std::span<const int> cell_ids, std::span<const Point> points,
                              std::span<const double> areas,
                              std::optional<std::vector<Point>> representatives = std::nullopt);

/// Per-cell point counts n_k. Throws DataError naming the first point that
/// cannot be assigned.
Eigen::VectorXi assign_counts(const PointPattern& pattern, const GridSpec& grid);

/// Cell index of each point, same rules as assign_counts.
std::vector<int> assign_cells(const PointPattern& pattern, const GridSpec& grid);

template <class Rng>
Point GridSpec::sample_in_cell(int k, Rng& rng) const {
  const auto& b = cell(k).bounds;
  if (!b) throw GeometryError("cell " + std::to_string(k) + " has no geometry to sample from");
  return Point(rng.uniform(b->xmin, b->xmax), rng.uniform(b->ymin, b->ymax));
}

}  // namespace odpp
