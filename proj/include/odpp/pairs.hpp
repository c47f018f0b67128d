#pragma once

#include <optional>
#include <string>
#include <vector>

#include "odpp/grid.hpp"

namespace odpp {

/// Theft locations with optional recovery marks, parallel vectors.
struct PairedPattern {
  std::vector<Point> thefts;
  std::vector<std::optional<Point>> recoveries;
  std::string region_id;

  std::size_t size() const { return thefts.size(); }
  std::size_t complete_count() const;
  /// Indices of pairs whose recovery is observed, ascending.
  std::vector<std::size_t> complete_indices() const;
  /// Complete pairs only.
  PairedPattern complete() const;
  PairedPattern subset(const std::vector<std::size_t>& indices) const;
  PointPattern theft_pattern() const;
};

}  // namespace odpp
