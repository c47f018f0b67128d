#include "odpp/pairs.hpp"

#include "odpp/errors.hpp"

namespace odpp {

std::size_t PairedPattern::complete_count() const {
  std::size_t n = 0;
  for (const auto& r : recoveries) n += r.has_value() ? 1 : 0;
  return n;
}

std::vector<std::size_t> PairedPattern::complete_indices() const {
  if (recoveries.size() != thefts.size()) throw DimensionError("thefts and recoveries differ in length");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < recoveries.size(); ++i) {
    if (recoveries[i]) out.push_back(i);
  }
  return out;
}

PairedPattern PairedPattern::complete() const { return subset(complete_indices()); }

PairedPattern PairedPattern::subset(const std::vector<std::size_t>& indices) const {
  PairedPattern out;
  out.region_id = region_id;
  out.thefts.reserve(indices.size());
  out.recoveries.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= thefts.size()) throw DimensionError("pair index out of range");
    out.thefts.push_back(thefts[i]);
    out.recoveries.push_back(recoveries.at(i));
  }
  return out;
}

PointPattern PairedPattern::theft_pattern() const {
  PointPattern p;
  p.points = thefts;
  p.region_id = region_id;
  return p;
}

}  // namespace odpp
