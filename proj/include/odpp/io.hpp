#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "odpp/covariates.hpp"
#include "odpp/diagnostics.hpp"
#include "odpp/grid.hpp"
#include "odpp/mcmc.hpp"
#include "odpp/pairs.hpp"
#include "odpp/ppm.hpp"

namespace odpp {

/// Coordinate units of an input or output file. Metres are divided by 1000
/// on ingestion; areas in m^2 by 1e6.
enum class Units { Kilometres, Metres };

Units parse_units(const std::string& text);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

/// Minimal comma-separated table: header plus rows of raw fields. Fields are
/// trimmed; quoting is not supported.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// 1-based file line of each row, for error messages.
  std::vector<int> lines;

  /// Column index of `name`; throws DataError when absent.
  int column(const std::string& name) const;
  std::optional<int> find_column(const std::string& name) const;
  /// Parsed double; empty fields throw unless `allow_empty` (then NaN).
  double number(std::size_t row, int col, bool allow_empty = false) const;
  int integer(std::size_t row, int col) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// `id,x,y[,cell_id]`.
PointPattern read_points_csv(const std::filesystem::path& path, Units units);
void write_points_csv(const std::filesystem::path& path, const PointPattern& pattern, Units units);

/// `cell_id,<name>...` with cell ids 0..K-1, each exactly once.
CovariateTable read_covariates_csv(const std::filesystem::path& path, int k_cells);
void write_covariates_csv(const std::filesystem::path& path, const CovariateTable& table);

/// `cell_id,area[,x,y]`: areas plus optional representative points.
struct AreasTable {
  std::vector<double> areas;
  std::optional<std::vector<Point>> representatives;
};
AreasTable read_areas_csv(const std::filesystem::path& path, Units units);

/// `id,theft_x,theft_y,recovery_x,recovery_y`, recovery fields empty when
/// unobserved.
PairedPattern read_pairs_csv(const std::filesystem::path& path, Units units);
void write_pairs_csv(const std::filesystem::path& path, const PairedPattern& pairs, Units units);

/// One JSON object per kept draw: {"draw", "params": {...}, "latent": {...}}.
void write_chain_jsonl(const std::filesystem::path& path, const PosteriorChain& chain);
PosteriorChain read_chain_jsonl(const std::filesystem::path& path);

/// Posterior mean, sd, 2.5/50/97.5 percentiles and inefficiency factor per
/// scalar, plus per-block acceptance rates and step sizes.
void write_summary_json(const std::filesystem::path& path, const PosteriorChain& chain);

/// `cell_id,mean,sd,lo95,hi95`.
void write_surface_csv(const std::filesystem::path& path, const IntensitySurface& surface);

/// 64-bit FNV-1a of a file's bytes.
std::uint64_t fnv1a_file(const std::filesystem::path& path);

/// Writes text atomically enough for our purposes; throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace odpp
