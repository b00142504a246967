#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsm/grid.hpp"
#include "lsm/matrix.hpp"

namespace lsm {

struct MapPoint {
  double x = 0.0;
  double y = 0.0;
};

/// Landslide locations in map units.
struct Inventory {
  std::vector<MapPoint> points;
};

/// Reads the inventory CSV (header `x,y`).
Inventory read_inventory_csv(const std::string& path);
Inventory parse_inventory_csv(std::string_view text);

struct CellIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Maps inventory points to grid cells, collapsing duplicates (first
/// occurrence order kept). Throws DataError for points outside the extent.
std::vector<CellIndex> inventory_cells(const Inventory& inventory, const Grid& reference);

struct NormStat {
  double mean = 0.0;
  double sd = 1.0;
};

/// Binary-labelled samples: one row per cell, one column per factor.
struct SampleTable {
  Matrix features;
  std::vector<int> labels;
  std::vector<CellIndex> coords;
  std::vector<std::string> factor_names;
  /// Optional per-factor flag; categorical factors keep native categories in
  /// information-gain ranking.
  std::vector<bool> categorical;
  /// Set once the table has been normalized.
  std::optional<std::vector<NormStat>> normalization;

  std::size_t rows() const { return labels.size(); }
  std::size_t factors() const { return factor_names.size(); }
  bool is_categorical(std::size_t j) const { return j < categorical.size() && categorical[j]; }
};

/// Subset of rows (labels/coords follow).
SampleTable select_rows(const SampleTable& table, std::span<const std::size_t> rows);

/// CSV with header `label,x_cell,y_cell,<factor names>`; x is the column.
std::string write_sample_csv(const SampleTable& table);
SampleTable parse_sample_csv(std::string_view text);
SampleTable read_sample_csv(const std::string& path);

struct NegativeSampling {
  double oversample_ratio = 3.5;
  double min_dist_to_slide = 1000.0;
  std::size_t knn_k = 5;
  double knn_total_max = 3000.0;
};

/// Draws non-landslide cells: oversample candidates, drop those closer than
/// min_dist_to_slide to any landslide, drop isolated candidates whose k
/// nearest candidate neighbours are more than knn_total_max away in total,
/// then keep as many as there are landslide cells. If too few survive, the
/// isolation limit is doubled once before giving up.
std::vector<CellIndex> sample_non_landslides(const std::vector<CellIndex>& slides, const FactorStack& stack,
                                             std::uint64_t seed, const NegativeSampling& opts = {});

struct ExtractResult {
  SampleTable table;
  std::size_t dropped = 0;  ///< rows removed because some factor was nodata
};

/// One row per landslide (label 1) then per negative (label 0); rows touching
/// nodata are dropped and counted.
ExtractResult extract_samples(const std::vector<CellIndex>& slides, const std::vector<CellIndex>& negatives,
                              const FactorStack& stack);

struct SplitRatios {
  double train = 0.70;
  double valid = 0.15;
  double test = 0.15;
};

struct SplitSpec {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> valid_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t seed = 0;
};

/// Stratified train/validation/test split; sizes round(0.7n), round(0.15n),
/// remainder. Index lists are sorted ascending. Requires n >= 10.
SplitSpec split(std::span<const int> labels, std::uint64_t seed, const SplitRatios& ratios = {});

/// Stratified k folds, near-equal sizes, each sorted ascending.
std::vector<std::vector<std::size_t>> kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

/// z-scores every factor with mean / population sd from `stats_from` rows.
/// Zero-variance factors map to 0. The statistics are kept on the table.
SampleTable normalize(const SampleTable& table, std::span<const std::size_t> stats_from);

/// Applies stored statistics to a single factor value.
inline double apply_norm(const NormStat& s, double v) { return s.sd > 0.0 ? (v - s.mean) / s.sd : 0.0; }

}  // namespace lsm
