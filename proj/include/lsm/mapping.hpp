#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lsm/dataset.hpp"
#include "lsm/grid.hpp"
#include "lsm/models.hpp"
#include "lsm/selection.hpp"

namespace lsm {

/// Probability of class 1 for every cell. `norm` holds one entry per selected
/// factor (in mask order). Cells with nodata in any selected factor stay
/// nodata. Rows are processed in blocks of `block_rows`.
Grid score_raster(const FittedModel& model, const FactorStack& stack, const FactorMask& mask,
                  std::span<const NormStat> norm, std::size_t block_rows = 64);

inline const std::array<const char*, 5> kClassLabels{"very low", "low", "moderate", "high", "very high"};

struct BreaksResult {
  std::vector<double> breaks;  ///< k-1 ascending upper bounds of classes 1..k-1
  double objective = 0.0;      ///< within-class sum of squared deviations
  std::size_t sample_size = 0;
};

/// Exact Fisher-Jenks partition of `values` into k classes. Lists longer than
/// max_sample are replaced by a seeded uniform subsample of that size.
BreaksResult jenks_breaks(std::span<const double> values, std::size_t k = 5, std::size_t max_sample = 100000,
                          std::uint64_t seed = 0);

/// Sum over classes of squared deviations from the class mean, for sorted
/// values split at the given break values (value <= break stays below).
double jenks_objective(std::span<const double> sorted, std::span<const double> breaks);

/// Class index of a value: 1 + number of breaks strictly below it.
int classify_value(double v, std::span<const double> breaks);

/// Integer class grid (1 = very low); nodata propagates.
Grid classify_raster(const Grid& prob, const BreaksResult& breaks);

struct ClassStatistics {
  std::vector<double> non_slide_pct;  ///< share of non-landslide cells per class
  std::vector<double> slide_pct;      ///< share of landslide cells per class
  std::vector<std::size_t> non_slide_cells;
  std::vector<std::size_t> slide_cells;
};

/// Per-class percentages of landslide and non-landslide cells. Every valid
/// cell that is not a landslide cell counts as non-landslide.
ClassStatistics class_statistics(const Grid& classes, std::span<const CellIndex> slides, std::size_t k = 5);

}  // namespace lsm
