#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "lsm/dataset.hpp"
#include "lsm/grid.hpp"

namespace lsm {

/// Factors whose sum drives the label of the selection benchmark.
inline const std::vector<std::size_t> kBenchmarkInformative{1, 3, 6, 8};

/// n rows of 10 standard-normal factors f0..f9; label = [sum of the
/// informative factors + noise_sd * e > 0].
SampleTable synthetic_benchmark(std::size_t n, std::uint64_t seed, double noise_sd = 1.0);

/// Inputs for a desk-scale end-to-end run.
struct SyntheticScene {
  Grid dem;
  Grid fault_mask;   ///< 1 on fault cells, 0 elsewhere
  Grid road_mask;
  Grid stream_mask;
  Inventory inventory;
};

/// Smooth random terrain with streams from flow accumulation, straight roads
/// and faults, and landslides drawn where slope is steep near streams.
SyntheticScene synthetic_scene(std::size_t nrows, std::size_t ncols, double cellsize, std::size_t n_slides,
                               std::uint64_t seed);

}  // namespace lsm
