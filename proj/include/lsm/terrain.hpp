#pragma once

#include <cstddef>
#include <vector>

#include "lsm/grid.hpp"

namespace lsm::terrain {

/// Slope in degrees from Horn's 3x3 gradient. Border cells and cells with a
/// nodata neighbour are nodata. Throws DataError for grids smaller than 3x3.
Grid slope(const Grid& dem);

/// Azimuth of steepest descent in degrees, clockwise from north, in [0, 360).
/// Cells with an exactly zero gradient are nodata.
Grid aspect(const Grid& dem);

struct Curvatures {
  Grid plan;
  Grid profile;
};

/// Zevenbergen-Thorne plan and profile curvature (1/m). Convex-upward
/// profiles are positive; cells with zero gradient get 0.
Curvatures curvatures(const Grid& dem);

/// Priority-flood depression filling: every cell is raised to its spill
/// elevation so that each cell has a non-ascending path to the grid edge.
Grid fill_depressions(const Grid& dem);

/// D8 receiver of every cell after depression filling (index into the grid),
/// or -1 for outlets and nodata cells. Flats drain along the flood order.
std::vector<std::ptrdiff_t> d8_receivers(const Grid& dem);

/// Specific catchment area: (upstream cells including self) * cellsize^2 /
/// cellsize, from D8 routing over the filled DEM.
Grid flow_accumulation(const Grid& dem);

/// SPI = a * tan(slope).
Grid spi(const Grid& catchment, const Grid& slope_deg);

/// STI = (a / 22.13)^0.6 * (sin(slope) / 0.0896)^1.3.
Grid sti(const Grid& catchment, const Grid& slope_deg);

enum class TwiVariant {
  kSlopeDegrees,  ///< ln(a / slope) with slope in degrees
  kTanSlope,      ///< ln(a / tan(slope))
};

/// Wetness index. Cells where a = 0 or the slope term is 0 become nodata.
Grid twi(const Grid& catchment, const Grid& slope_deg, TwiVariant variant = TwiVariant::kSlopeDegrees);

}  // namespace lsm::terrain
