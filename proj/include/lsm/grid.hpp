#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lsm {

/// Single-band raster. Row 0 is the northernmost row; values are row-major.
/// Cells equal to `nodata` (compared exactly) carry no data.
class Grid {
 public:
  Grid() = default;
  /// Throws DataError if the header is invalid or values.size() != nrows*ncols.
  Grid(std::size_t ncols, std::size_t nrows, double xllcorner, double yllcorner,
       double cellsize, double nodata, std::vector<double> values);
  /// Same header as `like`, every cell set to `fill`.
  static Grid like(const Grid& like, double fill);

  std::size_t ncols() const { return ncols_; }
  std::size_t nrows() const { return nrows_; }
  std::size_t size() const { return values_.size(); }
  double xllcorner() const { return xll_; }
  double yllcorner() const { return yll_; }
  double cellsize() const { return cellsize_; }
  double nodata() const { return nodata_; }

  double at(std::size_t row, std::size_t col) const { return values_[row * ncols_ + col]; }
  double& at(std::size_t row, std::size_t col) { return values_[row * ncols_ + col]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool is_nodata(std::size_t i) const { return values_[i] == nodata_; }
  bool is_nodata(std::size_t row, std::size_t col) const { return at(row, col) == nodata_; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// True when both grids share dimensions, corner and cell size.
  bool aligned_with(const Grid& other) const;

  /// Map coordinates of the centre of a cell.
  double cell_center_x(std::size_t col) const { return xll_ + (static_cast<double>(col) + 0.5) * cellsize_; }
  double cell_center_y(std::size_t row) const {
    return yll_ + (static_cast<double>(nrows_ - row) - 0.5) * cellsize_;
  }

 private:
  std::size_t ncols_ = 0;
  std::size_t nrows_ = 0;
  double xll_ = 0.0;
  double yll_ = 0.0;
  double cellsize_ = 1.0;
  double nodata_ = -9999.0;
  std::vector<double> values_;
};

/// Ordered, named collection of aligned grids.
class FactorStack {
 public:
  FactorStack() = default;
  /// Throws DataError on misaligned layers, duplicate/empty names, or p = 0.
  FactorStack(std::vector<std::string> names, std::vector<Grid> layers);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const Grid& layer(std::size_t i) const { return layers_[i]; }
  /// Throws DataError if the name is unknown.
  const Grid& layer(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  const Grid& reference() const { return layers_.front(); }

  /// True if any layer holds nodata at cell i.
  bool any_nodata(std::size_t cell) const;

 private:
  std::vector<std::string> names_;
  std::vector<Grid> layers_;
};

/// Parses an ESRI ASCII grid. Header keys are case-insensitive; xllcenter /
/// yllcenter are converted to corner coordinates. NODATA_value defaults to
/// -9999 when absent. Errors name the offending line and column.
Grid read_ascii_grid(std::string_view text);
Grid read_ascii_grid_file(const std::string& path);

/// Emits the header followed by one row per line; values use up to 10
/// significant digits and nodata cells print the sentinel.
std::string write_ascii_grid(const Grid& grid);
void write_ascii_grid_file(const Grid& grid, const std::string& path);

/// Exact Euclidean distance (map units) from every cell to the nearest cell
/// whose value is 1. Nodata cells stay nodata. Uses the separable
/// lower-envelope squared-distance transform.
Grid distance_transform(const Grid& mask);

/// Throws DataError unless every grid is aligned with the first.
void require_aligned(const Grid& a, const Grid& b, std::string_view what);

}  // namespace lsm
