#include "lsm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lsm/error.hpp"
#include "lsm/rng.hpp"
#include "lsm/terrain.hpp"

namespace lsm {

SampleTable synthetic_benchmark(std::size_t n, std::uint64_t seed, double noise_sd) {
  constexpr std::size_t p = 10;
  Rng rng(derive_seed(seed, "benchmark"));
  SampleTable t;
  t.features = Matrix(n, p);
  t.labels.resize(n);
  t.coords.resize(n);
  for (std::size_t j = 0; j < p; ++j) t.factor_names.push_back("f" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) t.features(i, j) = rng.normal();
    double s = noise_sd * rng.normal();
    for (auto j : kBenchmarkInformative) s += t.features(i, j);
    t.labels[i] = s > 0.0 ? 1 : 0;
    t.coords[i] = {i, 0};
  }
  return t;
}

namespace {

void draw_line(Grid& g, double r0, double c0, double r1, double c1) {
  const double len = std::max(std::abs(r1 - r0), std::abs(c1 - c0));
  const auto steps = static_cast<std::size_t>(std::ceil(len)) + 1;
  for (std::size_t s = 0; s <= steps; ++s) {
    const double t = static_cast<double>(s) / static_cast<double>(steps);
    const auto r = std::lround(r0 + t * (r1 - r0)), c = std::lround(c0 + t * (c1 - c0));
    if (r >= 0 && c >= 0 && static_cast<std::size_t>(r) < g.nrows() && static_cast<std::size_t>(c) < g.ncols()) {
      g.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = 1.0;
    }
  }
}

}  // namespace

SyntheticScene synthetic_scene(std::size_t nrows, std::size_t ncols, double cellsize, std::size_t n_slides,
                               std::uint64_t seed) {
  if (nrows < 10 || ncols < 10) throw UsageError("synthetic scene: at least 10x10 cells required");
  Rng rng(derive_seed(seed, "scene"));
  const double nodata = -9999.0;
  SyntheticScene sc;
  sc.dem = Grid(ncols, nrows, 500000.0, 1000000.0, cellsize, nodata, std::vector<double>(nrows * ncols, 0.0));

  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;
  for (int w = 0; w < 6; ++w) {
    const double scale = rng.uniform(2.0, 6.0);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    waves.push_back({scale * std::cos(angle), scale * std::sin(angle), rng.uniform(0.0, 2.0 * std::numbers::pi),
                     rng.uniform(20.0, 60.0) / scale});
  }
  const double tilt_r = rng.uniform(-0.5, 0.5), tilt_c = rng.uniform(-0.5, 0.5);
  for (std::size_t r = 0; r < nrows; ++r) {
    for (std::size_t c = 0; c < ncols; ++c) {
      const double u = static_cast<double>(c) / static_cast<double>(ncols);
      const double v = static_cast<double>(r) / static_cast<double>(nrows);
      double z = 400.0 + tilt_r * static_cast<double>(r) * cellsize * 0.05 + tilt_c * static_cast<double>(c) * cellsize * 0.05;
      for (const auto& w : waves) z += w.amp * cellsize * 0.2 * std::sin(2.0 * std::numbers::pi * (w.kx * u + w.ky * v) + w.phase);
      z += rng.uniform(-0.5, 0.5);
      sc.dem.at(r, c) = z;
    }
  }

  const Grid acc = terrain::flow_accumulation(sc.dem);
  sc.stream_mask = Grid::like(sc.dem, 0.0);
  const double threshold = cellsize * static_cast<double>(std::max<std::size_t>(20, nrows * ncols / 400));
  for (std::size_t i = 0; i < acc.size(); ++i) {
    if (!acc.is_nodata(i) && acc[i] >= threshold) sc.stream_mask[i] = 1.0;
  }
  if (std::none_of(sc.stream_mask.values().begin(), sc.stream_mask.values().end(), [](double v) { return v == 1.0; })) {
    sc.stream_mask[0] = 1.0;
  }

  const double R = static_cast<double>(nrows - 1), C = static_cast<double>(ncols - 1);
  sc.road_mask = Grid::like(sc.dem, 0.0);
  draw_line(sc.road_mask, rng.uniform(0, R), 0, rng.uniform(0, R), C);
  draw_line(sc.road_mask, 0, rng.uniform(0, C), R, rng.uniform(0, C));
  sc.fault_mask = Grid::like(sc.dem, 0.0);
  draw_line(sc.fault_mask, 0, rng.uniform(0, C * 0.3), R, rng.uniform(C * 0.7, C));

  // Susceptibility: steep cells close to streams and faults.
  const Grid sl = terrain::slope(sc.dem);
  const Grid ds = distance_transform(sc.stream_mask);
  const Grid df = distance_transform(sc.fault_mask);
  std::vector<double> weight(sl.size(), 0.0);
  for (std::size_t i = 0; i < sl.size(); ++i) {
    if (sl.is_nodata(i)) continue;
    const double s = 0.15 * sl[i] - ds[i] / (8.0 * cellsize) - df[i] / (40.0 * cellsize);
    weight[i] = std::exp(std::min(s, 30.0));
  }
  // Weighted sampling without replacement: keep the n largest log(u) / w.
  std::vector<std::pair<double, std::size_t>> keys;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    const double u = rng.uniform();
    if (weight[i] > 0.0) keys.emplace_back(std::log(std::max(u, 1e-300)) / weight[i], i);
  }
  if (keys.size() < n_slides) throw DataError("synthetic scene: too few valid cells for the landslides");
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n_slides), keys.end(),
                    [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
  for (std::size_t k = 0; k < n_slides; ++k) {
    const std::size_t r = keys[k].second / ncols, c = keys[k].second % ncols;
    sc.inventory.points.push_back({sc.dem.cell_center_x(c), sc.dem.cell_center_y(r)});
  }
  return sc;
}

}  // namespace lsm
