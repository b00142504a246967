#include "lsm/terrain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <queue>

#include "lsm/error.hpp"
#include "lsm/parallel.hpp"

namespace lsm::terrain {
namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kDegToRad = std::numbers::pi / 180.0;

void require_window(const Grid& dem) {
  if (dem.nrows() < 3 || dem.ncols() < 3) throw DataError("terrain: DEM must be at least 3x3");
}

// The 3x3 neighbourhood around an interior cell:
//   z[0] z[1] z[2]     NW N NE
//   z[3] z[4] z[5]  =   W C  E
//   z[6] z[7] z[8]     SW S SE
bool window(const Grid& dem, std::size_t r, std::size_t c, double (&z)[9]) {
  if (r == 0 || c == 0 || r + 1 >= dem.nrows() || c + 1 >= dem.ncols()) return false;
  int k = 0;
  for (std::size_t rr = r - 1; rr <= r + 1; ++rr) {
    for (std::size_t cc = c - 1; cc <= c + 1; ++cc) {
      const double v = dem.at(rr, cc);
      if (v == dem.nodata()) return false;
      z[k++] = v;
    }
  }
  return true;
}

struct Gradient {
  double dx;  // dz/d(east)
  double dy;  // dz/d(north)
};

Gradient horn(const double (&z)[9], double cs) {
  return {((z[2] + 2.0 * z[5] + z[8]) - (z[0] + 2.0 * z[3] + z[6])) / (8.0 * cs),
          ((z[0] + 2.0 * z[1] + z[2]) - (z[6] + 2.0 * z[7] + z[8])) / (8.0 * cs)};
}

template <typename Fn>
Grid per_cell(const Grid& dem, Fn&& fn) {
  require_window(dem);
  Grid out = Grid::like(dem, dem.nodata());
  parallel_for(dem.nrows(), [&](std::size_t r) {
    double z[9];
    for (std::size_t c = 0; c < dem.ncols(); ++c) {
      if (window(dem, r, c, z)) out.at(r, c) = fn(z);
    }
  });
  return out;
}

template <typename Fn>
Grid pointwise(const Grid& a, const Grid& b, std::string_view what, Fn&& fn) {
  require_aligned(a, b, what);
  Grid out = Grid::like(a, a.nodata());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.is_nodata(i) || b.is_nodata(i)) continue;
    if (auto v = fn(a[i], b[i])) out[i] = *v;
  }
  return out;
}

}  // namespace

Grid slope(const Grid& dem) {
  const double cs = dem.cellsize();
  return per_cell(dem, [cs](const double (&z)[9]) {
    const auto g = horn(z, cs);
    return std::atan(std::hypot(g.dx, g.dy)) * kRadToDeg;
  });
}

Grid aspect(const Grid& dem) {
  const double cs = dem.cellsize();
  const double nodata = dem.nodata();
  return per_cell(dem, [cs, nodata](const double (&z)[9]) {
    const auto g = horn(z, cs);
    if (g.dx == 0.0 && g.dy == 0.0) return nodata;
    double az = std::atan2(-g.dx, -g.dy) * kRadToDeg;
    if (az < 0.0) az += 360.0;
    if (az >= 360.0) az -= 360.0;
    return az;
  });
}

Curvatures curvatures(const Grid& dem) {
  require_window(dem);
  const double cs = dem.cellsize();
  Curvatures out{Grid::like(dem, dem.nodata()), Grid::like(dem, dem.nodata())};
  parallel_for(dem.nrows(), [&](std::size_t r) {
    double z[9];
    for (std::size_t c = 0; c < dem.ncols(); ++c) {
      if (!window(dem, r, c, z)) continue;
      const double zx = (z[5] - z[3]) / (2.0 * cs);
      const double zy = (z[1] - z[7]) / (2.0 * cs);
      const double zxx = (z[3] - 2.0 * z[4] + z[5]) / (cs * cs);
      const double zyy = (z[1] - 2.0 * z[4] + z[7]) / (cs * cs);
      const double zxy = (z[2] - z[0] - z[8] + z[6]) / (4.0 * cs * cs);
      const double g2 = zx * zx + zy * zy;
      if (g2 == 0.0) {
        out.plan.at(r, c) = 0.0;
        out.profile.at(r, c) = 0.0;
        continue;
      }
      out.profile.at(r, c) = -(zxx * zx * zx + 2.0 * zxy * zx * zy + zyy * zy * zy) / g2;
      out.plan.at(r, c) = (zxx * zy * zy - 2.0 * zxy * zx * zy + zyy * zx * zx) / g2;
    }
  });
  return out;
}

namespace {

constexpr int kDr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

struct FloodResult {
  std::vector<double> filled;
  std::vector<std::ptrdiff_t> parent;  // cell that flooded this one, -1 for seeds
};

// Priority-flood (Barnes et al. style). Seeds are edge cells and cells next to
// nodata; ties in the queue are broken by cell index so results are stable.
FloodResult flood(const Grid& dem) {
  const std::size_t nr = dem.nrows(), nc = dem.ncols();
  FloodResult res{std::vector<double>(dem.values().begin(), dem.values().end()),
                  std::vector<std::ptrdiff_t>(dem.size(), -1)};
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  std::vector<char> closed(dem.size(), 0);
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c) {
      const std::size_t i = r * nc + c;
      if (dem.is_nodata(i)) {
        closed[i] = 1;
        continue;
      }
      bool seed = r == 0 || c == 0 || r + 1 == nr || c + 1 == nc;
      for (int k = 0; k < 8 && !seed; ++k) {
        seed = dem.is_nodata(static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r) + kDr[k]),
                             static_cast<std::size_t>(static_cast<std::ptrdiff_t>(c) + kDc[k]));
      }
      if (seed) {
        closed[i] = 1;
        open.emplace(dem[i], i);
      }
    }
  }
  while (!open.empty()) {
    const auto [z, i] = open.top();
    open.pop();
    const auto r = static_cast<std::ptrdiff_t>(i / nc), c = static_cast<std::ptrdiff_t>(i % nc);
    for (int k = 0; k < 8; ++k) {
      const auto rr = r + kDr[k], cc = c + kDc[k];
      if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(nr) || cc >= static_cast<std::ptrdiff_t>(nc)) continue;
      const auto j = static_cast<std::size_t>(rr) * nc + static_cast<std::size_t>(cc);
      if (closed[j]) continue;
      closed[j] = 1;
      res.filled[j] = std::max(res.filled[j], z);
      res.parent[j] = static_cast<std::ptrdiff_t>(i);
      open.emplace(res.filled[j], j);
    }
  }
  return res;
}

}  // namespace

Grid fill_depressions(const Grid& dem) {
  auto res = flood(dem);
  return Grid(dem.ncols(), dem.nrows(), dem.xllcorner(), dem.yllcorner(), dem.cellsize(), dem.nodata(),
              std::move(res.filled));
}

std::vector<std::ptrdiff_t> d8_receivers(const Grid& dem) {
  const std::size_t nr = dem.nrows(), nc = dem.ncols();
  const auto res = flood(dem);
  std::vector<std::ptrdiff_t> recv(dem.size(), -1);
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c) {
      const std::size_t i = r * nc + c;
      if (dem.is_nodata(i)) continue;
      double best = 0.0;
      std::ptrdiff_t target = -1;
      for (int k = 0; k < 8; ++k) {
        const auto rr = static_cast<std::ptrdiff_t>(r) + kDr[k], cc = static_cast<std::ptrdiff_t>(c) + kDc[k];
        if (rr < 0 || cc < 0 || rr >= static_cast<std::ptrdiff_t>(nr) || cc >= static_cast<std::ptrdiff_t>(nc)) continue;
        const auto j = static_cast<std::size_t>(rr) * nc + static_cast<std::size_t>(cc);
        if (dem.is_nodata(j)) continue;
        const double dist = (kDr[k] != 0 && kDc[k] != 0) ? std::numbers::sqrt2 : 1.0;
        const double drop = (res.filled[i] - res.filled[j]) / dist;
        if (drop > best) {
          best = drop;
          target = static_cast<std::ptrdiff_t>(j);
        }
      }
      recv[i] = target >= 0 ? target : res.parent[i];
    }
  }
  return recv;
}

Grid flow_accumulation(const Grid& dem) {
  const auto recv = d8_receivers(dem);
  const std::size_t n = dem.size();
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (recv[i] >= 0) ++indegree[static_cast<std::size_t>(recv[i])];
  }
  std::vector<double> count(n, 0.0);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < n; ++i) {
    if (!dem.is_nodata(i)) count[i] = 1.0;
    if (!dem.is_nodata(i) && indegree[i] == 0) stack.push_back(i);
  }
  std::size_t processed = 0;
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    ++processed;
    if (recv[i] < 0) continue;
    const auto j = static_cast<std::size_t>(recv[i]);
    count[j] += count[i];
    if (--indegree[j] == 0) stack.push_back(j);
  }
  Grid out = Grid::like(dem, dem.nodata());
  for (std::size_t i = 0; i < n; ++i) {
    if (!dem.is_nodata(i)) out[i] = count[i] * dem.cellsize();
  }
  return out;
}

Grid spi(const Grid& catchment, const Grid& slope_deg) {
  return pointwise(catchment, slope_deg, "spi", [](double a, double b) -> std::optional<double> {
    return a * std::tan(b * kDegToRad);
  });
}

Grid sti(const Grid& catchment, const Grid& slope_deg) {
  return pointwise(catchment, slope_deg, "sti", [](double a, double b) -> std::optional<double> {
    return std::pow(a / 22.13, 0.6) * std::pow(std::sin(b * kDegToRad) / 0.0896, 1.3);
  });
}

Grid twi(const Grid& catchment, const Grid& slope_deg, TwiVariant variant) {
  return pointwise(catchment, slope_deg, "twi", [variant](double a, double b) -> std::optional<double> {
    const double denom = variant == TwiVariant::kSlopeDegrees ? b : std::tan(b * kDegToRad);
    if (a <= 0.0 || denom <= 0.0) return std::nullopt;
    return std::log(a / denom);
  });
}

}  // namespace lsm::terrain
