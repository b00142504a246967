#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "lsm/error.hpp"
#include "lsm/terrain.hpp"

using namespace lsm;

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

// Row 0 is north, so map y grows as the row index falls.
template <typename F>
Grid surface(std::size_t n, double cs, F f) {
  Grid g(n, n, 0.0, 0.0, cs, -9999.0, std::vector<double>(n * n));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) g.at(r, c) = f(c * cs, (n - 1 - r) * cs);
  }
  return g;
}

bool interior(const Grid& g, std::size_t r, std::size_t c) {
  return r > 0 && c > 0 && r + 1 < g.nrows() && c + 1 < g.ncols();
}

// Trace each cell downstream through the receiver list and count visits.
std::vector<double> traced_counts(const std::vector<std::ptrdiff_t>& recv) {
  std::vector<double> count(recv.size(), 0.0);
  for (std::size_t s = 0; s < recv.size(); ++s) {
    std::ptrdiff_t i = static_cast<std::ptrdiff_t>(s);
    std::size_t guard = 0;
    while (i >= 0) {
      count[static_cast<std::size_t>(i)] += 1;
      i = recv[static_cast<std::size_t>(i)];
      if (++guard > recv.size()) throw std::runtime_error("cycle");
    }
  }
  return count;
}

}  // namespace

TEST(Terrain, ConstantDemIsFlat) {
  const auto dem = surface(5, 10, [](double, double) { return 3.0; });
  const auto s = terrain::slope(dem);
  const auto a = terrain::aspect(dem);
  const auto cv = terrain::curvatures(dem);
  for (std::size_t r = 1; r < 4; ++r) {
    for (std::size_t c = 1; c < 4; ++c) {
      EXPECT_EQ(s.at(r, c), 0.0);
      EXPECT_TRUE(a.is_nodata(r, c));
      EXPECT_EQ(cv.plan.at(r, c), 0.0);
      EXPECT_EQ(cv.profile.at(r, c), 0.0);
    }
  }
  EXPECT_TRUE(s.is_nodata(0, 0));
}

TEST(Terrain, PlaneSlopes) {
  const auto s45 = terrain::slope(surface(5, 1, [](double x, double) { return x; }));
  EXPECT_NEAR(s45.at(2, 2), 45.0, 1e-12);
  const auto s30 = terrain::slope(surface(5, 1, [](double x, double) { return std::tan(30.0 / kDeg) * x; }));
  EXPECT_NEAR(s30.at(2, 2), 30.0, 1e-6);
}

TEST(Terrain, AspectConvention) {
  const auto east = terrain::aspect(surface(5, 1, [](double x, double) { return -x; }));
  EXPECT_NEAR(east.at(2, 2), 90.0, 1e-9);
  const auto north = terrain::aspect(surface(5, 1, [](double, double y) { return -y; }));
  EXPECT_NEAR(north.at(2, 2), 0.0, 1e-9);
  const auto sw = terrain::aspect(surface(5, 1, [](double x, double y) { return x + y; }));
  EXPECT_NEAR(sw.at(2, 2), 225.0, 1e-9);
}

TEST(Terrain, TooSmallGridRejected) {
  EXPECT_THROW(terrain::slope(surface(2, 1, [](double, double) { return 0.0; })), DataError);
}

TEST(Terrain, BowlHasNegativeProfileCurvature) {
  const auto cv = terrain::curvatures(surface(9, 1, [](double x, double y) {
    return (x - 4.3) * (x - 4.3) + (y - 3.8) * (y - 3.8);
  }));
  EXPECT_LT(cv.profile.at(2, 2), 0.0);
  // Profile curvature of a paraboloid along the gradient is -2 (up to sign convention).
  EXPECT_NEAR(cv.profile.at(2, 2), -2.0, 1e-6);
}

TEST(Terrain, QuadraticSurfacesMatchAnalyticDerivatives) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    const double a = u(gen), b = u(gen), c = u(gen), d = u(gen), e = u(gen);
    const double cs = 2.0 + 10.0 * std::abs(u(gen));
    auto f = [&](double x, double y) { return a * x * x + b * y * y + c * x * y + d * 50 * x + e * 50 * y; };
    const auto dem = surface(8, cs, f);
    const auto s = terrain::slope(dem);
    const auto asp = terrain::aspect(dem);
    const auto cv = terrain::curvatures(dem);
    for (std::size_t r = 1; r + 1 < 8; ++r) {
      for (std::size_t col = 1; col + 1 < 8; ++col) {
        const double x = col * cs, y = (7 - r) * cs;
        const double zx = 2 * a * x + c * y + d * 50, zy = 2 * b * y + c * x + e * 50;
        const double zxx = 2 * a, zyy = 2 * b, zxy = c;
        const double g2 = zx * zx + zy * zy;
        const double slope = std::atan(std::sqrt(g2)) * kDeg;
        EXPECT_NEAR(s.at(r, col), slope, 1e-6 * std::max(1.0, slope));
        double az = std::atan2(-zx, -zy) * kDeg;
        if (az < 0) az += 360.0;
        double diff = std::abs(asp.at(r, col) - az);
        diff = std::min(diff, 360.0 - diff);
        EXPECT_LT(diff, 1e-6 * std::max(1.0, az));
        const double prof = -(zxx * zx * zx + 2 * zxy * zx * zy + zyy * zy * zy) / g2;
        const double plan = (zxx * zy * zy - 2 * zxy * zx * zy + zyy * zx * zx) / g2;
        EXPECT_NEAR(cv.profile.at(r, col), prof, 1e-6 * std::max(1.0, std::abs(prof)));
        EXPECT_NEAR(cv.plan.at(r, col), plan, 1e-6 * std::max(1.0, std::abs(plan)));
      }
    }
  }
}

TEST(Terrain, SingleColumnRamp) {
  const std::size_t n = 9;
  const double cs = 5.0;
  Grid dem(1, n, 0, 0, cs, -9999.0, std::vector<double>(n));
  for (std::size_t r = 0; r < n; ++r) dem.at(r, 0) = double(n - r);
  const auto acc = terrain::flow_accumulation(dem);
  EXPECT_DOUBLE_EQ(acc.at(n - 1, 0), n * cs);
  EXPECT_DOUBLE_EQ(acc.at(0, 0), cs);
}

TEST(Terrain, FlowConservesCellsOnRandomDems) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> v(100);
    for (auto& x : v) x = std::round(u(gen));  // integer heights create flats and pits
    if (t % 5 == 0) v[gen() % 100] = -9999.0;
    const Grid dem(10, 10, 0, 0, 2.0, -9999.0, v);
    const auto recv = terrain::d8_receivers(dem);
    const auto traced = traced_counts(recv);
    const auto acc = terrain::flow_accumulation(dem);
    double outlet_total = 0.0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < 100; ++i) {
      if (dem.is_nodata(i)) {
        EXPECT_TRUE(acc.is_nodata(i));
        continue;
      }
      ++valid;
      EXPECT_DOUBLE_EQ(acc[i], traced[i] * 2.0);
      EXPECT_GE(acc[i], dem.cellsize());
      if (recv[i] < 0) outlet_total += acc[i] / 2.0;
    }
    EXPECT_DOUBLE_EQ(outlet_total, double(valid));
  }
}

TEST(Terrain, HydrologicalIndices) {
  Grid a(3, 3, 0, 0, 1, -9999.0, std::vector<double>(9, 100.0));
  Grid s(3, 3, 0, 0, 1, -9999.0, std::vector<double>(9, 30.0));
  s[4] = -9999.0;
  s[5] = 0.0;
  const double t30 = std::tan(30.0 / kDeg);
  const auto spi = terrain::spi(a, s);
  EXPECT_NEAR(spi[0], 100.0 * t30, 1e-12);
  EXPECT_TRUE(spi.is_nodata(4));
  const auto sti = terrain::sti(a, s);
  EXPECT_NEAR(sti[0], std::pow(100.0 / 22.13, 0.6) * std::pow(std::sin(30.0 / kDeg) / 0.0896, 1.3), 1e-9);
  const auto twi = terrain::twi(a, s);
  EXPECT_NEAR(twi[0], std::log(100.0 / 30.0), 1e-12);
  EXPECT_TRUE(twi.is_nodata(5));
  EXPECT_NEAR(terrain::twi(a, s, terrain::TwiVariant::kTanSlope)[0], std::log(100.0 / t30), 1e-12);
}
