#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "lsm/error.hpp"
#include "lsm/grid.hpp"

using namespace lsm;

namespace {

Grid make(std::size_t nc, std::size_t nr, std::vector<double> v, double cs = 30.0, double nodata = -9999.0) {
  return Grid(nc, nr, 0.0, 0.0, cs, nodata, std::move(v));
}

// All-pairs nearest feature distance.
Grid brute_distance(const Grid& mask) {
  Grid out = Grid::like(mask, mask.nodata());
  for (std::size_t r = 0; r < mask.nrows(); ++r) {
    for (std::size_t c = 0; c < mask.ncols(); ++c) {
      if (mask.is_nodata(r, c)) continue;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t r2 = 0; r2 < mask.nrows(); ++r2) {
        for (std::size_t c2 = 0; c2 < mask.ncols(); ++c2) {
          if (mask.at(r2, c2) != 1.0) continue;
          const double dr = double(r) - double(r2), dc = double(c) - double(c2);
          best = std::min(best, dr * dr + dc * dc);
        }
      }
      out.at(r, c) = std::sqrt(best) * mask.cellsize();
    }
  }
  return out;
}

}  // namespace

TEST(Grid, ReadsSingleCell) {
  const auto g = read_ascii_grid("ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 10\nNODATA_value -9999\n7.5\n");
  EXPECT_EQ(g.ncols(), 1u);
  EXPECT_EQ(g.nrows(), 1u);
  EXPECT_DOUBLE_EQ(g[0], 7.5);
  EXPECT_DOUBLE_EQ(g.nodata(), -9999.0);
}

TEST(Grid, CountMismatchMessage) {
  try {
    read_ascii_grid("ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 3\n4 5\n");
    FAIL() << "no exception";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("expected 6 values, found 5"), std::string::npos) << e.what();
  }
}

TEST(Grid, NonNumericTokenNamesLineAndColumn) {
  try {
    read_ascii_grid("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 abc\n");
    FAIL() << "no exception";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 7"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column"), std::string::npos) << msg;
  }
}

TEST(Grid, CenterHeaderConvertedToCorner) {
  const auto g = read_ascii_grid("NCOLS 2\nNROWS 1\nXLLCENTER 15\nYLLCENTER 25\nCELLSIZE 10\nnodata_value -1\n1 2\n");
  EXPECT_DOUBLE_EQ(g.xllcorner(), 10.0);
  EXPECT_DOUBLE_EQ(g.yllcorner(), 20.0);
}

TEST(Grid, WriteEmitsNodataSentinel) {
  const auto g = make(2, 1, {0.0, -9999.0});
  const auto text = write_ascii_grid(g);
  EXPECT_NE(text.find("\n0 -9999\n"), std::string::npos) << text;
}

TEST(Grid, RoundTripRandomGrids) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> val(-1e4, 1e4);
  std::uniform_int_distribution<int> dim(1, 12);
  for (int t = 0; t < 100; ++t) {
    const std::size_t nc = dim(gen), nr = dim(gen);
    std::vector<double> v(nc * nr);
    for (auto& x : v) x = gen() % 7 == 0 ? -9999.0 : val(gen);
    const Grid g(nc, nr, val(gen), val(gen), 0.5 + (gen() % 100), -9999.0, v);
    const Grid back = read_ascii_grid(write_ascii_grid(g));
    ASSERT_EQ(back.ncols(), nc);
    ASSERT_EQ(back.nrows(), nr);
    EXPECT_DOUBLE_EQ(back.xllcorner(), g.xllcorner());
    EXPECT_DOUBLE_EQ(back.cellsize(), g.cellsize());
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_NEAR(back[i], v[i], 1e-6 * std::max(1.0, std::abs(v[i])));
    }
  }
}

TEST(Grid, DistanceSimpleCases) {
  std::vector<double> v(9, 0.0);
  v[4] = 1.0;
  const auto d = distance_transform(make(3, 3, v));
  EXPECT_EQ(d.at(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(d.at(0, 1), 30.0);
  EXPECT_NEAR(d.at(0, 0), 30.0 * std::sqrt(2.0), 1e-9);
}

TEST(Grid, DistanceNoFeatureCells) {
  EXPECT_THROW(distance_transform(make(2, 2, {0, 0, 0, 0})), DataError);
}

TEST(Grid, DistanceMatchesBruteForce) {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 60; ++t) {
    const std::size_t nc = 1 + gen() % 20, nr = 1 + gen() % 20;
    std::vector<double> v(nc * nr);
    const double density = 0.02 + 0.3 * (gen() % 100) / 100.0;
    for (auto& x : v) {
      const double u = (gen() % 10000) / 10000.0;
      x = u < density ? 1.0 : (u < density + 0.05 ? -9999.0 : 0.0);
    }
    v[gen() % v.size()] = 1.0;
    const Grid mask = make(nc, nr, v, 1.0 + gen() % 50);
    const auto fast = distance_transform(mask);
    const auto slow = brute_distance(mask);
    for (std::size_t i = 0; i < v.size(); ++i) {
      ASSERT_EQ(fast[i], slow[i]) << "cell " << i;
      if (v[i] == 1.0) EXPECT_EQ(fast[i], 0.0);
      else if (v[i] == 0.0) EXPECT_GT(fast[i], 0.0);
    }
  }
}

TEST(Grid, StackRejectsMisalignedLayers) {
  auto a = make(2, 2, {1, 2, 3, 4});
  auto b = Grid(2, 2, 5.0, 0.0, 30.0, -9999.0, {1, 2, 3, 4});
  EXPECT_THROW(FactorStack({"a", "b"}, {a, b}), DataError);
  EXPECT_THROW(FactorStack({"a", "a"}, {a, a}), DataError);
}
