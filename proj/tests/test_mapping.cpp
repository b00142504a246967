#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "lsm/error.hpp"
#include "lsm/mapping.hpp"

using namespace lsm;

namespace {

double sse(const std::vector<double>& v, std::size_t i, std::size_t j) {
  double mean = 0;
  for (std::size_t t = i; t < j; ++t) mean += v[t];
  mean /= double(j - i);
  double s = 0;
  for (std::size_t t = i; t < j; ++t) s += (v[t] - mean) * (v[t] - mean);
  return s;
}

// Minimum over every split of the sorted list into k contiguous nonempty
// parts; class costs are added in class order.
double brute_jenks(const std::vector<double>& v, std::size_t k, std::size_t start = 0, double acc = 0.0) {
  if (k == 1) return acc + sse(v, start, v.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t end = start + 1; end + k - 1 <= v.size(); ++end) {
    best = std::min(best, brute_jenks(v, k - 1, end, acc + sse(v, start, end)));
  }
  return best;
}

FactorStack tiny_stack() {
  std::vector<double> a(16), b(16);
  for (std::size_t i = 0; i < 16; ++i) {
    a[i] = double(i);
    b[i] = double(i % 4) * 2.0;
  }
  a[5] = -9999.0;
  return FactorStack({"a", "b"}, {Grid(4, 4, 0, 0, 10, -9999.0, a), Grid(4, 4, 0, 0, 10, -9999.0, b)});
}

}  // namespace

TEST(Jenks, SeparatedClusters) {
  const std::vector<double> v{1, 2, 3, 101, 102, 201, 202, 301, 302, 401, 402};
  const auto r = jenks_breaks(v, 5);
  EXPECT_EQ(r.breaks, (std::vector<double>{3, 102, 202, 302}));
  EXPECT_EQ(jenks_breaks(v, 1).breaks.size(), 0u);
  EXPECT_THROW(jenks_breaks(std::vector<double>{1, 1, 2}, 3), DataError);
}

TEST(Jenks, MatchesBruteForce) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 5 + gen() % 11, k = 1 + gen() % 5;
    std::vector<double> v(n);
    for (auto& x : v) x = u(gen);
    const auto r = jenks_breaks(v, k);
    std::sort(v.begin(), v.end());
    EXPECT_EQ(r.objective, brute_jenks(v, k)) << "n=" << n << " k=" << k;
    EXPECT_TRUE(std::is_sorted(r.breaks.begin(), r.breaks.end()));
  }
}

TEST(Jenks, SubsampleIsSeeded) {
  std::vector<double> v(5000);
  std::mt19937_64 gen(32);
  for (auto& x : v) x = double(gen() % 100000) / 1e5;
  const auto a = jenks_breaks(v, 5, 1000, 7);
  const auto b = jenks_breaks(v, 5, 1000, 7);
  EXPECT_EQ(a.breaks, b.breaks);
  EXPECT_EQ(a.sample_size, 1000u);
}

TEST(Classify, TieGoesToLowerClass) {
  const std::vector<double> br{0.2, 0.4, 0.6, 0.8};
  EXPECT_EQ(classify_value(0.1, br), 1);
  EXPECT_EQ(classify_value(0.2, br), 1);
  EXPECT_EQ(classify_value(0.2000001, br), 2);
  EXPECT_EQ(classify_value(0.95, br), 5);
  Grid p(3, 1, 0, 0, 1, -1.0, {0.1, -1.0, 0.7});
  const auto c = classify_raster(p, {br, 0, 0});
  EXPECT_EQ(c[0], 1.0);
  EXPECT_TRUE(c.is_nodata(1));
  EXPECT_EQ(c[2], 4.0);
  double last = 0;
  for (double v = 0; v <= 1.0; v += 0.01) {
    const int k = classify_value(v, br);
    EXPECT_GE(k, last);
    last = k;
  }
}

TEST(ClassStats, HandCount) {
  const Grid classes(3, 3, 0, 0, 1, -9999.0, {1, 2, 3, 4, 5, 5, 1, 1, -9999.0});
  const std::vector<CellIndex> slides{{1, 1}, {1, 2}};
  const auto st = class_statistics(classes, slides);
  EXPECT_EQ(st.slide_pct, (std::vector<double>{0, 0, 0, 0, 100}));
  EXPECT_EQ(st.non_slide_cells, (std::vector<std::size_t>{3, 1, 1, 1, 0}));
  EXPECT_DOUBLE_EQ(std::accumulate(st.non_slide_pct.begin(), st.non_slide_pct.end(), 0.0), 100.0);
  EXPECT_THROW(class_statistics(classes, {}), DataError);
}

TEST(Score, ConsistentNodataAndBlockInvariant) {
  const auto st = tiny_stack();
  Matrix X(16, 2);
  std::vector<int> y(16);
  for (std::size_t i = 0; i < 16; ++i) {
    X(i, 0) = (st.layer(0)[i] == -9999.0 ? 0 : st.layer(0)[i] - 7.5) / 4.6;
    X(i, 1) = (st.layer(1)[i] - 3) / 2.2;
    y[i] = i >= 8;
  }
  const std::vector<NormStat> norm{{7.5, 4.6}, {3, 2.2}};
  const auto m = fit_logistic(X, y, {.C = 1.0}, {"a", "b"});
  const FactorMask mask{true, true};
  const auto g1 = score_raster(m, st, mask, norm, 1);
  const auto g3 = score_raster(m, st, mask, norm, 3);
  EXPECT_TRUE(g1.is_nodata(5));
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(g1[i], g3[i]);
    if (i == 5) continue;
    EXPECT_NEAR(g1[i], m.predict_proba(X.row(i)), 1e-9);
    EXPECT_GE(g1[i], 0.0);
    EXPECT_LE(g1[i], 1.0);
  }
  EXPECT_THROW(score_raster(m, st, FactorMask{true, false}, std::vector<NormStat>{{0, 1}}), DataError);
}
