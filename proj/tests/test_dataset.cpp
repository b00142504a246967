#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "lsm/dataset.hpp"
#include "lsm/error.hpp"

using namespace lsm;

namespace {

std::vector<int> balanced(std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i % 2;
  return y;
}

FactorStack flat_stack(std::size_t n, double cs, std::size_t layers = 2) {
  std::vector<std::string> names;
  std::vector<Grid> grids;
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<double> v(n * n);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(i) * (l + 1);
    names.push_back("f" + std::to_string(l));
    grids.emplace_back(n, n, 0.0, 0.0, cs, -9999.0, v);
  }
  return FactorStack(names, grids);
}

double cell_distance(const CellIndex& a, const CellIndex& b, double cs) {
  const double dr = double(a.row) - double(b.row), dc = double(a.col) - double(b.col);
  return std::sqrt(dr * dr + dc * dc) * cs;
}

}  // namespace

TEST(Dataset, InventoryParsingAndCells) {
  const auto inv = parse_inventory_csv("x,y\n15,85\n16,86\n45,5\n");
  ASSERT_EQ(inv.points.size(), 3u);
  const Grid ref(5, 5, 0, 0, 20, -9999.0, std::vector<double>(25));
  const auto cells = inventory_cells(inv, ref);
  ASSERT_EQ(cells.size(), 2u);  // first two share a cell
  EXPECT_EQ(cells[0], (CellIndex{0, 0}));
  EXPECT_EQ(cells[1], (CellIndex{4, 2}));
  EXPECT_THROW(inventory_cells(parse_inventory_csv("x,y\n150,5\n"), ref), DataError);
  EXPECT_THROW(parse_inventory_csv("a,b\n1,2\n"), DataError);
}

TEST(Dataset, EmptyInventoryRejected) {
  EXPECT_THROW(sample_non_landslides({}, flat_stack(10, 100), 1), DataError);
}

TEST(Dataset, NegativesSatisfyConstraints) {
  const auto stack = flat_stack(40, 100.0);
  const std::vector<CellIndex> slides{{5, 5}, {6, 30}, {30, 10}, {20, 20}};
  NegativeSampling opts;
  opts.min_dist_to_slide = 500.0;
  opts.knn_total_max = 1e9;
  const auto neg = sample_non_landslides(slides, stack, 42, opts);
  ASSERT_EQ(neg.size(), slides.size());
  for (const auto& n : neg) {
    for (const auto& s : slides) EXPECT_GE(cell_distance(n, s, 100.0), 500.0);
  }
  EXPECT_EQ(neg, sample_non_landslides(slides, stack, 42, opts));
}

TEST(Dataset, NearCandidatesRejectedAtThreshold) {
  // Every cell is within 1000 m of the slide, so no candidate survives.
  const auto stack = flat_stack(6, 100.0);
  EXPECT_THROW(sample_non_landslides({{2, 2}}, stack, 1), DataError);
}

TEST(Dataset, ExtractDropsNodataRows) {
  auto stack = flat_stack(5, 10.0);
  std::vector<Grid> layers{stack.layer(0), stack.layer(1)};
  layers[0].at(0, 0) = -9999.0;
  const FactorStack st({"a", "b"}, layers);
  const auto res = extract_samples({{0, 0}, {1, 1}}, {{2, 2}, {3, 3}}, st);
  EXPECT_EQ(res.dropped, 1u);
  ASSERT_EQ(res.table.rows(), 3u);
  EXPECT_EQ(res.table.labels, (std::vector<int>{1, 0, 0}));
  EXPECT_EQ(res.table.features(0, 0), layers[0].at(1, 1));
  EXPECT_EQ(res.table.features(2, 1), layers[1].at(3, 3));
}

TEST(Dataset, SplitSizes) {
  const auto y = balanced(1000);
  const auto s = split(y, 3);
  EXPECT_EQ(s.train_idx.size(), 700u);
  EXPECT_EQ(s.valid_idx.size(), 150u);
  EXPECT_EQ(s.test_idx.size(), 150u);
  std::set<std::size_t> all(s.train_idx.begin(), s.train_idx.end());
  all.insert(s.valid_idx.begin(), s.valid_idx.end());
  all.insert(s.test_idx.begin(), s.test_idx.end());
  EXPECT_EQ(all.size(), 1000u);

  const auto y20 = balanced(20);
  const auto s20 = split(y20, 9);
  EXPECT_EQ(s20.train_idx.size(), 14u);
  EXPECT_EQ(s20.valid_idx.size(), 3u);
  EXPECT_EQ(s20.test_idx.size(), 3u);
  for (const auto* part : {&s20.train_idx, &s20.valid_idx, &s20.test_idx}) {
    std::set<int> labels;
    for (auto i : *part) labels.insert(y20[i]);
    EXPECT_EQ(labels.size(), 2u);
  }
  EXPECT_EQ(split(y20, 9).train_idx, s20.train_idx);
  EXPECT_THROW(split(balanced(9), 1), DataError);
}

TEST(Dataset, KfoldStratified) {
  std::vector<int> y(100, 0);
  for (std::size_t i = 0; i < 30; ++i) y[i * 3] = 1;
  const auto folds = kfold(y, 5, 4);
  ASSERT_EQ(folds.size(), 5u);
  std::set<std::size_t> all;
  for (const auto& f : folds) {
    EXPECT_EQ(f.size(), 20u);
    const auto pos = std::count_if(f.begin(), f.end(), [&](std::size_t i) { return y[i] == 1; });
    EXPECT_NEAR(double(pos), 0.3 * f.size(), 1.0);
    all.insert(f.begin(), f.end());
  }
  EXPECT_EQ(all.size(), 100u);
  EXPECT_THROW(kfold(balanced(3), 5, 1), DataError);
}

TEST(Dataset, NormalizeUsesTrainingStatistics) {
  SampleTable t;
  t.features = Matrix(6, 2, {1, 5, 2, 5, 3, 5, 4, 5, 100, 5, -100, 5});
  t.labels = {0, 1, 0, 1, 0, 1};
  t.factor_names = {"a", "b"};
  const std::vector<std::size_t> train{0, 1, 2, 3};
  const auto n = normalize(t, train);
  double m = 0, v = 0;
  for (auto i : train) m += n.features(i, 0);
  m /= 4;
  for (auto i : train) v += (n.features(i, 0) - m) * (n.features(i, 0) - m);
  EXPECT_NEAR(m, 0.0, 1e-9);
  EXPECT_NEAR(std::sqrt(v / 4), 1.0, 1e-9);
  const double sd = std::sqrt(1.25);
  EXPECT_NEAR(n.features(4, 0), (100 - 2.5) / sd, 1e-9);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(n.features(i, 1), 0.0);
  ASSERT_TRUE(n.normalization);
  EXPECT_DOUBLE_EQ((*n.normalization)[0].mean, 2.5);
}

TEST(Dataset, SampleCsvHeader) {
  SampleTable t;
  t.features = Matrix(1, 2, {1.5, 2});
  t.labels = {1};
  t.coords = {{3, 4}};
  t.factor_names = {"slope", "twi"};
  EXPECT_EQ(write_sample_csv(t), "label,x_cell,y_cell,slope,twi\n1,4,3,1.5,2\n");
}
