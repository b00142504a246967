#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <random>

#include "lsm/error.hpp"
#include "lsm/metrics.hpp"
#include "lsm/parallel.hpp"
#include "lsm/rng.hpp"
#include "lsm/selection.hpp"
#include "lsm/synthetic.hpp"

using namespace lsm;

namespace {

SampleTable label_copy_table(std::size_t n) {
  SampleTable t;
  t.features = Matrix(n, 3);
  t.labels.resize(n);
  Rng rng(1);
  for (std::size_t i = 0; i < n; ++i) {
    t.labels[i] = i % 2;
    t.features(i, 0) = rng.normal();
    t.features(i, 1) = t.labels[i];
    t.features(i, 2) = 4.0;
  }
  t.factor_names = {"noise", "copy", "const"};
  return t;
}

WrapperData wrapper_from(const SampleTable& t, std::uint64_t seed) {
  const auto s = split(t.labels, seed);
  const auto n = normalize(t, s.train_idx);
  WrapperData d;
  d.X_train = n.features.select_rows(s.train_idx);
  d.X_valid = n.features.select_rows(s.valid_idx);
  for (auto i : s.train_idx) d.y_train.push_back(t.labels[i]);
  for (auto i : s.valid_idx) d.y_valid.push_back(t.labels[i]);
  return d;
}

}  // namespace

TEST(Masks, Helpers) {
  const FactorMask m{true, false, true};
  EXPECT_EQ(mask_string(m), "101");
  EXPECT_EQ(parse_mask("101"), m);
  EXPECT_EQ(mask_bits(m), 5u);
  EXPECT_EQ(mask_from_bits(5, 3), m);
  EXPECT_EQ(popcount(m), 2u);
  EXPECT_THROW(parse_mask("10x"), DataError);
}

TEST(Igr, LabelCopyAndConstant) {
  const auto t = label_copy_table(200);
  const auto r = igr_rank(t, 10);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].factor, 1u);
  EXPECT_NEAR(r[0].vi, 1.0, 1e-12);
  EXPECT_NEAR(r[0].split_info, 1.0, 1e-12);
  EXPECT_EQ(r[2].factor, 2u);
  EXPECT_EQ(r[2].vi, 0.0);
  const auto m = igr_select(t, 1);
  EXPECT_EQ(mask_string(m), "010");
  EXPECT_EQ(popcount(igr_select(t, 3)), 3u);
  auto single = t;
  std::fill(single.labels.begin(), single.labels.end(), 1);
  EXPECT_THROW(igr_rank(single), DataError);
}

TEST(Igr, IndependentFactorScoresLow) {
  SampleTable t;
  const std::size_t n = 10000;
  t.features = Matrix(n, 1);
  Rng rng(2);
  for (std::size_t i = 0; i < n; ++i) {
    t.features(i, 0) = rng.normal();
    t.labels.push_back(rng.uniform() < 0.5);
  }
  t.factor_names = {"x"};
  EXPECT_LT(igr_rank(t)[0].vi, 0.02);
}

TEST(Igr, MonotoneTransformInvariant) {
  auto t = synthetic_benchmark(500, 3);
  const auto a = igr_rank(t);
  for (std::size_t i = 0; i < t.rows(); ++i) t.features(i, 4) = std::exp(t.features(i, 4)) * 3 + 1;
  const auto b = igr_rank(t);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].factor, b[k].factor);
    EXPECT_EQ(a[k].vi, b[k].vi);
  }
}

TEST(Igr, BinningRule) {
  const std::vector<double> v{5, 1, 3, 2, 4, 6, 8, 7, 9, 10};
  const auto codes = equal_frequency_bins(v, 5);
  // cuts at sorted[2], [4], [6], [8] = 3, 5, 7, 9
  EXPECT_EQ(codes, (std::vector<int>{2, 0, 1, 0, 1, 2, 3, 3, 4, 4}));
}

TEST(Lasso, ZeroLambdaIsLeastSquares) {
  Rng rng(4);
  Matrix X(60, 4);
  std::vector<double> y(60);
  Eigen::MatrixXd A(60, 4);
  Eigen::VectorXd b(60);
  for (std::size_t i = 0; i < 60; ++i) {
    for (std::size_t j = 0; j < 4; ++j) A(i, j) = X(i, j) = rng.normal();
    b(i) = y[i] = X(i, 0) - 2 * X(i, 2) + 0.3 * rng.normal();
  }
  const Eigen::VectorXd ls = (A.transpose() * A).ldlt().solve(A.transpose() * b);
  const auto beta = lasso_path(X, y, 0.0);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(beta[j], ls(j), 1e-6);
}

TEST(Lasso, LambdaMaxZeroesEverything) {
  Rng rng(5);
  Matrix X(50, 3);
  std::vector<double> y(50);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t j = 0; j < 3; ++j) X(i, j) = rng.normal();
    y[i] = X(i, 1) + 0.5 * rng.normal();
  }
  const double lmax = lasso_lambda_max(X, y);
  for (double b : lasso_path(X, y, lmax)) EXPECT_EQ(b, 0.0);
  // Just below the bound the strongest coordinate activates.
  const auto below = lasso_path(X, y, lmax * 0.99);
  EXPECT_NE(below[1], 0.0);
  // KKT: at the zero solution every |x_j . y| <= lambda / 2.
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 50; ++i) s += X(i, j) * y[i];
    EXPECT_LE(std::abs(s), lmax / 2 + 1e-12);
  }
}

TEST(Lasso, OrthonormalDesignSoftThreshold) {
  // Columns of a scaled Hadamard matrix are orthonormal.
  const double h = 0.5;
  Matrix X(4, 3, {h, h, h, h, -h, h, h, h, -h, h, -h, -h});
  const std::vector<double> y{1.0, -2.0, 0.5, 3.0};
  for (double lambda : {0.0, 0.3, 1.0, 2.5, 10.0}) {
    const auto b = lasso_path(X, y, lambda);
    for (std::size_t j = 0; j < 3; ++j) {
      double ols = 0;
      for (std::size_t i = 0; i < 4; ++i) ols += X(i, j) * y[i];
      const double expect = std::copysign(std::max(0.0, std::abs(ols) - lambda / 2), ols);
      EXPECT_NEAR(b[j], expect, 1e-8);
    }
  }
}

TEST(Lasso, ContinuityInLambda) {
  Rng rng(6);
  Matrix X(40, 3);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = 0; j < 3; ++j) X(i, j) = rng.normal();
    y[i] = X(i, 0) + X(i, 1) + rng.normal();
  }
  for (double lambda : {1.0, 5.0, 20.0}) {
    const auto a = lasso_path(X, y, lambda, 1e-12);
    const auto b = lasso_path(X, y, lambda + 1e-6, 1e-12);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_LT(std::abs(a[j] - b[j]), 1e-6);
  }
}

TEST(Lasso, SelectSignalFactorAndErrorPath) {
  Rng rng(7);
  Matrix X(200, 4);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    for (std::size_t j = 0; j < 4; ++j) X(i, j) = rng.normal();
    y[i] = X(i, 0) > 0;
  }
  std::vector<double> t(200);
  for (std::size_t i = 0; i < 200; ++i) t[i] = y[i] ? 1.0 : -1.0;
  const double lmax = lasso_lambda_max(X, t);
  const auto res = lasso_select(X, y, {.lambda = 0.8 * lmax}, 1);
  EXPECT_EQ(mask_string(res.mask), "1000");
  EXPECT_THROW(lasso_select(X, y, {.lambda = lmax * 1.0001}, 1), DataError);
  const auto cv = lasso_select(X, y, {.cv_lambda = true}, 1);
  EXPECT_TRUE(cv.mask[0]);
  EXPECT_EQ(cv.trace.size(), 51u);
}

TEST(Rfe, TraceAndArgmax) {
  const auto t = synthetic_benchmark(300, 8);
  const auto res = rfe(t.features, t.labels, default_spec(ModelFamily::kLR), 5, 2);
  ASSERT_EQ(res.trace.size(), 10u);
  double mx = 0;
  for (const auto& r : res.trace) mx = std::max(mx, r.score);
  EXPECT_EQ(res.score, mx);
  EXPECT_GE(popcount(res.mask), 1u);
}

TEST(Rfe, DropsNoiseFirst) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(100 + seed);
    Matrix X(200, 3);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
      for (std::size_t j = 0; j < 3; ++j) X(i, j) = rng.normal();
      y[i] = X(i, 0) + X(i, 1) > 0;
    }
    const auto res = rfe(X, y, default_spec(ModelFamily::kLR), 5, seed);
    hits += res.trace.front().note == "drop 2";
  }
  EXPECT_GE(hits, 9);
}

TEST(Pso, FixedPointAndLoggedParameters) {
  const auto t = synthetic_benchmark(400, 9);
  const auto d = wrapper_from(t, 1);
  const auto res = pso_select(d, default_spec(ModelFamily::kLR), {.swarm_size = 8, .iters = 30}, 3);
  EXPECT_EQ(res.params.at("c1"), "2");
  EXPECT_EQ(res.params.at("c2"), "2");
  EXPECT_EQ(res.params.at("w"), "0.9");
  for (std::size_t i = 1; i < res.trace.size(); ++i) EXPECT_GE(res.trace[i].score, res.trace[i - 1].score);
  EXPECT_EQ(res.score, res.trace.back().score);
  EXPECT_GE(popcount(res.mask), 1u);
  // Same seed, different thread count: identical outcome.
  set_thread_count(3);
  const auto again = pso_select(d, default_spec(ModelFamily::kLR), {.swarm_size = 8, .iters = 30}, 3);
  set_thread_count(1);
  EXPECT_EQ(again.mask, res.mask);
  EXPECT_EQ(again.trace.size(), res.trace.size());
}

TEST(Hho, ContractAndSmallPopulation) {
  const auto t = synthetic_benchmark(400, 10);
  const auto d = wrapper_from(t, 2);
  const auto res = hho_select(d, default_spec(ModelFamily::kLR), {.hawks = 6, .iters = 20}, 4);
  double mx = 0;
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    if (i > 0) EXPECT_GE(res.trace[i].score, res.trace[i - 1].score);
    mx = std::max(mx, res.trace[i].score);
  }
  EXPECT_EQ(res.score, mx);
  EXPECT_THROW(hho_select(d, default_spec(ModelFamily::kLR), {.hawks = 2}, 1), UsageError);
}

TEST(Hho, IdenticalPopulationStopsAtTarget) {
  // A label copy makes every repaired mask containing it perfect: the run ends
  // on the fitness target.
  auto t = label_copy_table(200);
  const auto d = wrapper_from(t, 3);
  const auto res = hho_select(d, default_spec(ModelFamily::kLR), {.hawks = 5, .iters = 50}, 1);
  EXPECT_EQ(res.score, 1.0);
  EXPECT_EQ(res.trace.back().note, "fitness target reached");
}

TEST(Exhaustive, CountsAndArgmax) {
  EXPECT_EQ(enumerate_masks(4, 3).size(), 5u);
  EXPECT_EQ(enumerate_masks(15, 3).size(), 32647u);
  EXPECT_THROW(enumerate_masks(21, 3), UsageError);

  const auto t = synthetic_benchmark(300, 11);
  const auto s = split(t.labels, 5);
  std::vector<std::size_t> cols{0, 1, 3, 6};
  const Matrix X = t.features.select_cols(cols);
  std::vector<int> ytr, yte;
  for (auto i : s.train_idx) ytr.push_back(t.labels[i]);
  for (auto i : s.test_idx) yte.push_back(t.labels[i]);
  const std::vector<ModelSpec> specs{default_spec(ModelFamily::kLR), default_spec(ModelFamily::kGBT)};
  const auto recs = exhaustive(X.select_rows(s.train_idx), ytr, X.select_rows(s.test_idx), yte, specs, 3, 1);
  ASSERT_EQ(recs.size(), 5u);
  const auto a = analyze_exhaustive(recs, 0, 4);
  for (const auto& r : recs) EXPECT_LE(r.accuracy[0], recs[a.best].accuracy[0]);
  // Thread count does not change the records.
  set_thread_count(4);
  const auto again = exhaustive(X.select_rows(s.train_idx), ytr, X.select_rows(s.test_idx), yte, specs, 3, 1);
  set_thread_count(1);
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_EQ(again[i].accuracy, recs[i].accuracy);
}

TEST(Exhaustive, AnalyticsMatchSortOracle) {
  // Synthetic records with repeated accuracies to exercise ties.
  const std::size_t p = 6;
  std::vector<ExhaustiveRecord> recs;
  std::mt19937_64 gen(12);
  for (const auto& m : enumerate_masks(p, 3)) {
    recs.push_back({m, popcount(m), {double(gen() % 17) / 16.0}});
  }
  const auto a = analyze_exhaustive(recs, 0, p);
  std::vector<double> all;
  for (const auto& r : recs) all.push_back(r.accuracy[0]);
  std::sort(all.begin(), all.end());
  auto q = [&](double f) {
    const double pos = f * (all.size() - 1);
    const auto lo = std::size_t(pos);
    return lo + 1 < all.size() ? all[lo] + (pos - lo) * (all[lo + 1] - all[lo]) : all[lo];
  };
  EXPECT_EQ(a.overall[0], all.front());
  EXPECT_EQ(a.overall[2], q(0.5));
  EXPECT_EQ(a.overall[4], all.back());
  std::size_t counted = 0;
  for (const auto& c : a.by_count) counted += c.masks;
  EXPECT_EQ(counted, recs.size());
  // Band counts per factor add up to the number of masks containing it.
  for (std::size_t j = 0; j < p; ++j) {
    std::size_t with = 0;
    for (const auto& r : recs) with += r.mask[j];
    EXPECT_EQ(a.band_counts[j][0] + a.band_counts[j][1] + a.band_counts[j][2] + a.band_counts[j][3], with);
  }
  const auto order = rank_records(recs, 0);
  EXPECT_EQ(order.front(), a.best);
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto &x = recs[order[k - 1]], &y = recs[order[k]];
    EXPECT_TRUE(x.accuracy[0] > y.accuracy[0] || (x.accuracy[0] == y.accuracy[0] && mask_bits(x.mask) < mask_bits(y.mask)));
  }
}
