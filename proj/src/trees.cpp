#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "lsm/error.hpp"
#include "lsm/models.hpp"
#include "lsm/parallel.hpp"
#include "lsm/rng.hpp"

namespace lsm {

double Tree::predict(std::span<const double> x) const {
  std::size_t k = 0;
  while (nodes[k].feature >= 0) {
    const auto& nd = nodes[k];
    k = static_cast<std::size_t>(x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right);
  }
  return nodes[k].value;
}

int Tree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    best = std::max(best, d[k]);
    if (nodes[k].feature >= 0) {
      d[static_cast<std::size_t>(nodes[k].left)] = d[k] + 1;
      d[static_cast<std::size_t>(nodes[k].right)] = d[k] + 1;
    }
  }
  return best;
}

namespace detail {
namespace {

double impurity(double n1, double n, SplitCriterion c) {
  if (n <= 0) return 0.0;
  const double p1 = n1 / n, p0 = 1.0 - p1;
  if (c == SplitCriterion::kGini) return 1.0 - p1 * p1 - p0 * p0;
  double h = 0.0;
  if (p1 > 0) h -= p1 * std::log2(p1);
  if (p0 > 0) h -= p0 * std::log2(p0);
  return h;
}

// Midpoint threshold that still sends `lo` left and `hi` right.
double midpoint(double lo, double hi) {
  const double t = lo + (hi - lo) / 2.0;
  return t >= hi ? lo : t;
}

}  // namespace

std::vector<std::size_t> varying_columns(const Matrix& X) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < X.cols(); ++j) {
    for (std::size_t i = 1; i < X.rows(); ++i) {
      if (X(i, j) != X(0, j)) {
        out.push_back(j);
        break;
      }
    }
  }
  return out;
}

SplitChoice best_cart_split(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows,
                            std::span<const std::size_t> features, SplitCriterion criterion,
                            std::size_t min_samples_leaf) {
  SplitChoice best;
  best.score = -std::numeric_limits<double>::infinity();
  const std::size_t n = rows.size();
  if (n < 2) return {};
  double n1 = 0;
  for (auto r : rows) n1 += y[r] != 0 ? 1.0 : 0.0;
  const double nd = static_cast<double>(n);
  const double parent = nd * impurity(n1, nd, criterion);
  std::vector<std::pair<double, int>> vals(n);
  for (auto f : features) {
    for (std::size_t i = 0; i < n; ++i) vals[i] = {X(rows[i], f), y[rows[i]] != 0 ? 1 : 0};
    std::sort(vals.begin(), vals.end());
    double left1 = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left1 += vals[i].second;
      if (vals[i].first == vals[i + 1].first) continue;
      const std::size_t nl = i + 1, nr = n - nl;
      if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
      const double dl = static_cast<double>(nl), dr = static_cast<double>(nr);
      const double dec = parent - dl * impurity(left1, dl, criterion) - dr * impurity(n1 - left1, dr, criterion);
      if (dec > best.score) {
        best = {static_cast<int>(f), midpoint(vals[i].first, vals[i + 1].first), dec};
      }
    }
  }
  if (best.feature < 0) return {};
  return best;
}

SplitChoice best_gbt_split(const Matrix& X, std::span<const double> grad, std::span<const double> hess,
                           std::span<const std::size_t> rows, std::span<const std::size_t> features,
                           double reg_lambda, double min_child_weight) {
  SplitChoice best;
  best.score = -std::numeric_limits<double>::infinity();
  const std::size_t n = rows.size();
  if (n < 2) return {};
  double G = 0, H = 0;
  for (auto r : rows) {
    G += grad[r];
    H += hess[r];
  }
  const double parent = G * G / (H + reg_lambda);
  std::vector<std::pair<double, std::size_t>> vals(n);
  for (auto f : features) {
    for (std::size_t i = 0; i < n; ++i) vals[i] = {X(rows[i], f), rows[i]};
    std::sort(vals.begin(), vals.end());
    double gl = 0, hl = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      gl += grad[vals[i].second];
      hl += hess[vals[i].second];
      if (vals[i].first == vals[i + 1].first) continue;
      const double gr = G - gl, hr = H - hl;
      if (hl < min_child_weight || hr < min_child_weight) continue;
      const double gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent);
      if (gain > best.score) {
        best = {static_cast<int>(f), midpoint(vals[i].first, vals[i + 1].first), gain};
      }
    }
  }
  if (best.feature < 0) return {};
  return best;
}

}  // namespace detail

namespace {

void check_finite(const Matrix& X, std::span<const int> y, const char* who) {
  if (X.rows() == 0 || X.rows() != y.size()) throw DataError(fmt::format("{}: X and y disagree in row count", who));
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw DataError(fmt::format("{}: non-finite input", who));
  }
}

// Draws k distinct entries of `pool` and returns them sorted.
std::vector<std::size_t> sample_features(std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::size_t features_per_split(MaxFeatures mf, std::size_t m) {
  if (m == 0) return 0;
  const double dm = static_cast<double>(m);
  switch (mf) {
    case MaxFeatures::kAuto:
    case MaxFeatures::kSqrt:
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(dm))));
    case MaxFeatures::kLog2:
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::log2(dm))));
    case MaxFeatures::kAll:
      return m;
  }
  return m;
}

struct CartBuilder {
  const Matrix& X;
  std::span<const int> y;
  const ForestParams& p;
  const std::vector<std::size_t>& pool;
  std::size_t k;
  Rng& rng;
  Tree tree;
  std::vector<double> importance;

  int build(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double n1 = 0;
    for (auto r : rows) n1 += y[r] != 0 ? 1.0 : 0.0;
    const double n = static_cast<double>(rows.size());
    tree.nodes[static_cast<std::size_t>(id)].value = n > 0 ? n1 / n : 0.0;
    const bool pure = n1 == 0 || n1 == n;
    if (pure || depth >= p.max_depth || rows.size() < static_cast<std::size_t>(p.min_samples_split) ||
        rows.size() < 2 * static_cast<std::size_t>(p.min_samples_leaf) || pool.empty()) {
      return id;
    }
    const auto feats = sample_features(pool, k, rng);
    const auto split = detail::best_cart_split(X, y, rows, feats, p.criterion,
                                               static_cast<std::size_t>(p.min_samples_leaf));
    if (split.feature < 0 || !(split.score > 1e-12)) return id;
    importance[static_cast<std::size_t>(split.feature)] += split.score;
    std::vector<std::size_t> left, right;
    for (auto r : rows) (X(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    auto& nd = tree.nodes[static_cast<std::size_t>(id)];
    nd.feature = split.feature;
    nd.threshold = split.threshold;
    nd.left = l;
    nd.right = r;
    return id;
  }
};

struct BoostBuilder {
  const Matrix& X;
  std::span<const double> g;
  std::span<const double> h;
  const BoostParams& p;
  const std::vector<std::size_t>& feats;
  Tree tree;
  std::vector<double>& importance;

  int build(std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double G = 0, H = 0;
    for (auto r : rows) {
      G += g[r];
      H += h[r];
    }
    tree.nodes[static_cast<std::size_t>(id)].value = -G / (H + p.reg_lambda);
    if (depth >= p.max_depth || feats.empty()) return id;
    const auto split = detail::best_gbt_split(X, g, h, rows, feats, p.reg_lambda, p.min_child_weight);
    if (split.feature < 0 || !(split.score > p.gamma)) return id;
    importance[static_cast<std::size_t>(split.feature)] += split.score;
    std::vector<std::size_t> left, right;
    for (auto r : rows) (X(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    auto& nd = tree.nodes[static_cast<std::size_t>(id)];
    nd.feature = split.feature;
    nd.threshold = split.threshold;
    nd.left = l;
    nd.right = r;
    return id;
  }
};

const char* criterion_name(SplitCriterion c) { return c == SplitCriterion::kGini ? "gini" : "entropy"; }

const char* max_features_name(MaxFeatures m) {
  switch (m) {
    case MaxFeatures::kAuto: return "auto";
    case MaxFeatures::kSqrt: return "sqrt";
    case MaxFeatures::kLog2: return "log2";
    case MaxFeatures::kAll: return "all";
  }
  return "auto";
}

}  // namespace

FittedModel fit_random_forest(const Matrix& X, std::span<const int> y, const ForestParams& params,
                              std::vector<std::string> names, std::uint64_t seed) {
  check_finite(X, y, "random forest");
  if (params.n_estimators < 1) throw UsageError("random forest: n_estimators must be >= 1");
  if (params.max_depth < 1 || params.min_samples_leaf < 1 || params.min_samples_split < 2) {
    throw UsageError("random forest: invalid depth/leaf/split limits");
  }
  const std::size_t n = X.rows(), p = X.cols();
  const auto pool = detail::varying_columns(X);
  const std::size_t k = features_per_split(params.max_features, pool.size());
  const auto T = static_cast<std::size_t>(params.n_estimators);
  std::vector<Tree> trees(T);
  std::vector<std::vector<double>> imps(T);
  parallel_for(T, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = rng.below(n);
    CartBuilder b{X, y, params, pool, k, rng, {}, std::vector<double>(p, 0.0)};
    b.build(rows, 0);
    trees[t] = std::move(b.tree);
    imps[t] = std::move(b.importance);
  });
  std::vector<double> imp(p, 0.0);
  for (const auto& v : imps) {
    for (std::size_t j = 0; j < p; ++j) imp[j] += v[j];
  }
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0) {
    for (auto& v : imp) v /= total;
  }
  ModelSpec spec{ModelFamily::kRF,
                 {{"n_estimators", fmt::format("{}", params.n_estimators)},
                  {"max_depth", fmt::format("{}", params.max_depth)},
                  {"min_samples_split", fmt::format("{}", params.min_samples_split)},
                  {"min_samples_leaf", fmt::format("{}", params.min_samples_leaf)},
                  {"max_features", max_features_name(params.max_features)},
                  {"criterion", criterion_name(params.criterion)}}};
  return FittedModel(std::move(spec), ForestState{std::move(trees)}, std::move(names), seed, std::move(imp));
}

FittedModel fit_gbt(const Matrix& X, std::span<const int> y, const BoostParams& params,
                    std::vector<std::string> names, std::uint64_t seed) {
  check_finite(X, y, "gbt");
  if (params.n_estimators < 1) throw UsageError("gbt: n_estimators must be >= 1");
  if (params.max_depth < 1) throw UsageError("gbt: max_depth must be >= 1");
  if (!(params.colsample_bytree > 0.0 && params.colsample_bytree <= 1.0)) {
    throw UsageError("gbt: colsample_bytree must be in (0, 1]");
  }
  const std::size_t n = X.rows(), p = X.cols();
  double pos = 0;
  for (int v : y) pos += v != 0 ? 1.0 : 0.0;
  const double prior = std::clamp(pos / static_cast<double>(n), 1e-12, 1.0 - 1e-12);

  BoostState st;
  st.base_margin = std::log(prior / (1.0 - prior));
  st.learning_rate = params.learning_rate;
  std::vector<double> margin(n, st.base_margin), g(n), h(n), imp(p, 0.0);
  const auto pool = detail::varying_columns(X);
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(params.colsample_bytree * static_cast<double>(pool.size()))));
  Rng rng(seed);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (int t = 0; t < params.n_estimators; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double pr = 1.0 / (1.0 + std::exp(-margin[i]));
      g[i] = pr - (y[i] != 0 ? 1.0 : 0.0);
      h[i] = std::max(pr * (1.0 - pr), 1e-16);
    }
    const auto feats = k >= pool.size() ? pool : sample_features(pool, k, rng);
    BoostBuilder b{X, g, h, params, feats, {}, imp};
    std::vector<std::size_t> rows = all;
    b.build(rows, 0);
    for (std::size_t i = 0; i < n; ++i) margin[i] += st.learning_rate * b.tree.predict(X.row(i));
    st.trees.push_back(std::move(b.tree));
  }
  ModelSpec spec{ModelFamily::kGBT,
                 {{"n_estimators", fmt::format("{}", params.n_estimators)},
                  {"max_depth", fmt::format("{}", params.max_depth)},
                  {"gamma", fmt::format("{}", params.gamma)},
                  {"colsample_bytree", fmt::format("{}", params.colsample_bytree)}}};
  return FittedModel(std::move(spec), std::move(st), std::move(names), seed, std::move(imp));
}

}  // namespace lsm
